"""Seeding and argument-validation helpers shared by the estimators and simulators."""

import numpy as np

from .exceptions import InvalidParameterError


def as_seed_sequence(seed):
    """Accept an int, None, a SeedSequence or a Generator and return a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(seed.integers(0, 2**63))
    return np.random.SeedSequence(seed)


def spawn(seed, n):
    return as_seed_sequence(seed).spawn(n)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise InvalidParameterError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_positive(value, name):
    if not value > 0:
        raise InvalidParameterError(f"{name} must be positive, got {value!r}")
    return float(value)
