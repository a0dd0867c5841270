"""Compiled inner loops for graph sampling and structural peeling.

These only touch index structure, never symbol values, so Monte-Carlo runs
at m ~ 10^4 stay fast.  The pure-Python :class:`~ratelessmv.ltcode.DecoderState`
is the reference they are tested against.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def floyd_sample_rows(m, degrees, uniforms):
    """Sample ``degrees[j]`` distinct sources from ``range(m)`` for every row.

    Robert Floyd's algorithm, driven by pre-drawn uniforms so the result is a
    pure function of the caller's generator.  Returns CSR ``(indptr, indices)``
    with each row sorted.
    """
    n_rows = degrees.shape[0]
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    for j in range(n_rows):
        indptr[j + 1] = indptr[j] + degrees[j]
    indices = np.empty(indptr[n_rows], dtype=np.int64)
    # stamp[i] == j + 1 marks source i as already taken by row j
    stamp = np.zeros(m, dtype=np.int64)
    for j in range(n_rows):
        d = degrees[j]
        start = indptr[j]
        filled = 0
        for t in range(m - d, m):
            pick = np.int64(uniforms[start + filled] * (t + 1))
            if pick > t:
                pick = t
            if stamp[pick] == j + 1:
                pick = t
            stamp[pick] = j + 1
            indices[start + filled] = pick
            filled += 1
        indices[start:start + d].sort()
    return indptr, indices


@njit(cache=True)
def _transpose(m, indptr, indices):
    n_rows = indptr.shape[0] - 1
    counts = np.zeros(m + 1, dtype=np.int64)
    for e in range(indices.shape[0]):
        counts[indices[e] + 1] += 1
    for i in range(m):
        counts[i + 1] += counts[i]
    src_ptr = counts.copy()
    fill = counts[:m].copy()
    src_idx = np.empty(indices.shape[0], dtype=np.int64)
    for j in range(n_rows):
        for e in range(indptr[j], indptr[j + 1]):
            i = indices[e]
            src_idx[fill[i]] = j
            fill[i] += 1
    return src_ptr, src_idx


@njit(cache=True)
def peel_trajectory(m, indptr, indices, order):
    """Ingest symbols in ``order`` and peel after each arrival.

    Returns ``(trajectory, used)`` where ``trajectory[s]`` is the number of
    decoded sources after ``s + 1`` arrivals and ``used`` is the arrival count
    at completion, or -1 if ``order`` is exhausted first.
    """
    n_sym = indptr.shape[0] - 1
    src_ptr, src_idx = _transpose(m, indptr, indices)
    arrived = np.zeros(n_sym, dtype=np.bool_)
    residual = np.zeros(n_sym, dtype=np.int64)
    id_sum = np.zeros(n_sym, dtype=np.int64)
    decoded = np.zeros(m, dtype=np.bool_)
    queue = np.empty(n_sym, dtype=np.int64)
    head = 0
    tail = 0
    count = 0
    traj = np.zeros(order.shape[0], dtype=np.int64)
    for step in range(order.shape[0]):
        s = order[step]
        arrived[s] = True
        deg = 0
        acc = 0
        for e in range(indptr[s], indptr[s + 1]):
            i = indices[e]
            if not decoded[i]:
                deg += 1
                acc += i
        residual[s] = deg
        id_sum[s] = acc
        if deg == 1:
            queue[tail] = s
            tail += 1
        while head < tail:
            t = queue[head]
            head += 1
            if residual[t] != 1:
                continue
            src = id_sum[t]
            residual[t] = 0
            decoded[src] = True
            count += 1
            for e in range(src_ptr[src], src_ptr[src + 1]):
                u = src_idx[e]
                if arrived[u] and residual[u] > 0:
                    residual[u] -= 1
                    id_sum[u] -= src
                    if residual[u] == 1:
                        queue[tail] = u
                        tail += 1
        traj[step] = count
        if count == m:
            return traj[:step + 1], step + 1
    return traj, -1
