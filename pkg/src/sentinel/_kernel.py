"""Compiled streaming kernel shared by the detector and boundary fitting."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _advance(ring, cursor, values, scratch, basis_t, centroid, weights, out):
    """Feed ``values`` through the ring; write one departure per full window into ``out``.

    ``cursor`` holds [write position, samples seen] and is updated in place.
    Returns the number of departures written.
    """
    lag = ring.shape[0]
    dim = basis_t.shape[0]
    pos = cursor[0]
    seen = cursor[1]
    n_out = 0
    for v in values:
        ring[pos] = v
        pos += 1
        if pos == lag:
            pos = 0
        seen += 1
        if seen >= lag:
            head = lag - pos
            for k in range(head):
                scratch[k] = ring[pos + k]
            for k in range(pos):
                scratch[head + k] = ring[k]
            score = 0.0
            for r in range(dim):
                acc = 0.0
                for k in range(lag):
                    acc += basis_t[r, k] * scratch[k]
                diff = acc - centroid[r]
                score += weights[r] * (diff * diff)
            out[n_out] = score
            n_out += 1
    cursor[0] = pos
    cursor[1] = seen
    return n_out


def stream_scores(values, basis_t, centroid, weights) -> np.ndarray:
    """Departure of every full window of ``values``, computed exactly as online scoring does."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    lag = basis_t.shape[1]
    out = np.empty(max(len(values) - lag + 1, 0))
    _advance(np.zeros(lag), np.zeros(2, dtype=np.int64), values, np.empty(lag),
             np.ascontiguousarray(basis_t), np.ascontiguousarray(centroid, dtype=np.float64),
             np.ascontiguousarray(weights, dtype=np.float64), out)
    return out
