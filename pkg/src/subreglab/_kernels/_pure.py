"""Pure backend for the sweep kernels (numpy, no compiled code).

All backends share three operations used inside grid sweeps:

* ``dist_many_points``  -- distances of many points to one interval union,
* ``dist_packed``       -- distances of one point to many packed unions,
* ``max_ratio``         -- the modulus ratio reduction with its conventions.

Unions are passed as flat endpoint arrays; an empty union has distance +inf.
The reduction is deterministic: ties in the ratio break toward the smaller
|x - center|, then toward the smaller x, so results do not depend on how a
sweep was chunked.
"""

from __future__ import annotations

import numpy as np

NAME = "pure"


def dist_many_points(ps: np.ndarray, los: np.ndarray, his: np.ndarray) -> np.ndarray:
    """Distance of each point in ``ps`` to the union with parts (los, his)."""
    ps = np.asarray(ps, dtype=np.float64)
    if los.size == 0:
        return np.full(ps.shape, np.inf)
    gap = np.maximum(los[None, :] - ps[:, None], ps[:, None] - his[None, :])
    return np.maximum(gap.min(axis=1), 0.0)


def dist_packed(
    p: float,
    starts: np.ndarray,
    counts: np.ndarray,
    los: np.ndarray,
    his: np.ndarray,
) -> np.ndarray:
    """Distance of the point ``p`` to each packed union.

    Union ``i`` occupies ``los[starts[i]:starts[i]+counts[i]]``; a count of
    zero yields +inf.
    """
    out = np.full(counts.shape, np.inf)
    nonempty = counts > 0
    if not nonempty.any():
        return out
    gap = np.maximum(los - p, p - his)
    # Packed segments are contiguous, so the starts of the nonempty ones are
    # valid reduceat boundaries (empty segments occupy no elements).
    mins = np.minimum.reduceat(gap, starts[nonempty])
    out[nonempty] = np.maximum(mins, 0.0)
    return out


def max_ratio(
    xs: np.ndarray,
    nums: np.ndarray,
    dens: np.ndarray,
    q: float,
    center: float,
) -> tuple[float, int, int]:
    """Reduce num/den**q over a sweep.

    Conventions: den == 0 with num == 0 contributes 0; den == 0 with num > 0
    is a violation (ratio +inf). Returns (eta_hat, witness_index,
    violation_count) with the deterministic tie-break described above.
    """
    ratios = np.empty(xs.shape, dtype=np.float64)
    zero_den = dens == 0.0
    ok = ~zero_den
    ratios[ok] = nums[ok] / dens[ok] ** q
    viol = zero_den & (nums > 0.0)
    ratios[zero_den] = 0.0
    ratios[viol] = np.inf
    offs = np.abs(xs - center)
    order = np.lexsort((xs, offs, -ratios))
    best = int(order[0])
    return float(ratios[best]), best, int(viol.sum())
