"""Set-valued maps on the real line and the built-in catalog.

A :class:`SetValuedMap` is an evaluation oracle ``x -> IntervalUnion`` with
an optional analytic inverse oracle ``y -> IntervalUnion``.  Maps are
immutable, stateless and safe to evaluate from parallel sweeps.

The catalog contains every mapping used by the replication suite, each with
a hand-derived piecewise formula (including hand-derived subdifferentials;
nothing is computed symbolically):

``sqrt-abs``             square-root cusp x -> {sqrt|x|}
``Q-map``                staircase map with geometrically shrinking interval
                         steps; not metrically regular around the origin
``S-map``                solution map S(x) = Q^{-1}(-x) of the inclusion
                         0 in x + Q(y)
``subdiff-plateau``      subdifferential of the plateau function
                         max(1, |x|) (value 1 on [-1,1])
``subdiff-sqrt``         subdifferential of sqrt|x| (full line at 0)
``identity``             x -> {x}
``zero-map``             x -> {0}
``halfline-normal-cone`` normal cone to [0, +inf)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CapabilityError, DomainError
from .intervals import (
    FULL_LINE,
    INF,
    ClosedInterval,
    IntervalUnion,
    normalize,
)

EMPTY = IntervalUnion.empty()


@dataclass(frozen=True)
class SetValuedMap:
    """Evaluation oracle for F: R =-> R with optional analytic inverse.

    ``anchors`` lists points where the analytic structure changes (kinks,
    branch accumulation points); scan-based solvers refine around them.
    ``truncation_scale`` marks the argument magnitude at or below which the
    formula is truncated (see the Q/S maps); estimators flag sweeps whose
    grid crosses it.
    """

    label: str
    eval_fn: Callable[[float], IntervalUnion]
    inverse_fn: Callable[[float], IntervalUnion] | None = None
    domain: ClosedInterval = FULL_LINE
    anchors: tuple[float, ...] = ()
    truncation_scale: float | None = None

    def eval(self, x: float) -> IntervalUnion:
        if not self.domain.contains(x):
            raise DomainError(f"{self.label}: argument {x!r} outside domain {self.domain!r}")
        return self.eval_fn(x)

    @property
    def has_inverse(self) -> bool:
        return self.inverse_fn is not None

    def inverse_eval(
        self,
        y: float,
        window: ClosedInterval | None = None,
        resolution: int = 4096,
    ) -> IntervalUnion:
        """The preimage F^{-1}(y).

        Uses the analytic inverse oracle when present.  Otherwise a search
        ``window`` must be supplied; the result is then a grid-bracketed
        outer approximation (cells of the window whose values come within a
        cell-width of containing ``y``) and callers should treat it as
        approximate.
        """
        if self.inverse_fn is not None:
            return self.inverse_fn(y)
        if window is None:
            raise CapabilityError(
                f"{self.label}: no inverse oracle and no search window supplied"
            )
        return self._bracketed_inverse(y, window, resolution)

    def _bracketed_inverse(
        self, y: float, window: ClosedInterval, resolution: int
    ) -> IntervalUnion:
        xs = np.linspace(window.lo, window.hi, resolution + 1)
        step = (window.hi - window.lo) / resolution
        hits = []
        for lo, hi in zip(xs[:-1], xs[1:]):
            mid = 0.5 * (lo + hi)
            for x in (lo, mid, hi):
                if not self.domain.contains(x):
                    continue
                if self.eval_fn(x).distance(y) <= step:
                    hits.append(ClosedInterval(lo, hi))
                    break
        return normalize(hits)

    def truncated_at(self, x: float) -> bool:
        return self.truncation_scale is not None and 0.0 < abs(x) <= self.truncation_scale


@dataclass(frozen=True)
class SmoothMap:
    """Single-valued map with a derivative oracle.

    The derivative must match central finite differences of ``value`` to
    relative 1e-6 at interior points (validated by
    :func:`validate_smooth_map`).
    """

    value: Callable[[float], float]
    derivative: Callable[[float], float]
    lip_estimate_radius: float = 1.0
    label: str = "g"

    def lipschitz_estimate(self, xbar: float, n: int = 64) -> float:
        """max |g'| over a log grid in B(xbar, lip_estimate_radius)."""
        r = self.lip_estimate_radius
        offs = r * np.power(10.0, -np.linspace(0.0, 6.0, n))
        best = abs(self.derivative(xbar))
        for o in offs:
            for x in (xbar - o, xbar + o):
                best = max(best, abs(self.derivative(x)))
        return best


def validate_smooth_map(g: SmoothMap, points, rel_tol: float = 1e-6) -> None:
    """Check g' against central differences; raises DomainError on mismatch."""
    for x in points:
        h = 1e-5 * max(1.0, abs(x))
        fd = (g.value(x + h) - g.value(x - h)) / (2.0 * h)
        d = g.derivative(x)
        if abs(fd - d) > rel_tol * max(1.0, abs(d), abs(fd)):
            raise DomainError(
                f"{g.label}: derivative {d!r} at {x!r} disagrees with finite difference {fd!r}"
            )


@dataclass(frozen=True)
class CatalogEntry:
    """A catalog map with its base point and, when known, regularity data.

    ``potential`` is the scalar function whose subdifferential the map is
    (set for the subdifferential entries; used by the growth checks).
    """

    map: SetValuedMap
    base_point: tuple[float, float]
    known_order: float | None = None
    known_modulus_bound: tuple[float, float] | None = None  # (eta, radius)
    notes: str = ""
    potential: Callable[[float], float] | None = None
    smooth_part: SmoothMap | None = field(default=None, repr=False)

    @property
    def label(self) -> str:
        return self.map.label


# --- Q-map / S-map branch arithmetic ------------------------------------
#
# Steps of Q sit at y = b^{-k} with b = STEP_BASE = 2^{1/3}; on the open
# interval between consecutive steps Q is the singleton {2^{-(k+1)}}, at a
# step it is the interval [2^{-(k+1)}, 2^{-k}], and Q(-y) = -Q(y).  The
# branch index is recovered from t = -log2|y| / log2(b) with a snap to
# integer breakpoints; beyond K_MAX the tail is truncated to {0} (double
# precision is exact on these breakpoints far past desk scale).

STEP_BASE = 2.0 ** (1.0 / 3.0)
_K_MAX = 120
_SNAP = 1e-12
_S_TRUNC = math.ldexp(1.0, -_K_MAX)  # arguments of S at/below this are truncated

_UNIT = ClosedInterval(-1.0, 1.0)


def q_step_location(k: int) -> float:
    """The k-th step location STEP_BASE^{-k} = 2^{-k/3}."""
    return STEP_BASE ** float(-k)


def _q_trunc() -> float:
    return q_step_location(_K_MAX)


def _q_branch(y_abs: float) -> tuple[int, bool]:
    t = -math.log2(y_abs) / math.log2(STEP_BASE)
    r = round(t)
    if abs(t - r) <= _SNAP:
        return int(r), True
    return int(math.ceil(t)), False


def _q_eval(y: float) -> IntervalUnion:
    if y == 0.0:
        return IntervalUnion.singleton(0.0)
    k, at_step = _q_branch(abs(y))
    if (at_step and k >= _K_MAX) or (not at_step and k > _K_MAX):
        return IntervalUnion.singleton(0.0)
    if at_step:
        val = IntervalUnion.of(math.ldexp(1.0, -k - 1), math.ldexp(1.0, -k))
    else:
        val = IntervalUnion.singleton(math.ldexp(1.0, -k))
    return val.negate() if y < 0.0 else val


def _q_inverse_pos(v: float) -> IntervalUnion:
    """Q^{-1}(v) for v > 0."""
    if v > 1.0:
        return EMPTY
    s = -math.log2(v)
    m = round(s)
    if abs(s - m) <= _SNAP:
        m = int(m)
        if m == 0:
            return IntervalUnion.singleton(1.0)
        if m > _K_MAX:
            return EMPTY
        return IntervalUnion.of(q_step_location(m), q_step_location(m - 1))
    k = int(math.floor(s))
    if k > _K_MAX - 1:
        return EMPTY
    return IntervalUnion.singleton(q_step_location(k))


def _q_inverse(v: float) -> IntervalUnion:
    if v == 0.0:
        t = _q_trunc()
        return IntervalUnion.of(-t, t)
    if v > 0.0:
        return _q_inverse_pos(v)
    return _q_inverse_pos(-v).negate()


def _s_eval(x: float) -> IntervalUnion:
    return _q_inverse(-x)


def _s_inverse(y: float) -> IntervalUnion:
    return _q_eval(y).negate()


# --- plateau function max(1, |x|) and its subdifferential ----------------


def _plateau_value(x: float) -> float:
    return max(1.0, abs(x))


def _plateau_subdiff(x: float) -> IntervalUnion:
    if x < -1.0:
        return IntervalUnion.singleton(-1.0)
    if x == -1.0:
        return IntervalUnion.of(-1.0, 0.0)
    if x < 1.0:
        return IntervalUnion.singleton(0.0)
    if x == 1.0:
        return IntervalUnion.of(0.0, 1.0)
    return IntervalUnion.singleton(1.0)


def _plateau_subdiff_inverse(y: float) -> IntervalUnion:
    if y < -1.0 or y > 1.0:
        return EMPTY
    if y == -1.0:
        return IntervalUnion.of(-INF, -1.0)
    if y == 0.0:
        return IntervalUnion.of(-1.0, 1.0)
    if y == 1.0:
        return IntervalUnion.of(1.0, INF)
    return IntervalUnion.singleton(-1.0 if y < 0.0 else 1.0)


# --- sqrt(|x|) as a map and as a potential with subdifferential ----------


def _sqrt_abs_value(x: float) -> float:
    return math.sqrt(abs(x))


def _sqrt_abs_eval(x: float) -> IntervalUnion:
    return IntervalUnion.singleton(math.sqrt(abs(x)))


def _sqrt_abs_inverse(y: float) -> IntervalUnion:
    if y < 0.0:
        return EMPTY
    if y == 0.0:
        return IntervalUnion.singleton(0.0)
    w = y * y
    return normalize([(-w, -w), (w, w)])


def _sqrt_subdiff(x: float) -> IntervalUnion:
    if x == 0.0:
        return IntervalUnion.whole_line()
    m, e = math.frexp(abs(x))
    if m == 0.5:  # |x| = 2^{-j}: exact-exponent path, 1/(2 sqrt|x|) = 2^{j/2-1}
        d = 2.0 ** (0.5 * (1 - e) - 1.0)
    else:
        d = 0.5 / math.sqrt(abs(x))
    return IntervalUnion.singleton(d if x > 0.0 else -d)


def _sqrt_subdiff_inverse(y: float) -> IntervalUnion:
    if y == 0.0:
        return IntervalUnion.singleton(0.0)
    w = 0.25 / (y * y)
    x = w if y > 0.0 else -w
    return normalize([(0.0, 0.0), (x, x)])


# --- trivial maps ---------------------------------------------------------


def _identity_eval(x: float) -> IntervalUnion:
    return IntervalUnion.singleton(x)


def _zero_eval(_x: float) -> IntervalUnion:
    return IntervalUnion.singleton(0.0)


def _zero_inverse(y: float) -> IntervalUnion:
    return IntervalUnion.whole_line() if y == 0.0 else EMPTY


def _halfline_cone_eval(x: float) -> IntervalUnion:
    if x < 0.0:
        return EMPTY
    if x == 0.0:
        return IntervalUnion.of(-INF, 0.0)
    return IntervalUnion.singleton(0.0)


def _halfline_cone_inverse(y: float) -> IntervalUnion:
    if y > 0.0:
        return EMPTY
    if y == 0.0:
        return IntervalUnion.of(0.0, INF)
    return IntervalUnion.singleton(0.0)


def _build_catalog() -> dict[str, CatalogEntry]:
    sqrt_abs = SetValuedMap(
        label="sqrt-abs",
        eval_fn=_sqrt_abs_eval,
        inverse_fn=_sqrt_abs_inverse,
        anchors=(0.0,),
    )
    q_map = SetValuedMap(
        label="Q-map",
        eval_fn=_q_eval,
        inverse_fn=_q_inverse,
        domain=_UNIT,
        anchors=(0.0,),
        truncation_scale=_q_trunc(),
    )
    s_map = SetValuedMap(
        label="S-map",
        eval_fn=_s_eval,
        inverse_fn=_s_inverse,
        domain=_UNIT,
        anchors=(0.0,),
        truncation_scale=_S_TRUNC,
    )
    plateau = SetValuedMap(
        label="subdiff-plateau",
        eval_fn=_plateau_subdiff,
        inverse_fn=_plateau_subdiff_inverse,
        anchors=(-1.0, 1.0),
    )
    sqrt_sub = SetValuedMap(
        label="subdiff-sqrt",
        eval_fn=_sqrt_subdiff,
        inverse_fn=_sqrt_subdiff_inverse,
        anchors=(0.0,),
    )
    identity = SetValuedMap(
        label="identity",
        eval_fn=_identity_eval,
        inverse_fn=_identity_eval,
    )
    zero_map = SetValuedMap(
        label="zero-map",
        eval_fn=_zero_eval,
        inverse_fn=_zero_inverse,
    )
    halfline = SetValuedMap(
        label="halfline-normal-cone",
        eval_fn=_halfline_cone_eval,
        inverse_fn=_halfline_cone_inverse,
        anchors=(0.0,),
    )

    entries = [
        CatalogEntry(
            map=sqrt_abs,
            base_point=(0.0, 0.0),
            known_order=2.0,
            known_modulus_bound=(1.0, 1.0),
            notes="square-root cusp; strongly 2-subregular at the origin with "
            "modulus 1 on the unit ball, ratio |x|^{1-q/2}",
        ),
        CatalogEntry(
            map=q_map,
            base_point=(0.0, 0.0),
            notes="interval staircase with steps at 2^{-k/3}; fails metric "
            "regularity around the origin (difference quotients grow like 2k "
            "along the built-in witness sequences)",
        ),
        CatalogEntry(
            map=s_map,
            base_point=(0.0, 0.0),
            known_order=2.0,
            known_modulus_bound=(1.0, 1.0),
            notes="solution map of 0 in x + Q(y); strongly 2-subregular at the "
            "origin. Sign convention S(x) = Q^{-1}(-x); Q is odd, so distances "
            "to the origin match the reflected convention Q^{-1}(x).",
        ),
        CatalogEntry(
            map=plateau,
            base_point=(0.0, 0.0),
            known_order=2.0,
            notes="subdifferential of max(1,|x|); 2-subregular at (0,0) but not "
            "metrically regular (quotient 2k-2 along x_k=1/k, y_k=1/(2k))",
            potential=_plateau_value,
        ),
        CatalogEntry(
            map=sqrt_sub,
            base_point=(0.0, 0.0),
            known_order=INF,
            notes="subdifferential of sqrt|x| with full line at 0; strongly "
            "q-subregular at (0,0) for every q > 0 with modulus 1 on the ball "
            "of radius 2^{-2q/(q+2)}",
            potential=_sqrt_abs_value,
        ),
        CatalogEntry(
            map=identity,
            base_point=(0.0, 0.0),
            known_order=1.0,
            known_modulus_bound=(1.0, 1.0),
            notes="identity map; 1-subregular with modulus exactly 1",
        ),
        CatalogEntry(
            map=zero_map,
            base_point=(0.0, 0.0),
            notes="constant {0}; subregular at any order (preimage is the whole "
            "line) but never strongly subregular",
        ),
        CatalogEntry(
            map=halfline,
            base_point=(0.0, 0.0),
            notes="normal cone to [0,+inf); complementarity-style test map",
        ),
    ]
    return {e.label: e for e in entries}


_CATALOG = _build_catalog()


def catalog() -> list[CatalogEntry]:
    """All built-in catalog entries (stable public identifiers)."""
    return list(_CATALOG.values())


def catalog_ids() -> list[str]:
    return list(_CATALOG.keys())


def get_entry(label: str) -> CatalogEntry:
    try:
        return _CATALOG[label]
    except KeyError:
        raise LookupError(
            f"unknown catalog id {label!r}; known: {', '.join(_CATALOG)}"
        ) from None


def validate_graph_consistency(
    m: SetValuedMap, xs, rng: np.random.Generator | None = None, rel_tol: float = 0.0
) -> None:
    """Sampled check that y in F(x) implies x in F^{-1}(y).

    Samples the endpoints of each value (plus an interior point for wide
    parts) and verifies the inverse contains x.  ``rel_tol`` admits the
    float round-trip error of maps with irrational graph points (the
    square-root family); exactly-representable graphs use 0.  Raises
    DomainError on the first failure.
    """
    if m.inverse_fn is None:
        raise CapabilityError(f"{m.label}: graph consistency needs an inverse oracle")
    for x in xs:
        val = m.eval(x)
        probe: list[float] = val.endpoints()
        if rng is not None:
            for part in val.parts:
                if part.is_bounded and not part.is_singleton:
                    probe.append(float(rng.uniform(part.lo, part.hi)))
        for y in probe:
            if m.inverse_fn(y).distance(x) > rel_tol * max(1.0, abs(x)):
                raise DomainError(
                    f"{m.label}: graph inconsistency at x={x!r}, y={y!r}"
                )
