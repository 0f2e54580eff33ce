"""Quasi-Newton iteration for generalized equations 0 in g(x) + F(x).

Each step solves the inclusion 0 in g(x_k) + B_k(x_{k+1} - x_k) + F(x_{k+1})
by a coarse scan of the signed residual followed by bisection on bracketing
cells.  The scan refines geometrically around the current iterate and
around the map's kink anchors (roots of catalog subproblems can sit on
dips narrower than any uniform cell; see Example 5.2's 2^{-120} step), and
accepted candidates snap to exact powers of two when that does not worsen
the residual, so deep-tail iterates carry exact base-2 exponents.

The state space is scalar: every built-in equation is one-dimensional and
desk-scale verification needs no more.  Schedules and the subproblem oracle
are written so an n-dimensional extension would replace reals by vectors
and the scalar operators by linear maps, but only 1-D ships.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import AnalysisError, DomainError, SubproblemFailure
from .intervals import ClosedInterval, IntervalUnion
from .maps import SetValuedMap, SmoothMap, get_entry

INF = math.inf


@dataclass(frozen=True)
class GeneralizedEquation:
    """The pair (g, F) of the inclusion 0 in g(x) + F(x)."""

    g: SmoothMap
    F: SetValuedMap
    solution_hint: float | None = None
    label: str = "geneq"

    def __post_init__(self):
        if self.solution_hint is not None:
            r = self.residual(self.solution_hint)
            if r > 1e-12:
                raise DomainError(
                    f"{self.label}: hint {self.solution_hint!r} has residual {r!r}"
                )

    def residual(self, x: float) -> float:
        """d(0; g(x) + F(x))."""
        return self.F.eval(x).distance(-self.g.value(x))


@dataclass(frozen=True)
class OperatorSchedule:
    """Operator sequence B_k for the iteration.

    kinds: ``newton`` (B_k = g'(x_k)), ``chord`` (constant b0), ``broyden``
    (scalar secant update from b0; a zero step carries the operator
    forward), ``explicit`` (total oracle step -> B).
    """

    kind: str
    b0: float | None = None
    oracle: Callable[[int], float] | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("newton", "chord", "broyden", "explicit"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind in ("chord", "broyden") and self.b0 is None:
            raise ValueError(f"{self.kind} schedule needs b0")
        if self.kind == "explicit" and self.oracle is None:
            raise ValueError("explicit schedule needs an oracle")

    @staticmethod
    def newton() -> "OperatorSchedule":
        return OperatorSchedule("newton", name="newton")

    @staticmethod
    def chord(b0: float) -> "OperatorSchedule":
        return OperatorSchedule("chord", b0=b0, name=f"chord({b0!r})")

    @staticmethod
    def broyden(b0: float) -> "OperatorSchedule":
        return OperatorSchedule("broyden", b0=b0, name=f"broyden({b0!r})")

    @staticmethod
    def explicit(oracle: Callable[[int], float], name: str = "explicit") -> "OperatorSchedule":
        return OperatorSchedule("explicit", oracle=oracle, name=name)


@dataclass(frozen=True)
class SolveConfig:
    max_iter: int = 30
    tol: float = 1e-12
    window: ClosedInterval | None = None  # None: [x_k - hw, x_k + hw] per step
    window_halfwidth: float = 2.0
    scan_cells: int = 1024
    ladder_depth: int = 64
    snap_dyadic: bool = True


@dataclass(frozen=True)
class IterationTrace:
    """Solver run: iterates, equation residuals, operators, certificates.

    ``residuals[i]`` is d(0; g(x_i) + F(x_i)); ``operators[i]`` the B used
    for the step i -> i+1 and ``step_residuals[i]`` its subproblem residual.
    ``exact_exponents[i]`` is n when x_i = +/-2^n exactly, else None.
    Display/CSV indexing is 1-based (k=1 is the starting point), matching
    the indexing of the built-in worked sequences.
    """

    equation: GeneralizedEquation
    iterates: tuple[float, ...]
    residuals: tuple[float, ...]
    operators: tuple[float, ...]
    step_residuals: tuple[float, ...]
    status: str  # converged | max_iter | subproblem_failure
    schedule_name: str = ""

    @property
    def exact_exponents(self) -> tuple[int | None, ...]:
        return tuple(_exact_exponent(x) for x in self.iterates)

    def __len__(self) -> int:
        return len(self.iterates)


def _exact_exponent(x: float) -> int | None:
    if x == 0.0 or not math.isfinite(x):
        return None
    m, e = math.frexp(x)
    return e - 1 if abs(m) == 0.5 else None


# --------------------------------------------------------------------------
# subproblem


def _signed_gap(geq: GeneralizedEquation, x_k: float, b_k: float, x: float) -> float | None:
    """Signed value of the residual set nearest 0; None when the set is empty."""
    shift = geq.g.value(x_k) + b_k * (x - x_k)
    r = geq.F.eval(x).shift(shift)
    if r.is_empty:
        return None
    return r.nearest_point(0.0)


def _scan_points(
    window: ClosedInterval, x_k: float, anchors: Sequence[float], cells: int, ladder: int
) -> list[float]:
    lo, hi = window.lo, window.hi
    pts = set(np.linspace(lo, hi, cells + 1).tolist())
    centers = [x_k] + [a for a in anchors if lo <= a <= hi]
    for c in centers:
        if not (lo <= c <= hi):
            continue
        pts.add(c)
        left, right = c - lo, hi - c
        for j in range(1, ladder + 1):
            if left > 0.0:
                pts.add(c - left * 2.0**-j)
            if right > 0.0:
                pts.add(c + right * 2.0**-j)
    return sorted(p for p in pts if lo <= p <= hi)


def _bisect(fn, a: float, b: float, sa: float, sb: float, max_iter: int = 2000):
    """Refine a sign change to float exhaustion; returns (x, s(x))."""
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        if not (a < m < b):
            break
        sm = fn(m)
        if sm is None:
            break
        if sm == 0.0:
            return m, 0.0
        if (sm > 0.0) == (sa > 0.0):
            a, sa = m, sm
        else:
            b, sb = m, sm
    return (a, sa) if abs(sa) <= abs(sb) else (b, sb)


def subproblem_solve(
    geq: GeneralizedEquation,
    x_k: float,
    b_k: float,
    window: ClosedInterval,
    tol: float = 1e-12,
    *,
    scan_cells: int = 1024,
    ladder_depth: int = 64,
    snap_dyadic: bool = True,
) -> float:
    """Solve 0 in g(x_k) + B_k(x - x_k) + F(x) for x within the window.

    Returns the solution nearest x_k (distances compared exactly; genuine
    ties break toward the smaller value) with residual <= tol.  Raises
    :class:`SubproblemFailure` with the scan minimum when no candidate
    reaches the tolerance.
    """
    if not (math.isfinite(window.lo) and math.isfinite(window.hi)):
        raise ValueError("subproblem window must be bounded")
    dom = geq.F.domain
    lo = max(window.lo, dom.lo)
    hi = min(window.hi, dom.hi)
    if lo > hi:
        raise DomainError("window does not meet the domain of F")
    window = ClosedInterval(lo, hi)

    gap = lambda x: _signed_gap(geq, x_k, b_k, x)  # noqa: E731
    xs = _scan_points(window, x_k, geq.F.anchors, scan_cells, ladder_depth)
    gaps = [gap(x) for x in xs]

    # Candidates are roots: exact zeros of the scan plus the bisection limit
    # of each sign-change cell.  Points that merely come within `tol` are not
    # candidates (taking them would bias steps toward x_k by ~tol/slope);
    # `tol` only certifies the refined roots below.
    candidates: list[float] = []
    scan_min, scan_argmin = INF, x_k
    for x, s in zip(xs, gaps):
        if s is None:
            continue
        if abs(s) < scan_min:
            scan_min, scan_argmin = abs(s), x
        if s == 0.0:
            candidates.append(x)
    for (xa, sa), (xb, sb) in zip(zip(xs, gaps), zip(xs[1:], gaps[1:])):
        if sa is None or sb is None or sa == 0.0 or sb == 0.0:
            continue
        if (sa > 0.0) != (sb > 0.0):
            x, s = _bisect(gap, xa, xb, sa, sb)
            if abs(s) < scan_min:
                scan_min, scan_argmin = abs(s), x
            if abs(s) <= tol:
                candidates.append(x)

    if snap_dyadic:
        for x in list(candidates):
            if x == 0.0:
                continue
            snapped = math.copysign(math.ldexp(1.0, round(math.log2(abs(x)))), x)
            if snapped == x or not window.contains(snapped):
                continue
            s = gap(snapped)
            if s is not None and abs(s) <= tol:
                candidates.append(snapped)

    if not candidates:
        raise SubproblemFailure(
            f"no subproblem solution in {window!r} (scan min {scan_min!r} at {scan_argmin!r})",
            scan_min,
            scan_argmin,
        )
    xk_frac = Fraction(x_k)
    return min(set(candidates), key=lambda c: (abs(Fraction(c) - xk_frac), Fraction(c)))


# --------------------------------------------------------------------------
# outer iteration


def solve(
    geq: GeneralizedEquation,
    x0: float,
    schedule: OperatorSchedule,
    config: SolveConfig = SolveConfig(),
) -> IterationTrace:
    """Run the quasi-Newton iteration until the residual drops below tol."""
    iterates = [float(x0)]
    residuals = [geq.residual(x0)]
    operators: list[float] = []
    step_residuals: list[float] = []
    status = "max_iter"
    b_broyden = schedule.b0

    for k in range(config.max_iter):
        if residuals[-1] <= config.tol:
            status = "converged"
            break
        x_k = iterates[-1]
        if schedule.kind == "newton":
            b_k = geq.g.derivative(x_k)
        elif schedule.kind == "chord":
            b_k = schedule.b0
        elif schedule.kind == "broyden":
            b_k = b_broyden
        else:
            b_k = schedule.oracle(k)
        window = config.window or ClosedInterval(
            x_k - config.window_halfwidth, x_k + config.window_halfwidth
        )
        try:
            x_next = subproblem_solve(
                geq,
                x_k,
                b_k,
                window,
                config.tol,
                scan_cells=config.scan_cells,
                ladder_depth=config.ladder_depth,
                snap_dyadic=config.snap_dyadic,
            )
        except SubproblemFailure:
            status = "subproblem_failure"
            break
        operators.append(b_k)
        gap = _signed_gap(geq, x_k, b_k, x_next)
        step_residuals.append(abs(gap) if gap is not None else INF)
        if schedule.kind == "broyden" and x_next != x_k:
            b_broyden = (geq.g.value(x_next) - geq.g.value(x_k)) / (x_next - x_k)
        iterates.append(x_next)
        residuals.append(geq.residual(x_next))
    else:
        if residuals[-1] <= config.tol:
            status = "converged"

    return IterationTrace(
        equation=geq,
        iterates=tuple(iterates),
        residuals=tuple(residuals),
        operators=tuple(operators),
        step_residuals=tuple(step_residuals),
        status=status,
        schedule_name=schedule.name,
    )


# --------------------------------------------------------------------------
# rate analysis


@dataclass(frozen=True)
class RateReport:
    """Convergence-order statistics from a trace tail.

    ``pointwise_orders`` maps the 1-based display index k to
    ln e_{k+1} / ln e_k; exact base-2 exponents are used when both errors
    are exact powers of two.  ``dennis_more_ratios[i]`` equals
    |B_i - g'(xbar)| for the step operators (scalar case).
    """

    pointwise_orders: dict[int, float]
    regression_order: float
    super_q_ratios: dict[float, tuple[float, ...]]
    dennis_more_ratios: tuple[float, ...]
    dropped_exact_hits: tuple[int, ...]
    usable_indices: tuple[int, ...]
    errors: tuple[float, ...] = field(repr=False, default=())


def _log2_error(e: float) -> float:
    n = _exact_exponent(e)
    return float(n) if n is not None else math.log2(e)


def rate_analysis(
    trace: IterationTrace,
    xbar: float,
    q_list: Sequence[float] = (1.0, 2.0),
    *,
    tail_pairs: int = 5,
) -> RateReport:
    """Empirical convergence orders, higher-rate ratios and operator deviations."""
    errors = [abs(x - xbar) for x in trace.iterates]
    dropped = tuple(i for i, e in enumerate(errors) if e == 0.0)
    kept = [(i, e) for i, e in enumerate(errors) if e > 0.0]
    # analyzed tail: maximal suffix with e < 1 (logs negative)
    start = 0
    for j, (_, e) in enumerate(kept):
        if e >= 1.0:
            start = j + 1
    usable = kept[start:]
    if len(usable) < 3:
        raise AnalysisError(
            f"need at least 3 iterates with error in (0,1); got {len(usable)}"
        )

    logs = [(i, _log2_error(e)) for i, e in usable]
    orders: dict[int, float] = {}
    pairs: list[tuple[float, float]] = []
    for (i0, l0), (i1, l1) in zip(logs, logs[1:]):
        if i1 == i0 + 1:
            orders[i0 + 1] = l1 / l0  # display index is 1-based
            pairs.append((l0, l1))

    tail = pairs[-tail_pairs:]
    if len(tail) < 2:
        raise AnalysisError("not enough consecutive usable pairs for a regression")
    xs = np.array([p[0] for p in tail])
    ys = np.array([p[1] for p in tail])
    xm, ym = xs.mean(), ys.mean()
    regression = float(((xs - xm) * (ys - ym)).sum() / ((xs - xm) ** 2).sum())

    super_q = {
        float(q): tuple(e1 / e0**q for (_, e0), (_, e1) in zip(usable, usable[1:]))
        for q in q_list
    }
    dg = trace.equation.g.derivative(xbar)
    dm = tuple(abs(b - dg) for b in trace.operators)
    return RateReport(
        pointwise_orders=orders,
        regression_order=regression,
        super_q_ratios=super_q,
        dennis_more_ratios=dm,
        dropped_exact_hits=dropped,
        usable_indices=tuple(i for i, _ in usable),
        errors=tuple(errors),
    )


# --------------------------------------------------------------------------
# built-in equations and schedules


def example_5_2_operator(k: int) -> float:
    """Step operator of the built-in factorial-rate run (1-based index).

    B_k = (2^{-(k+1)!/2} + 2^{-2 k!}) / (2^{-k!} - 2^{-(k+1)!}); underflowed
    tails return 0, so the schedule is total.
    """
    if k < 1:
        raise ValueError("the explicit schedule starts at k = 1")
    fk = math.factorial(k)
    fk1 = math.factorial(k + 1)

    def p2(e: int) -> float:
        return math.ldexp(1.0, -e) if e <= 1100 else 0.0

    num = p2(fk1 // 2) + p2(2 * fk)
    den = p2(fk) - p2(fk1)
    if den == 0.0:
        return 0.0
    return num / den


def _square(x: float) -> float:
    return x * x


def _two_x(x: float) -> float:
    return 2.0 * x


def _square_minus_one(x: float) -> float:
    return x * x - 1.0


def _x_minus_two(x: float) -> float:
    return x - 2.0


def _one(_x: float) -> float:
    return 1.0


def equation_catalog() -> dict[str, GeneralizedEquation]:
    """Built-in generalized equations keyed by their public identifiers."""
    return {
        "example-5-2": GeneralizedEquation(
            g=SmoothMap(_square, _two_x, label="x^2"),
            F=get_entry("sqrt-abs").map,
            solution_hint=0.0,
            label="example-5-2",
        ),
        "quadratic-root": GeneralizedEquation(
            g=SmoothMap(_square_minus_one, _two_x, label="x^2-1"),
            F=get_entry("zero-map").map,
            solution_hint=1.0,
            label="quadratic-root",
        ),
        "complementarity-linear": GeneralizedEquation(
            g=SmoothMap(_x_minus_two, _one, label="x-2"),
            F=get_entry("halfline-normal-cone").map,
            solution_hint=2.0,
            label="complementarity-linear",
        ),
    }


def schedule_catalog() -> dict[str, OperatorSchedule]:
    """Named operator schedules usable from experiment specs."""
    return {
        "example-5-2": OperatorSchedule.explicit(
            lambda i: example_5_2_operator(i + 1), name="example-5-2"
        ),
        "newton": OperatorSchedule.newton(),
    }
