"""Brute-force estimators and checkers for one-point regularity properties.

The estimators discretize the ball around the base point with log-spaced
grids and take a deterministic maximum of the defining ratio; results are
lower bounds for the true supremum over the ball, reported with grid
metadata.  Ratio conventions: a grid point with zero denominator and zero
numerator contributes 0 (it is a solution); zero denominator with positive
numerator is a subregularity violation and yields modulus +inf with a
witness; an empty value (denominator +inf) contributes 0.

All sweeps are pure map-reduce over immutable maps with a deterministic
reduction (ties break toward the smaller |x - xbar|, then the smaller x),
so results do not depend on worker count or chunking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import ApplicabilityError, CapabilityError, DomainError
from .intervals import ClosedInterval, IntervalUnion
from .maps import SetValuedMap, SmoothMap, q_step_location

INF = math.inf


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridSpec:
    """Log-spaced sample grid xbar +/- radius*10^{-j/points_per_decade}.

    j runs over 0..decades*points_per_decade; the center itself is excluded.
    Refining ``points_per_decade`` by an integer factor keeps all existing
    points, so modulus estimates are monotone under refinement.
    """

    radius: float
    points_per_decade: int = 40
    decades: int = 6
    symmetric: bool = True

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise ValueError("radius must be positive and finite")
        if self.points_per_decade < 1 or self.decades < 1:
            raise ValueError("points_per_decade and decades must be positive")

    def offsets(self) -> np.ndarray:
        """Positive offsets from the center, decreasing from radius."""
        j = np.arange(self.decades * self.points_per_decade + 1, dtype=np.float64)
        return self.radius * np.power(10.0, -j / self.points_per_decade)

    def points(self, center: float) -> np.ndarray:
        offs = self.offsets()
        if self.symmetric:
            pts = np.concatenate([center - offs, center + offs])
        else:
            pts = center + offs
        pts = pts[pts != center]
        return np.sort(pts)

    def n_points(self) -> int:
        per_side = self.decades * self.points_per_decade + 1
        return 2 * per_side if self.symmetric else per_side

    def with_radius(self, radius: float) -> "GridSpec":
        return GridSpec(radius, self.points_per_decade, self.decades, self.symmetric)


# --------------------------------------------------------------------------
# modulus estimates


@dataclass(frozen=True)
class RegularityEstimate:
    """Sup-ratio modulus estimate with witness and grid metadata."""

    order: float
    modulus: float
    witness: float
    witness_numerator: float
    witness_denominator: float
    radius: float
    strong: bool
    base: tuple[float, float]
    map_label: str
    n_points: int
    excluded_points: int
    n_empty_values: int
    truncation_active: bool
    inverse_approximate: bool
    grid: GridSpec
    table: dict | None = field(default=None, repr=False, compare=False)

    @property
    def violation(self) -> bool:
        """True when some grid point defeats the property (modulus +inf)."""
        return self.excluded_points > 0

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.modulus)


def _pack(unions: Sequence[IntervalUnion]):
    n = len(unions)
    counts = np.fromiter((len(u) for u in unions), dtype=np.int64, count=n)
    starts = np.zeros(n, dtype=np.int64)
    if n > 1:
        np.cumsum(counts[:-1], out=starts[1:])
    total = int(counts.sum())
    los = np.empty(total, dtype=np.float64)
    his = np.empty(total, dtype=np.float64)
    i = 0
    for u in unions:
        for part in u.parts:
            los[i] = part.lo
            his[i] = part.hi
            i += 1
    return starts, counts, los, his


def _union_arrays(u: IntervalUnion):
    los = np.fromiter((p.lo for p in u.parts), dtype=np.float64, count=len(u.parts))
    his = np.fromiter((p.hi for p in u.parts), dtype=np.float64, count=len(u.parts))
    return los, his


def _check_base(m: SetValuedMap, base: tuple[float, float]) -> None:
    xbar, ybar = base
    if m.eval(xbar).distance(ybar) != 0.0:
        raise DomainError(f"{m.label}: base value {ybar!r} not in eval({xbar!r})")


def _grid_in_domain(m: SetValuedMap, xs: np.ndarray) -> None:
    if xs.size and not (m.domain.contains(float(xs[0])) and m.domain.contains(float(xs[-1]))):
        raise DomainError(
            f"{m.label}: grid leaves the domain {m.domain!r}; shrink the radius"
        )


def _sweep_denominators(m: SetValuedMap, xs: np.ndarray, ybar: float, backend):
    evals = [m.eval(float(x)) for x in xs]
    starts, counts, los, his = _pack(evals)
    dens = backend.dist_packed(ybar, starts, counts, los, his)
    return dens, int((counts == 0).sum())


def _finish_estimate(
    m, base, q, grid, xs, nums, dens, n_empty, strong, approx, backend, keep_table
):
    xbar, _ = base
    eta, widx, nviol = backend.max_ratio(xs, nums, dens, q, xbar)
    trunc = False
    if m.truncation_scale is not None:
        offs = np.abs(xs)
        trunc = bool(((offs > 0.0) & (offs <= m.truncation_scale)).any())
    table = None
    if keep_table:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(dens > 0.0, nums / dens**q, np.where(nums > 0.0, INF, 0.0))
        table = {"x": xs, "numerator": nums, "denominator": dens, "ratio": ratios}
    return RegularityEstimate(
        order=q,
        modulus=eta,
        witness=float(xs[widx]),
        witness_numerator=float(nums[widx]),
        witness_denominator=float(dens[widx]),
        radius=grid.radius,
        strong=strong,
        base=base,
        map_label=m.label,
        n_points=int(xs.size),
        excluded_points=nviol,
        n_empty_values=n_empty,
        truncation_active=trunc,
        inverse_approximate=approx,
        grid=grid,
        table=table,
    )


def estimate_subreg_modulus(
    m: SetValuedMap,
    base: tuple[float, float],
    q: float,
    grid: GridSpec,
    *,
    window: ClosedInterval | None = None,
    keep_table: bool = False,
    backend=None,
) -> RegularityEstimate:
    """Estimate the q-subregularity modulus: max d(x; F^{-1}(ybar)) / d^q(ybar; F(x)).

    Needs inverse access (analytic oracle or a search ``window``).
    """
    backend = backend or _kernels
    _check_base(m, base)
    xbar, ybar = base
    xs = grid.points(xbar)
    _grid_in_domain(m, xs)
    inv = m.inverse_eval(ybar, window=window)
    approx = not m.has_inverse
    if inv.is_empty:
        raise DomainError(f"{m.label}: inverse at {ybar!r} is empty despite base membership")
    inv_los, inv_his = _union_arrays(inv)
    nums = backend.dist_many_points(xs, inv_los, inv_his)
    dens, n_empty = _sweep_denominators(m, xs, ybar, backend)
    return _finish_estimate(
        m, base, q, grid, xs, nums, dens, n_empty, False, approx, backend, keep_table
    )


def estimate_strong_subreg_modulus(
    m: SetValuedMap,
    base: tuple[float, float],
    q: float,
    grid: GridSpec,
    *,
    keep_table: bool = False,
    backend=None,
) -> RegularityEstimate:
    """Estimate the strong q-subregularity modulus: max |x - xbar| / d^q(ybar; F(x))."""
    backend = backend or _kernels
    _check_base(m, base)
    xbar, ybar = base
    xs = grid.points(xbar)
    _grid_in_domain(m, xs)
    nums = np.abs(xs - xbar)
    dens, n_empty = _sweep_denominators(m, xs, ybar, backend)
    return _finish_estimate(
        m, base, q, grid, xs, nums, dens, n_empty, True, False, backend, keep_table
    )


def ratio_at(
    m: SetValuedMap,
    base: tuple[float, float],
    q: float,
    x: float,
    *,
    strong: bool = True,
    window: ClosedInterval | None = None,
) -> tuple[float, float, float]:
    """Recompute (numerator, denominator, ratio) at a single point."""
    xbar, ybar = base
    if strong:
        num = abs(x - xbar)
    else:
        num = m.inverse_eval(ybar, window=window).distance(x)
    den = m.eval(x).distance(ybar)
    if den == 0.0:
        ratio = 0.0 if num == 0.0 else INF
    else:
        ratio = num / den**q
    return num, den, ratio


# --------------------------------------------------------------------------
# order scan


@dataclass(frozen=True)
class OrderScanRow:
    q: float
    radius: float
    eta_hat: float
    growth_from_prev: float
    n_points: int


@dataclass(frozen=True)
class OrderScanReport:
    """Per-order verdicts from progressively deepening grids.

    For each inner cutoff r in ``radii`` the estimate is the cumulative
    maximum over grid points with r <= |x - xbar| <= radii[0].  Blow-up:
    the estimate grows by >= ``blowup_factor`` in total (or hits +inf);
    bounded: it varies by < ``stability_window`` over the last two cutoffs.
    """

    rows: tuple[OrderScanRow, ...]
    verdicts: dict[float, str]
    q_star_range: tuple[float | None, float | None]
    radii: tuple[float, ...]
    strong: bool

    def verdict(self, q: float) -> str:
        return self.verdicts[q]

    def etas(self, q: float) -> list[float]:
        return [r.eta_hat for r in self.rows if r.q == q]

    def total_growth(self, q: float) -> float:
        etas = self.etas(q)
        if etas[0] == 0.0:
            return INF if etas[-1] > 0.0 else 1.0
        return etas[-1] / etas[0]


def order_scan(
    m: SetValuedMap,
    base: tuple[float, float],
    q_list: Sequence[float],
    radii: Sequence[float],
    grid: GridSpec,
    *,
    strong: bool = True,
    blowup_factor: float = 10.0,
    stability_window: float = 0.10,
    backend=None,
) -> OrderScanReport:
    """Tabulate modulus estimates against inner radius for each order q."""
    backend = backend or _kernels
    radii = [float(r) for r in radii]
    if len(radii) < 3:
        raise ValueError("order_scan needs at least three radii")
    if any(r >= 1.0 for r in radii):
        raise ValueError("order_scan radii must be < 1")
    if any(a <= b for a, b in zip(radii, radii[1:])):
        raise ValueError("order_scan radii must be strictly decreasing")
    _check_base(m, base)
    xbar, ybar = base

    outer, inner = radii[0], radii[-1]
    ppd = grid.points_per_decade
    n_decades = math.log10(outer / inner)
    master = GridSpec(outer, ppd, max(1, math.ceil(n_decades)), grid.symmetric)
    xs = master.points(xbar)
    _grid_in_domain(m, xs)
    offs = np.abs(xs - xbar)
    order = np.argsort(offs, kind="stable")
    xs = xs[order]
    offs = offs[order]

    dens, _ = _sweep_denominators(m, xs, ybar, backend)
    if strong:
        nums = offs.copy()
    else:
        inv = m.inverse_eval(ybar)
        inv_los, inv_his = _union_arrays(inv)
        nums = backend.dist_many_points(xs, inv_los, inv_his)

    rows: list[OrderScanRow] = []
    verdicts: dict[float, str] = {}
    for q in q_list:
        etas = []
        prev = None
        for r in radii:
            start = int(np.searchsorted(offs, r * (1.0 - 1e-9), side="left"))
            sl = slice(start, xs.size)
            eta, _, nviol = backend.max_ratio(xs[sl], nums[sl], dens[sl], q, xbar)
            if nviol:
                eta = INF
            growth = INF if prev == 0.0 else (eta / prev if prev is not None else 1.0)
            rows.append(OrderScanRow(float(q), r, eta, growth, xs.size - start))
            etas.append(eta)
            prev = eta
        verdicts[float(q)] = _scan_verdict(etas, blowup_factor, stability_window)

    bounded = [q for q in q_list if verdicts[float(q)] == "bounded"]
    blowup = [q for q in q_list if verdicts[float(q)] == "blow-up"]
    q_star = (max(bounded) if bounded else None, min(blowup) if blowup else None)
    return OrderScanReport(
        rows=tuple(rows),
        verdicts=verdicts,
        q_star_range=q_star,
        radii=tuple(radii),
        strong=strong,
    )


def _scan_verdict(etas: list[float], blowup_factor: float, stability_window: float) -> str:
    if any(math.isinf(e) for e in etas):
        return "blow-up"
    first, last = etas[0], etas[-1]
    if (first == 0.0 and last > 0.0) or (first > 0.0 and last / first >= blowup_factor):
        return "blow-up"
    tail = etas[-3:]
    lo, hi = min(tail), max(tail)
    if hi == 0.0 or (lo > 0.0 and hi / lo - 1.0 < stability_window):
        return "bounded"
    return "inconclusive"


# --------------------------------------------------------------------------
# metric regularity probe


@dataclass(frozen=True)
class SequenceRow:
    index: int
    x: float
    y: float
    quotient: float


@dataclass(frozen=True)
class QmapSequenceRow:
    k: int
    alpha_k: float
    dist_perturbed: float
    dist_at_step: float
    quotient: float


@dataclass(frozen=True)
class MRProbeReport:
    """Two-parameter regularity probe: sup ratios on shrinking neighborhoods.

    ``kappa_table`` holds (radius, kappa_hat, witness_x, witness_y) rows;
    sequence tables hold direct ratios d(x; F^{-1}(y)) / d(y; F(x)) along
    user-supplied sequences, and for the Q-map the built-in two-sequence
    difference quotients that witness the Lipschitz failure of
    (x, y) -> d(x; Q(y)).
    """

    verdict: str
    kappa_table: tuple[tuple[float, float, float, float], ...]
    sequence_tables: dict[str, tuple[SequenceRow, ...]]
    qmap_table: tuple[QmapSequenceRow, ...]

    @property
    def kappa_hat(self) -> float:
        return max((row[1] for row in self.kappa_table), default=INF)


def _direct_quotient(m: SetValuedMap, x: float, y: float) -> float | None:
    """MR ratio at one pair; None when the pair is uninformative."""
    den = m.eval(x).distance(y)
    inv = m.inverse_eval(y)
    num = inv.distance(x) if not inv.is_empty else INF
    if den == 0.0:
        return None if num == 0.0 else INF
    if math.isinf(den):
        return None
    if math.isinf(num):
        return INF
    return num / den


def _qmap_sequences(m: SetValuedMap, ks: Iterable[int]) -> list[QmapSequenceRow]:
    rows = []
    for k in ks:
        step_prev = q_step_location(k - 1)
        step_next = q_step_location(k)
        alpha = 0.5 * min(1.0 / (k * 2.0**k), step_prev - step_next)
        x = math.ldexp(1.0, -(k - 1))
        y1 = step_prev - alpha
        y2 = step_prev
        d1 = m.eval(y1).distance(x)
        d2 = m.eval(y2).distance(x)
        quot = abs(d1 - d2) / alpha
        rows.append(QmapSequenceRow(k, alpha, d1, d2, quot))
    return rows


def metric_regularity_probe(
    m: SetValuedMap,
    base: tuple[float, float],
    grid: GridSpec | None = None,
    radii: Sequence[float] | None = None,
    sequences: dict[str, tuple[Sequence[float], Sequence[float]]] | None = None,
    *,
    growth_threshold: float = 10.0,
    stability_window: float = 0.10,
    max_axis_points: int = 48,
    qmap_ks: Iterable[int] = tuple(range(3, 13)),
) -> MRProbeReport:
    """Estimate sup d(x; F^{-1}(y)) / d(y; F(x)) on shrinking neighborhoods."""
    if not m.has_inverse:
        raise CapabilityError(f"{m.label}: probe needs inverse access")
    _check_base(m, base)
    xbar, ybar = base
    grid = grid or GridSpec(0.25, 8, 3)
    if radii is None:
        radii = [grid.radius * 10.0**-i for i in range(4)]

    kappa_rows = []
    for r in radii:
        pts_x = _subsample(grid.with_radius(r).points(xbar), max_axis_points)
        pts_y = _subsample(grid.with_radius(r).points(ybar), max_axis_points)
        best, wit = 0.0, (xbar, ybar)
        for y in pts_y:
            inv = m.inverse_eval(float(y))
            for x in pts_x:
                den = m.eval(float(x)).distance(y)
                num = inv.distance(x) if not inv.is_empty else INF
                if den == 0.0:
                    quot = None if num == 0.0 else INF
                elif math.isinf(den):
                    quot = None
                else:
                    quot = num / den
                if quot is not None and quot > best:
                    best, wit = quot, (float(x), float(y))
        kappa_rows.append((float(r), best, wit[0], wit[1]))

    seq_tables: dict[str, tuple[SequenceRow, ...]] = {}
    for name, (sxs, sys) in (sequences or {}).items():
        rows = []
        for i, (x, y) in enumerate(zip(sxs, sys), start=1):
            quot = _direct_quotient(m, float(x), float(y))
            rows.append(SequenceRow(i, float(x), float(y), INF if quot is None else quot))
        seq_tables[name] = tuple(rows)

    qmap_rows: tuple[QmapSequenceRow, ...] = ()
    if m.label == "Q-map":
        qmap_rows = tuple(_qmap_sequences(m, qmap_ks))

    verdict = _probe_verdict(
        [row[1] for row in kappa_rows],
        [tuple(r.quotient for r in rows) for rows in seq_tables.values()]
        + ([tuple(r.quotient for r in qmap_rows)] if qmap_rows else []),
        growth_threshold,
        stability_window,
    )
    return MRProbeReport(
        verdict=verdict,
        kappa_table=tuple(kappa_rows),
        sequence_tables=seq_tables,
        qmap_table=qmap_rows,
    )


def _subsample(pts: np.ndarray, limit: int) -> np.ndarray:
    if pts.size <= limit:
        return pts
    idx = np.linspace(0, pts.size - 1, limit).round().astype(int)
    return pts[np.unique(idx)]


def _probe_verdict(kappas, quotient_seqs, growth_threshold, stability_window) -> str:
    unbounded = any(math.isinf(k) for k in kappas)
    if kappas and kappas[0] > 0.0 and kappas[-1] / kappas[0] >= growth_threshold:
        unbounded = True
    for quots in quotient_seqs:
        finite = [q for q in quots if q is not None]
        if any(math.isinf(q) for q in finite):
            unbounded = True
            continue
        if len(finite) >= 2 and max(finite) >= growth_threshold:
            tail = finite[len(finite) // 2 :]
            if all(a <= b for a, b in zip(tail, tail[1:])):
                unbounded = True
    if unbounded:
        return "unbounded"
    tail = kappas[-3:] if len(kappas) >= 3 else kappas
    lo, hi = min(tail), max(tail)
    if hi == 0.0 or (lo > 0.0 and hi / lo - 1.0 < stability_window):
        return "bounded"
    return "inconclusive"


# --------------------------------------------------------------------------
# growth conditions for subdifferential maps


@dataclass(frozen=True)
class GrowthCheckResult:
    passed: bool
    margin: float
    witness: float
    n_points: int
    rows: tuple[tuple[float, float, float, float], ...] = field(repr=False, default=())


def growth_check_lower(
    f: Callable[[float], float],
    subdiff_inverse_at_target: IntervalUnion,
    xbar: float,
    xstar: float,
    q: float,
    alpha: float,
    eta: float,
    grid: GridSpec | None = None,
    *,
    tol: float = 1e-12,
    keep_rows: bool = False,
) -> GrowthCheckResult:
    """Check the lower growth estimate on B(xbar, eta).

    Condition: f(x) >= f(xbar) + xstar*(x - xbar)
    + (q*alpha/(1+q)) * d(x; (subdiff f)^{-1}(xstar))^{(1+q)/q}.
    Passes iff the minimum margin over the grid is >= -tol.
    """
    if alpha <= 0.0 or eta <= 0.0:
        raise ValueError("alpha and eta must be positive")
    grid = grid or GridSpec(eta, 40, 6)
    coeff = q * alpha / (1.0 + q)
    p = (1.0 + q) / q
    fbar = f(xbar)
    best_margin, best_x = INF, xbar
    rows = []
    for x in grid.points(xbar):
        x = float(x)
        lhs = f(x)
        rhs = fbar + xstar * (x - xbar) + coeff * subdiff_inverse_at_target.distance(x) ** p
        margin = lhs - rhs
        if keep_rows:
            rows.append((x, lhs, rhs, margin))
        if margin < best_margin:
            best_margin, best_x = margin, x
    return GrowthCheckResult(
        passed=best_margin >= -tol,
        margin=best_margin,
        witness=best_x,
        n_points=grid.n_points(),
        rows=tuple(rows),
    )


@dataclass(frozen=True)
class PairwiseViolation:
    u: float
    x: float
    xstar_at_x: float
    margin: float


@dataclass(frozen=True)
class PairwiseCheckResult:
    passed: bool
    first_violation: PairwiseViolation | None
    min_margin: float
    n_pairs: int
    n_violations: int


def default_graph_sampler(
    subdiff: SetValuedMap,
    inverse_at_target: IntervalUnion,
    xbar: float,
    xstar: float,
    ball_radius: float,
    grid: GridSpec,
):
    """Pairs ((u, xstar), (x, x*)) from the graph of the subdifferential.

    x runs over the log grid (plus the map's kink anchors) in
    B(xbar, ball_radius); x* takes the endpoints and midpoint of each part
    of the subdifferential there (infinite endpoints are clipped to
    xstar +/- ball_radius for sampling); u runs over the endpoints and
    in-ball grid points of the target preimage.
    """
    lo_b, hi_b = xbar - ball_radius, xbar + ball_radius
    xs = [float(x) for x in grid.with_radius(ball_radius).points(xbar)]
    xs.extend(a for a in subdiff.anchors if lo_b <= a <= hi_b)
    xs = sorted(set(x for x in xs if subdiff.domain.contains(x)))

    us: list[float] = []
    grid_pts = grid.with_radius(ball_radius).points(xbar)
    for part in inverse_at_target.parts:
        lo = max(part.lo, lo_b)
        hi = min(part.hi, hi_b)
        if lo > hi:
            continue
        us.append(lo)
        us.append(hi)
        inside = grid_pts[(grid_pts >= lo) & (grid_pts <= hi)]
        us.extend(float(u) for u in inside)
    us = sorted(set(us))

    for x in xs:
        val = subdiff.eval(x)
        for part in val.parts:
            lo = part.lo if math.isfinite(part.lo) else xstar - ball_radius
            hi = part.hi if math.isfinite(part.hi) else xstar + ball_radius
            cands = (lo, 0.5 * (lo + hi), hi) if lo != hi else (lo,)
            for xs_ in dict.fromkeys(cands):
                for u in us:
                    yield u, x, xs_


def growth_check_pairwise(
    f: Callable[[float], float],
    subdiff: SetValuedMap,
    xbar: float,
    xstar: float,
    q: float,
    beta: float,
    eta: float,
    grid: GridSpec | None = None,
    *,
    inverse_at_target: IntervalUnion | None = None,
    graph_sampler=None,
    tol: float = 1e-12,
) -> PairwiseCheckResult:
    """Check the pairwise growth condition over sampled graph pairs.

    Condition: f(u) >= f(x) + x*(u - x)
    - (q*beta/(1+q)) * d(x; (subdiff f)^{-1}(xstar))^{(1+q)/q}
    for pairs (u, xstar), (x, x*) in the graph near (xbar, xstar).
    Reports the first violating pair, if any.
    """
    if beta <= 0.0 or eta <= 0.0:
        raise ValueError("beta and eta must be positive")
    ball = eta + (q * eta / (1.0 + q)) ** (1.0 / q)
    grid = grid or GridSpec(ball, 12, 6)
    if inverse_at_target is None:
        inverse_at_target = subdiff.inverse_eval(xstar)
    pairs = graph_sampler or default_graph_sampler(
        subdiff, inverse_at_target, xbar, xstar, ball, grid
    )
    coeff = q * beta / (1.0 + q)
    p = (1.0 + q) / q

    first: PairwiseViolation | None = None
    min_margin, n_pairs, n_viol = INF, 0, 0
    dist_cache: dict[float, float] = {}
    for u, x, xs_ in pairs:
        d = dist_cache.get(x)
        if d is None:
            d = inverse_at_target.distance(x)
            dist_cache[x] = d
        margin = f(u) - f(x) - xs_ * (u - x) + coeff * d**p
        n_pairs += 1
        if margin < min_margin:
            min_margin = margin
        if margin < -tol:
            n_viol += 1
            if first is None:
                first = PairwiseViolation(u, x, xs_, margin)
    return PairwiseCheckResult(
        passed=first is None,
        first_violation=first,
        min_margin=min_margin,
        n_pairs=n_pairs,
        n_violations=n_viol,
    )


# --------------------------------------------------------------------------
# perturbation stability


def perturbation_radius(kappa: float, q: float) -> float:
    """Guaranteed Lipschitz-perturbation radius 1/kappa^{1/q}."""
    if kappa == 0.0:
        return INF
    if math.isinf(kappa):
        return 0.0
    return kappa ** (-1.0 / q)


def perturbed_map(F: SetValuedMap, g: SmoothMap, xbar: float) -> SetValuedMap:
    """The map x -> F(x) - g(xbar) + g(x) (pointwise scalar shift)."""
    g_at_base = g.value(xbar)

    def ev(x: float) -> IntervalUnion:
        return F.eval_fn(x).shift(g.value(x) - g_at_base)

    return SetValuedMap(
        label=f"{F.label}+{g.label}",
        eval_fn=ev,
        domain=F.domain,
        anchors=F.anchors,
        truncation_scale=F.truncation_scale,
    )


@dataclass(frozen=True)
class PerturbationReport:
    base_estimate: RegularityEstimate
    perturbed_estimate: RegularityEstimate
    kappa: float
    lam: float
    order: float
    bound: float
    satisfied: bool
    guaranteed_radius: float
    lip_estimate: float
    kappa_covers_estimate: bool
    lambda_covers_lip: bool


def perturbation_bound_check(
    F: SetValuedMap,
    g: SmoothMap,
    base: tuple[float, float],
    q: float,
    kappa: float,
    lam: float,
    grid: GridSpec,
    *,
    backend=None,
) -> PerturbationReport:
    """Check the perturbed-modulus upper bound kappa / (1 - lam*kappa^{1/q})^q.

    Requires q >= 1 and lam * kappa^{1/q} < 1 (applicability); estimates the
    strong modulus of x -> F(x) - g(xbar) + g(x) at the base point and
    compares against the bound.  Also reports the guaranteed perturbation
    radius kappa^{-1/q}.
    """
    if q < 1.0:
        raise ApplicabilityError(f"perturbation theory needs q >= 1, got {q!r}")
    if lam * kappa ** (1.0 / q) >= 1.0:
        raise ApplicabilityError(
            f"lam * kappa^(1/q) = {lam * kappa ** (1.0 / q)!r} >= 1: bound not applicable"
        )
    xbar, _ = base
    base_est = estimate_strong_subreg_modulus(F, base, q, grid, backend=backend)
    lip = g.lipschitz_estimate(xbar)
    pert = perturbed_map(F, g, xbar)
    pert_est = estimate_strong_subreg_modulus(pert, base, q, grid, backend=backend)
    bound = kappa / (1.0 - lam * kappa ** (1.0 / q)) ** q
    return PerturbationReport(
        base_estimate=base_est,
        perturbed_estimate=pert_est,
        kappa=kappa,
        lam=lam,
        order=q,
        bound=bound,
        satisfied=pert_est.modulus <= bound,
        guaranteed_radius=perturbation_radius(kappa, q),
        lip_estimate=lip,
        kappa_covers_estimate=kappa > base_est.modulus,
        lambda_covers_lip=lam >= lip * (1.0 - 1e-12),
    )


# --------------------------------------------------------------------------
# parameterized linearizations


def linearized_map(F: SetValuedMap, g: SmoothMap, xbar: float, u: float) -> SetValuedMap:
    """The parameterized partial linearization x -> g(xbar) + g'(u)(x - xbar) + F(x)."""
    g_at_base = g.value(xbar)
    slope = g.derivative(u)

    def ev(x: float) -> IntervalUnion:
        return F.eval_fn(x).shift(g_at_base + slope * (x - xbar))

    return SetValuedMap(
        label=f"lin[{F.label};u={u!r}]",
        eval_fn=ev,
        domain=F.domain,
        anchors=F.anchors,
        truncation_scale=F.truncation_scale,
    )


@dataclass(frozen=True)
class ParameterizedReport:
    us: tuple[float, ...]
    moduli: tuple[RegularityEstimate, ...]
    lambda_target: float
    all_within_target: bool
    base_modulus: float
    precondition_ok: bool
    fg_estimate: RegularityEstimate
    linearization_estimate: RegularityEstimate
    equivalence_agree: bool
    moduli_rel_gap: float
    equivalence_within: bool

    @property
    def worst_modulus(self) -> float:
        return max(e.modulus for e in self.moduli)

    @property
    def worst_u(self) -> float:
        worst = max(self.moduli, key=lambda e: e.modulus)
        return self.us[self.moduli.index(worst)]


def parameterized_check(
    F: SetValuedMap,
    g: SmoothMap,
    base: tuple[float, float],
    q: float,
    lambda_target: float,
    u_radius: float,
    grid: GridSpec,
    *,
    n_u: int = 21,
    equivalence_grid: GridSpec | None = None,
    equivalence_tol: float = 0.10,
    backend=None,
) -> ParameterizedReport:
    """Strong-modulus stability of x -> g(xbar) + g'(u)(x - xbar) + F(x) in u.

    Estimates the strong q-subregularity modulus at the base point for each
    u on a uniform grid in B(xbar, u_radius) and checks it stays below
    ``lambda_target``.  Also compares x -> F(x) + g(x) against its partial
    linearization at u = xbar (same verdict, moduli within
    ``equivalence_tol``).
    """
    xbar, _ = base
    us = np.linspace(xbar - u_radius, xbar + u_radius, n_u)
    moduli = []
    for u in us:
        gu = linearized_map(F, g, xbar, float(u))
        moduli.append(estimate_strong_subreg_modulus(gu, base, q, grid, backend=backend))
    all_within = all(e.is_finite and e.modulus <= lambda_target for e in moduli)

    base_map = linearized_map(F, g, xbar, xbar)
    base_est = estimate_strong_subreg_modulus(base_map, base, q, grid, backend=backend)

    eg = equivalence_grid or grid

    def fg_ev(x: float) -> IntervalUnion:
        return F.eval_fn(x).shift(g.value(x))

    fg_full = SetValuedMap(
        label=f"{F.label}+{g.label}",
        eval_fn=fg_ev,
        domain=F.domain,
        anchors=F.anchors,
        truncation_scale=F.truncation_scale,
    )
    fg_est = estimate_strong_subreg_modulus(fg_full, base, q, eg, backend=backend)
    lin_est = estimate_strong_subreg_modulus(base_map, base, q, eg, backend=backend)
    agree = (fg_est.is_finite and not fg_est.violation) == (
        lin_est.is_finite and not lin_est.violation
    )
    if fg_est.is_finite and lin_est.is_finite and lin_est.modulus > 0.0:
        gap = abs(fg_est.modulus / lin_est.modulus - 1.0)
    else:
        gap = INF if fg_est.modulus != lin_est.modulus else 0.0
    return ParameterizedReport(
        us=tuple(float(u) for u in us),
        moduli=tuple(moduli),
        lambda_target=lambda_target,
        all_within_target=all_within,
        base_modulus=base_est.modulus,
        precondition_ok=base_est.modulus < lambda_target,
        fg_estimate=fg_est,
        linearization_estimate=lin_est,
        equivalence_agree=agree,
        moduli_rel_gap=gap,
        equivalence_within=agree and gap <= equivalence_tol,
    )
