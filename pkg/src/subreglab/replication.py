"""End-to-end replication of the built-in worked cases.

Each criterion reruns one catalog case through the public API and checks
the known values at fixed tolerances.  Row names key the replication
matrix by the numbered example/theorem labels of the case catalog
("Ex3.2-...", "Thm4.1-...", ...); those labels are the stable contract
used by the CLI and the acceptance suite.

Criterion details are deterministic strings (17 significant digits, no
timing), so two consecutive runs produce byte-identical matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .geneq import (
    OperatorSchedule,
    SolveConfig,
    equation_catalog,
    rate_analysis,
    schedule_catalog,
    solve,
)
from .maps import SmoothMap, get_entry
from .regularity import (
    GridSpec,
    estimate_strong_subreg_modulus,
    growth_check_lower,
    growth_check_pairwise,
    metric_regularity_probe,
    order_scan,
    parameterized_check,
    perturbation_bound_check,
    perturbation_radius,
)
from .intervals import IntervalUnion


def _fmt(x: float) -> str:
    return format(x, ".17g")


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: bool
    detail: str

    @property
    def status(self) -> str:
        return "pass" if self.passed else "FAIL"


# --------------------------------------------------------------------------
# criteria


def _ex32_strong() -> CriterionResult:
    entry = get_entry("sqrt-abs")
    grid = GridSpec(1.0, 625, 8)  # 10002 points
    est = estimate_strong_subreg_modulus(entry.map, entry.base_point, 2.0, grid)
    ok = abs(est.modulus - 1.0) <= 1e-9 and est.n_points >= 10_000
    return CriterionResult(
        "Ex3.2-strong-2-subreg",
        ok,
        f"eta_hat={_fmt(est.modulus)} n_points={est.n_points} witness={_fmt(est.witness)}",
    )


def _ex32_scan() -> CriterionResult:
    entry = get_entry("sqrt-abs")
    radii = [10.0**-i for i in range(1, 7)]
    rep = order_scan(entry.map, entry.base_point, [1.0, 2.0, 2.5], radii, GridSpec(0.1, 40, 6))
    growth = rep.total_growth(2.5)
    ok = (
        rep.verdict(1.0) == "bounded"
        and rep.verdict(2.0) == "bounded"
        and rep.verdict(2.5) == "blow-up"
        and growth >= 10.0
    )
    return CriterionResult(
        "Ex3.2-order-scan",
        ok,
        f"verdicts q1={rep.verdict(1.0)} q2={rep.verdict(2.0)} q2.5={rep.verdict(2.5)} "
        f"growth(2.5)={_fmt(growth)}",
    )


def _ex33_strong() -> CriterionResult:
    entry = get_entry("S-map")
    est = estimate_strong_subreg_modulus(entry.map, entry.base_point, 2.0, GridSpec(0.25, 100, 6))
    ok = est.modulus <= 1.0 + 1e-9
    return CriterionResult(
        "Ex3.3-strong-2-subreg",
        ok,
        f"eta_hat={_fmt(est.modulus)} witness={_fmt(est.witness)}",
    )


def _ex33_probe() -> CriterionResult:
    entry = get_entry("Q-map")
    rep = metric_regularity_probe(
        entry.map, entry.base_point, grid=GridSpec(0.2, 8, 3), qmap_ks=range(3, 11)
    )
    ok = rep.verdict == "unbounded" and all(row.quotient >= row.k for row in rep.qmap_table)
    quots = " ".join(f"k{row.k}={_fmt(row.quotient)}" for row in rep.qmap_table[:4])
    return CriterionResult("Ex3.3-mr-probe", ok, f"verdict={rep.verdict} {quots} ...")


def _ex35_lower() -> CriterionResult:
    entry = get_entry("subdiff-plateau")
    res = growth_check_lower(
        entry.potential, IntervalUnion.of(-1.0, 1.0), 0.0, 0.0, 2.0, 1.0, 0.5
    )
    ok = res.passed and res.margin >= 0.0
    return CriterionResult("Ex3.5-growth-lower", ok, f"margin={_fmt(res.margin)}")


def _ex35_pairwise() -> CriterionResult:
    entry = get_entry("subdiff-plateau")
    res = growth_check_pairwise(entry.potential, entry.map, 0.0, 0.0, 2.0, 0.5, 0.5)
    return CriterionResult(
        "Ex3.5-growth-pairwise",
        res.passed,
        f"min_margin={_fmt(res.min_margin)} pairs={res.n_pairs}",
    )


def _ex35_probe() -> CriterionResult:
    entry = get_entry("subdiff-plateau")
    ks = list(range(2, 31))
    seq = {
        "off-plateau-path": (
            [1.0 / k for k in ks],
            [1.0 / (2.0 * k) for k in ks],
        )
    }
    rep = metric_regularity_probe(entry.map, entry.base_point, sequences=seq)
    rows = rep.sequence_tables["off-plateau-path"]
    q25 = rows[ks.index(25)].quotient
    ok = rep.verdict == "unbounded" and q25 >= 10.0
    return CriterionResult(
        "Ex3.5-mr-probe", ok, f"verdict={rep.verdict} quotient(k=25)={_fmt(q25)}"
    )


def _ex36_strong() -> CriterionResult:
    entry = get_entry("subdiff-sqrt")
    parts = []
    ok = True
    for q in (1.0, 2.0, 4.0):
        gamma = 2.0 ** (-2.0 * q / (q + 2.0))
        est = estimate_strong_subreg_modulus(entry.map, entry.base_point, q, GridSpec(gamma, 200, 6))
        ok = ok and est.modulus <= 1.0 + 1e-9
        parts.append(f"q{q:g}={_fmt(est.modulus)}")
    return CriterionResult("Ex3.6-strong-subreg", ok, " ".join(parts))


def _ex36_pairwise() -> CriterionResult:
    entry = get_entry("subdiff-sqrt")
    ok = True
    witnesses = []
    for beta in (0.1, 1.0, 10.0):
        for eta in (0.1, 1.0, 10.0):
            res = growth_check_pairwise(entry.potential, entry.map, 0.0, 0.0, 2.0, beta, eta)
            ok = ok and (not res.passed) and res.first_violation is not None
            if res.first_violation is not None:
                witnesses.append(_fmt(res.first_violation.x))
    return CriterionResult(
        "Ex3.6-pairwise-violation",
        ok,
        f"violations=9/9 witness_x[0]={witnesses[0] if witnesses else 'none'}",
    )


def _thm41_bound() -> CriterionResult:
    entry = get_entry("sqrt-abs")
    grid = GridSpec(1.0, 100, 6)
    base = estimate_strong_subreg_modulus(entry.map, entry.base_point, 2.0, grid)
    kappa = base.modulus * 1.05
    ok = True
    parts = []
    for lam in (0.1, 0.3):
        g = SmoothMap(lambda x, l=lam: l * x, lambda _x, l=lam: l, label=f"{lam:g}x")
        rep = perturbation_bound_check(entry.map, g, entry.base_point, 2.0, kappa, lam, grid)
        ok = ok and rep.satisfied
        parts.append(
            f"lam={lam:g}: eta={_fmt(rep.perturbed_estimate.modulus)} bound={_fmt(rep.bound)}"
        )
    return CriterionResult("Thm4.1-bound", ok, "; ".join(parts))


def _cor43_radius() -> CriterionResult:
    entry = get_entry("sqrt-abs")
    grid = GridSpec(1.0, 100, 6)
    base = estimate_strong_subreg_modulus(entry.map, entry.base_point, 2.0, grid)
    kappa = base.modulus * 1.05
    g = SmoothMap(lambda x: 0.1 * x, lambda _x: 0.1, label="0.1x")
    rep = perturbation_bound_check(entry.map, g, entry.base_point, 2.0, kappa, 0.1, grid)
    expected = kappa**-0.5
    ok = abs(rep.guaranteed_radius - expected) <= 1e-12
    return CriterionResult(
        "Cor4.3-radius",
        ok,
        f"radius={_fmt(rep.guaranteed_radius)} kappa^(-1/2)={_fmt(expected)}",
    )


def _thm44_param() -> CriterionResult:
    rep = _param_report()
    ok = rep.all_within_target and len(rep.us) == 21
    return CriterionResult(
        "Thm4.4-param",
        ok,
        f"worst={_fmt(rep.worst_modulus)} at u={_fmt(rep.worst_u)} target=1.3",
    )


def _param_report():
    entry = get_entry("sqrt-abs")
    g = SmoothMap(lambda x: x * x, lambda x: 2.0 * x, label="x^2")
    return parameterized_check(
        entry.map,
        g,
        entry.base_point,
        2.0,
        1.3,
        0.1,
        GridSpec(0.25, 60, 6),
        n_u=21,
        equivalence_grid=GridSpec(1e-3, 60, 6),
    )


def _cor42_equivalence() -> CriterionResult:
    rep = _param_report()
    ok = rep.equivalence_agree and rep.moduli_rel_gap <= 0.10
    return CriterionResult(
        "Cor4.2-equivalence",
        ok,
        f"agree={rep.equivalence_agree} rel_gap={_fmt(rep.moduli_rel_gap)}",
    )


def _ex52_trace():
    eq = equation_catalog()["example-5-2"]
    sched = schedule_catalog()["example-5-2"]
    return solve(eq, 0.5, sched)


def _ex52_iterates() -> CriterionResult:
    tr = _ex52_trace()
    expected = [math.ldexp(1.0, -math.factorial(k)) for k in range(1, 6)]
    ok = tr.status == "converged" and len(tr) >= 5
    rel = 0.0
    if ok:
        rel = max(abs(a - b) / b for a, b in zip(tr.iterates[:5], expected))
        ok = rel <= 1e-10 and all(r <= 1e-12 for r in tr.step_residuals)
    return CriterionResult(
        "Ex5.2-iterates",
        ok,
        f"max_rel_err={_fmt(rel)} step_residual_max="
        f"{_fmt(max(tr.step_residuals) if tr.step_residuals else 0.0)}",
    )


def _ex52_orders() -> CriterionResult:
    tr = _ex52_trace()
    rr = rate_analysis(tr, 0.0, q_list=(2.0,))
    want = {2: 3.0, 3: 4.0, 4: 5.0}
    ok = all(
        k in rr.pointwise_orders and abs(rr.pointwise_orders[k] - v) <= 1e-9
        for k, v in want.items()
    )
    got = " ".join(f"q{k}={_fmt(rr.pointwise_orders.get(k, float('nan')))}" for k in want)
    return CriterionResult("Ex5.2-orders", ok, got)


def _ex52_dennis_more() -> CriterionResult:
    tr = _ex52_trace()
    rr = rate_analysis(tr, 0.0, q_list=(2.0,))
    dm = rr.dennis_more_ratios
    bs = tr.operators
    ok = (
        len(dm) >= 4
        and all(d == abs(b) for d, b in zip(dm, bs))
        and dm[0] == 3.0
        and dm[1] == 0.8
        and abs(dm[2]) <= 0.04
        and all(a > b for a, b in zip(dm, dm[1:]))
    )
    ratios = rr.super_q_ratios[2.0]
    # hypothesis (operator deviations vanish) and conclusion (order-2 ratios
    # vanish) of the convergence implication, witnessed on one trace
    ok = ok and ratios[-1] <= 1e-12 and all(a >= b for a, b in zip(ratios, ratios[1:]))
    return CriterionResult(
        "Ex5.2-dennis-more",
        ok,
        f"dm={' '.join(_fmt(d) for d in dm[:4])} super_q2_last={_fmt(ratios[-1])}",
    )


def _newton_sanity() -> CriterionResult:
    eq = equation_catalog()["quadratic-root"]
    tr = solve(eq, 2.0, OperatorSchedule.newton())
    xs = [2.0]
    while abs(xs[-1] * xs[-1] - 1.0) > 1e-12 and len(xs) < 40:
        x = xs[-1]
        xs.append(x - (x * x - 1.0) / (2.0 * x))
    ok = tr.status == "converged" and len(tr) == len(xs)
    rel = 0.0
    if ok:
        rel = max(abs(a - b) / abs(b) for a, b in zip(tr.iterates, xs))
        ok = rel <= 1e-12
    rr = rate_analysis(tr, 1.0)
    ok = ok and 1.8 <= rr.regression_order <= 2.2
    return CriterionResult(
        "Newton-sanity",
        ok,
        f"max_rel_step_err={_fmt(rel)} regression_order={_fmt(rr.regression_order)}",
    )


def _chord_sanity() -> CriterionResult:
    eq = equation_catalog()["quadratic-root"]
    tr = solve(eq, 2.0, OperatorSchedule.chord(4.0), SolveConfig(max_iter=60))
    rr = rate_analysis(tr, 1.0)
    ok = tr.status == "converged" and 0.9 <= rr.regression_order <= 1.1
    return CriterionResult(
        "Chord-sanity", ok, f"regression_order={_fmt(rr.regression_order)}"
    )


CRITERIA: tuple[tuple[str, Callable[[], CriterionResult]], ...] = (
    ("Ex3.2-strong-2-subreg", _ex32_strong),
    ("Ex3.2-order-scan", _ex32_scan),
    ("Ex3.3-strong-2-subreg", _ex33_strong),
    ("Ex3.3-mr-probe", _ex33_probe),
    ("Ex3.5-growth-lower", _ex35_lower),
    ("Ex3.5-growth-pairwise", _ex35_pairwise),
    ("Ex3.5-mr-probe", _ex35_probe),
    ("Ex3.6-strong-subreg", _ex36_strong),
    ("Ex3.6-pairwise-violation", _ex36_pairwise),
    ("Thm4.1-bound", _thm41_bound),
    ("Cor4.3-radius", _cor43_radius),
    ("Thm4.4-param", _thm44_param),
    ("Cor4.2-equivalence", _cor42_equivalence),
    ("Ex5.2-iterates", _ex52_iterates),
    ("Ex5.2-orders", _ex52_orders),
    ("Ex5.2-dennis-more", _ex52_dennis_more),
    ("Newton-sanity", _newton_sanity),
    ("Chord-sanity", _chord_sanity),
)


@dataclass(frozen=True)
class ReplicationSummary:
    results: tuple[CriterionResult, ...]

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def matrix_rows(self) -> list[tuple[str, str, str]]:
        return [(r.name, r.status, r.detail) for r in self.results]


def replicate_all(threads: int = 1) -> ReplicationSummary:
    """Run every replication criterion; results are in fixed order."""
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda item: item[1](), CRITERIA))
    else:
        results = [fn() for _, fn in CRITERIA]
    return ReplicationSummary(tuple(results))
