"""Acceptance gate: every criterion at its stated tolerance and budget.

Each test prints one PASS line (shown with ``pytest -s`` or on failure);
the replicate-all matrix is exercised for byte-identical determinism.
"""

import math
import time

import numpy as np
import pytest

from subreglab import (
    GridSpec,
    IntervalUnion,
    OperatorSchedule,
    SmoothMap,
    SolveConfig,
    catalog,
    equation_catalog,
    estimate_strong_subreg_modulus,
    estimate_subreg_modulus,
    get_entry,
    growth_check_lower,
    growth_check_pairwise,
    metric_regularity_probe,
    normalize,
    order_scan,
    parameterized_check,
    perturbation_bound_check,
    rate_analysis,
    ratio_at,
    schedule_catalog,
    solve,
)
from subreglab.experiments import run_replicate_all


class _budget:
    """Assert the wrapped block stays under the stated runtime budget."""

    def __init__(self, seconds: float):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, (
                f"runtime {self.elapsed:.3f}s exceeds budget {self.seconds}s"
            )
        return False


def _report(name: str, detail: str, elapsed: float) -> None:
    print(f"PASS {name} ({elapsed:.3f}s): {detail}")


def test_criterion_1_sqrt_abs_modulus_and_scan():
    e = get_entry("sqrt-abs")
    with _budget(1.0) as b:
        est = estimate_strong_subreg_modulus(e.map, e.base_point, 2.0, GridSpec(1.0, 625, 8))
        assert est.n_points >= 10_000
        assert abs(est.modulus - 1.0) <= 1e-9

        radii = [10.0**-i for i in range(1, 7)]
        rep = order_scan(e.map, e.base_point, [1.0, 2.0, 2.5], radii, GridSpec(0.1, 40, 6))
        assert rep.verdict(1.0) == "bounded"
        assert rep.verdict(2.0) == "bounded"
        assert rep.verdict(2.5) == "blow-up"
        assert rep.total_growth(2.5) >= 10.0
    _report(
        "criterion-1 (square-root cusp modulus + order scan)",
        f"eta_hat={est.modulus!r} growth(2.5)={rep.total_growth(2.5):.2f}x",
        b.elapsed,
    )


def test_criterion_2_solution_map_and_probe():
    with _budget(2.0) as b:
        s = get_entry("S-map")
        est = estimate_strong_subreg_modulus(s.map, s.base_point, 2.0, GridSpec(0.25, 100, 6))
        assert est.modulus <= 1.0 + 1e-9

        q = get_entry("Q-map")
        rep = metric_regularity_probe(
            q.map, q.base_point, grid=GridSpec(0.2, 8, 3), qmap_ks=range(3, 11)
        )
        ks = [row.k for row in rep.qmap_table]
        assert ks == list(range(3, 11))
        for row in rep.qmap_table:
            assert row.quotient >= row.k
        assert rep.verdict == "unbounded"
    _report(
        "criterion-2 (solution-map subregularity + regularity failure)",
        f"eta_hat={est.modulus!r} quotients k=3..10 all >= k",
        b.elapsed,
    )


def test_criterion_3_plateau_growth_conditions():
    e = get_entry("subdiff-plateau")
    with _budget(1.0) as b:
        lower = growth_check_lower(
            e.potential, IntervalUnion.of(-1.0, 1.0), 0.0, 0.0, 2.0, 1.0, 0.5
        )
        assert lower.passed and lower.margin >= 0.0

        pairwise = growth_check_pairwise(e.potential, e.map, 0.0, 0.0, 2.0, 0.5, 0.5)
        assert pairwise.passed

        ks = list(range(2, 31))
        probe = metric_regularity_probe(
            e.map,
            e.base_point,
            sequences={"path": ([1.0 / k for k in ks], [1.0 / (2.0 * k) for k in ks])},
        )
        rows = probe.sequence_tables["path"]
        assert rows[ks.index(25)].quotient >= 10.0
        assert probe.verdict == "unbounded"
    _report(
        "criterion-3 (plateau growth checks + probe)",
        f"lower margin={lower.margin!r} pairwise min margin={pairwise.min_margin!r} "
        f"quotient(k=25)={rows[ks.index(25)].quotient!r}",
        b.elapsed,
    )


def test_criterion_4_sqrt_subdiff_all_orders_and_violations():
    e = get_entry("subdiff-sqrt")
    with _budget(1.0) as b:
        moduli = {}
        for q in (1.0, 2.0, 4.0):
            gamma = 2.0 ** (-2.0 * q / (q + 2.0))
            est = estimate_strong_subreg_modulus(
                e.map, e.base_point, q, GridSpec(gamma, 200, 6)
            )
            assert est.modulus <= 1.0 + 1e-9
            moduli[q] = est.modulus

        n_viol = 0
        for beta in (0.1, 1.0, 10.0):
            for eta in (0.1, 1.0, 10.0):
                res = growth_check_pairwise(e.potential, e.map, 0.0, 0.0, 2.0, beta, eta)
                assert not res.passed and res.first_violation is not None
                n_viol += 1
        assert n_viol == 9
    _report(
        "criterion-4 (any-order subregularity + pairwise violations)",
        f"moduli={moduli} violations=9/9",
        b.elapsed,
    )


def test_criterion_5_perturbation_bound_and_radius():
    e = get_entry("sqrt-abs")
    with _budget(1.0) as b:
        grid = GridSpec(1.0, 100, 6)
        base = estimate_strong_subreg_modulus(e.map, e.base_point, 2.0, grid)
        kappa = base.modulus * 1.05
        bounds = {}
        for lam in (0.1, 0.3):
            g = SmoothMap(lambda x, l=lam: l * x, lambda _x, l=lam: l)
            rep = perturbation_bound_check(e.map, g, e.base_point, 2.0, kappa, lam, grid)
            assert rep.perturbed_estimate.modulus <= rep.bound
            assert rep.satisfied
            assert abs(rep.guaranteed_radius - kappa**-0.5) <= 1e-12
            bounds[lam] = (rep.perturbed_estimate.modulus, rep.bound)
    _report(
        "criterion-5 (perturbed modulus bound + guaranteed radius)",
        f"kappa={kappa!r} results={bounds}",
        b.elapsed,
    )


def test_criterion_6_parameterized_and_equivalence():
    e = get_entry("sqrt-abs")
    with _budget(2.0) as b:
        g = SmoothMap(lambda x: x * x, lambda x: 2.0 * x)
        rep = parameterized_check(
            e.map, g, e.base_point, 2.0, 1.3, 0.1, GridSpec(0.25, 60, 6),
            n_u=21, equivalence_grid=GridSpec(1e-3, 60, 6),
        )
        assert len(rep.us) == 21
        assert all(est.modulus <= 1.3 for est in rep.moduli)
        assert rep.equivalence_agree
        assert rep.moduli_rel_gap <= 0.10
    _report(
        "criterion-6 (parameterized moduli + linearization equivalence)",
        f"worst={rep.worst_modulus!r} rel_gap={rep.moduli_rel_gap!r}",
        b.elapsed,
    )


def test_criterion_7_factorial_rate_run():
    with _budget(1.0) as b:
        tr = solve(equation_catalog()["example-5-2"], 0.5, schedule_catalog()["example-5-2"])
        assert tr.status == "converged"
        expected = [math.ldexp(1.0, -math.factorial(k)) for k in range(1, 6)]
        for got, want in zip(tr.iterates[:5], expected):
            assert abs(got - want) <= 1e-10 * want
        assert tr.exact_exponents[:5] == (-1, -2, -6, -24, -120)  # exact-exponent path
        assert all(r <= 1e-12 for r in tr.step_residuals)

        rr = rate_analysis(tr, 0.0, q_list=(2.0,))
        assert abs(rr.pointwise_orders[2] - 3.0) <= 1e-9
        assert abs(rr.pointwise_orders[3] - 4.0) <= 1e-9
        assert abs(rr.pointwise_orders[4] - 5.0) <= 1e-9

        dm = rr.dennis_more_ratios
        assert dm == tuple(abs(bk) for bk in tr.operators)
        assert dm[0] == 3.0 and dm[1] == 0.8 and abs(dm[2]) <= 0.04
        assert all(a > bb for a, bb in zip(dm, dm[1:]))  # decreasing for k >= 1
        ratios = rr.super_q_ratios[2.0]
        assert all(a >= bb for a, bb in zip(ratios, ratios[1:])) and ratios[-1] <= 1e-12
    _report(
        "criterion-7 (factorial-rate quasi-Newton run)",
        f"iterates=2^-k! k=1..5 orders=(3,4,5) dm={tuple(dm[:3])}",
        b.elapsed,
    )


def test_criterion_8_newton_and_chord_sanity():
    eq = equation_catalog()["quadratic-root"]
    with _budget(1.0) as b:
        tr = solve(eq, 2.0, OperatorSchedule.newton())
        xs = [2.0]
        while abs(xs[-1] ** 2 - 1.0) > 1e-12:
            x = xs[-1]
            xs.append(x - (x * x - 1.0) / (2.0 * x))
        assert len(tr) == len(xs)
        for got, want in zip(tr.iterates, xs):
            assert abs(got - want) <= 1e-12 * abs(want)
        newton_order = rate_analysis(tr, 1.0).regression_order
        assert 1.8 <= newton_order <= 2.2

        trc = solve(eq, 2.0, OperatorSchedule.chord(4.0), SolveConfig(max_iter=60))
        chord_order = rate_analysis(trc, 1.0).regression_order
        assert 0.9 <= chord_order <= 1.1
    _report(
        "criterion-8 (solver sanity)",
        f"newton_order={newton_order:.3f} chord_order={chord_order:.3f}",
        b.elapsed,
    )


def _random_union(rng):
    n = int(rng.integers(1, 6))
    raw = []
    for _ in range(n):
        a = float(rng.normal(scale=2.0))
        w = float(abs(rng.normal(scale=1.0)))
        raw.append((a, a + w))
    return raw, normalize(raw)


def test_criterion_9_property_suites(tmp_path):
    with _budget(30.0) as b:
        # interval algebra invariants, >= 1e5 random cases
        rng = np.random.default_rng(20260810)
        n_cases = 100_000
        for _ in range(n_cases):
            raw, u = _random_union(rng)
            p = float(rng.normal(scale=3.0))
            q = float(rng.normal(scale=3.0))
            brute = min(max(lo - p, p - hi, 0.0) for lo, hi in raw)
            assert u.distance(p) == brute
            assert abs(u.distance(p) - u.distance(q)) <= abs(p - q) + 1e-12
            v = u.nearest_point(p)
            assert u.contains(v) and abs(p - v) == u.distance(p)

        # estimator invariants across the whole catalog
        for entry in catalog():
            m = entry.map
            radius = 0.25 if m.domain.is_bounded else 0.5
            grid = GridSpec(radius, 30, 4)
            strong_lo = estimate_strong_subreg_modulus(m, entry.base_point, 1.0, grid, keep_table=True)
            strong_hi = estimate_strong_subreg_modulus(m, entry.base_point, 2.0, grid, keep_table=True)
            dens = strong_lo.table["denominator"]
            mask = (dens <= 1.0) & (dens > 0.0)
            # order monotonicity holds pointwise wherever the denominator is <= 1
            assert np.all(
                strong_lo.table["ratio"][mask] <= strong_hi.table["ratio"][mask] * (1 + 1e-12)
            )
            if m.has_inverse:
                plain = estimate_subreg_modulus(m, entry.base_point, 2.0, grid)
                assert strong_hi.modulus >= plain.modulus
            # witness reproduces the reported modulus
            num, den, ratio = ratio_at(m, entry.base_point, 2.0, strong_hi.witness, strong=True)
            if math.isinf(strong_hi.modulus):
                assert math.isinf(ratio)
            else:
                assert ratio == pytest.approx(strong_hi.modulus, rel=1e-12)

        # determinism: two consecutive replicate-all runs are byte-identical
        s1, p1 = run_replicate_all(out_dir=tmp_path / "r1")
        s2, p2 = run_replicate_all(out_dir=tmp_path / "r2")
        assert s1.all_passed and s2.all_passed
        assert p1.read_bytes() == p2.read_bytes()
        names = [r.name for r in s1.results]
        assert "Ex3.3-strong-2-subreg" in names and "Thm4.1-bound" in names
    _report(
        "criterion-9 (property suites + determinism)",
        f"interval cases={n_cases} catalog invariants ok; replicate-all byte-identical",
        b.elapsed,
    )
