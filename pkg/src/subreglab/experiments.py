"""Declarative experiment specs, the batch runner, and table writers.

A spec is one YAML document describing a single experiment::

    kind: estimate            # estimate | order-scan | growth-check |
    map: sqrt-abs             #   mr-probe | perturb-check | param-check | solve
    parameters:
      q: 2.0
      strong: true
      grid: {radius: 1.0, points_per_decade: 625, decades: 8}
    output:
      path: est.csv
      format: csv

Tables serialize with fixed 17-significant-digit float formatting and
atomic writes, so identical spec + tool version reproduce byte-identical
files.  Exit-code contract: 0 for pass verdicts, 1 for fail/violation
verdicts, 2 for spec or capability errors.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from .errors import SpecError, SubregLabError
from .geneq import (
    GeneralizedEquation,
    OperatorSchedule,
    SolveConfig,
    equation_catalog,
    rate_analysis,
    schedule_catalog,
    solve,
)
from .intervals import ClosedInterval, IntervalUnion
from .maps import SetValuedMap, SmoothMap, catalog_ids, get_entry
from .regularity import (
    GridSpec,
    estimate_strong_subreg_modulus,
    estimate_subreg_modulus,
    growth_check_lower,
    growth_check_pairwise,
    metric_regularity_probe,
    order_scan,
    parameterized_check,
    perturbation_bound_check,
)
from .replication import ReplicationSummary, replicate_all

KINDS = (
    "estimate",
    "order-scan",
    "growth-check",
    "mr-probe",
    "perturb-check",
    "param-check",
    "solve",
)


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


# --------------------------------------------------------------------------
# spec model


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    map_ref: str | dict | None
    equation_ref: str | dict | None
    parameters: dict
    out_path: str
    out_format: str
    raw: dict = field(repr=False, default_factory=dict)


def parse_spec(doc: dict, location: str = "<spec>") -> ExperimentSpec:
    """Validate a raw YAML document into an ExperimentSpec."""
    if not isinstance(doc, dict):
        raise SpecError("spec document must be a mapping", location)
    kind = doc.get("kind")
    if kind not in KINDS:
        raise SpecError(f"kind must be one of {KINDS}, got {kind!r}", f"{location}:kind")
    params = doc.get("parameters", {})
    if not isinstance(params, dict):
        raise SpecError("parameters must be a mapping", f"{location}:parameters")
    out = doc.get("output", {})
    if not isinstance(out, dict):
        raise SpecError("output must be a mapping", f"{location}:output")
    out_path = out.get("path", f"{kind}.csv")
    out_format = out.get("format", "csv")
    if out_format not in ("csv", "json"):
        raise SpecError(f"format must be csv or json, got {out_format!r}", f"{location}:output")

    map_ref = doc.get("map")
    equation_ref = doc.get("equation")
    if kind == "solve":
        if equation_ref is None:
            raise SpecError("solve needs an 'equation'", f"{location}:equation")
    else:
        if map_ref is None:
            raise SpecError(f"{kind} needs a 'map'", f"{location}:map")
        if isinstance(map_ref, str) and map_ref not in catalog_ids():
            raise SpecError(
                f"unknown catalog id {map_ref!r}; known: {', '.join(catalog_ids())}",
                f"{location}:map",
            )
    return ExperimentSpec(
        kind=kind,
        map_ref=map_ref,
        equation_ref=equation_ref,
        parameters=params,
        out_path=out_path,
        out_format=out_format,
        raw=doc,
    )


def load_spec(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise SpecError(f"not valid YAML: {e}", str(path)) from None
    return parse_spec(doc, str(path))


# --------------------------------------------------------------------------
# inline definitions


_PIECE_KINDS = ("const", "affine", "sqrt-abs")


def build_inline_map(defn: dict, location: str, seed: int | None = None) -> SetValuedMap:
    """Single-valued piecewise map from an inline spec.

    Pieces are {lo, hi, kind, ...} with kind const (value), affine (a, b for
    a*x+b) or sqrt-abs (scale).  The map is validated by sampling: every
    sampled point must evaluate, and a coarse bracketed inverse must
    recover the sample (graph-consistency check for maps without an
    analytic inverse oracle).
    """
    pieces = defn.get("pieces")
    if not isinstance(pieces, list) or not pieces:
        raise SpecError("inline map needs a nonempty 'pieces' list", location)
    compiled = []
    for i, piece in enumerate(pieces):
        loc = f"{location}:pieces[{i}]"
        try:
            lo, hi = float(piece["lo"]), float(piece["hi"])
        except (KeyError, TypeError, ValueError):
            raise SpecError("piece needs numeric lo/hi", loc) from None
        kind = piece.get("kind")
        if kind not in _PIECE_KINDS:
            raise SpecError(f"piece kind must be one of {_PIECE_KINDS}", loc)
        if kind == "const":
            v = float(piece.get("value", 0.0))
            fn = lambda _x, v=v: v
        elif kind == "affine":
            a, b = float(piece.get("a", 1.0)), float(piece.get("b", 0.0))
            fn = lambda x, a=a, b=b: a * x + b
        else:
            scale = float(piece.get("scale", 1.0))
            fn = lambda x, s=scale: s * math.sqrt(abs(x))
        compiled.append((lo, hi, fn))
    compiled.sort(key=lambda p: (p[0], p[1]))
    dom_lo = compiled[0][0]
    dom_hi = max(p[1] for p in compiled)

    def ev(x: float) -> IntervalUnion:
        for lo, hi, fn in compiled:
            if lo <= x <= hi:
                return IntervalUnion.singleton(fn(x))
        return IntervalUnion.empty()

    m = SetValuedMap(
        label=str(defn.get("label", "inline")),
        eval_fn=ev,
        domain=ClosedInterval(dom_lo, dom_hi),
        anchors=tuple(float(a) for a in defn.get("anchors", ())),
    )
    _validate_inline(m, location, seed)
    return m


def _validate_inline(m: SetValuedMap, location: str, seed: int | None) -> None:
    rng = np.random.default_rng(0 if seed is None else seed)
    lo = m.domain.lo if math.isfinite(m.domain.lo) else -1.0
    hi = m.domain.hi if math.isfinite(m.domain.hi) else 1.0
    window = ClosedInterval(lo, hi)
    step = (hi - lo) / 256
    for x in rng.uniform(lo, hi, size=8):
        val = m.eval(float(x))
        if val.is_empty:
            raise SpecError(f"inline map has no value at x={x!r}", location)
        y = val.nearest_point(0.0)
        back = m.inverse_eval(y, window=window, resolution=256)
        if back.distance(float(x)) > 2.0 * step:
            raise SpecError(
                f"inline map failed graph-consistency sampling at x={x!r}", location
            )


def _resolve_map(spec: ExperimentSpec, seed: int | None):
    """Returns (map, base_point, potential)."""
    ref = spec.map_ref
    if isinstance(ref, str):
        entry = get_entry(ref)
        return entry.map, entry.base_point, entry.potential
    if isinstance(ref, dict) and "inline" in ref:
        m = build_inline_map(ref["inline"], "map.inline", seed)
        base = ref.get("base", [0.0, 0.0])
        return m, (float(base[0]), float(base[1])), None
    raise SpecError("map must be a catalog id or {inline: {...}}", "map")


def build_inline_smooth(defn: dict, location: str) -> SmoothMap:
    kind = defn.get("kind", "poly")
    if kind == "linear":
        slope = float(defn.get("slope", 1.0))
        return SmoothMap(
            lambda x, s=slope: s * x, lambda _x, s=slope: s, label=f"linear({slope:g})"
        )
    if kind == "poly":
        coeffs = [float(c) for c in defn.get("coeffs", [0.0])]

        def val(x: float, c=tuple(coeffs)) -> float:
            acc = 0.0
            for a in reversed(c):
                acc = acc * x + a
            return acc

        def der(x: float, c=tuple(coeffs)) -> float:
            acc = 0.0
            for i in range(len(c) - 1, 0, -1):
                acc = acc * x + i * c[i]
            return acc

        return SmoothMap(val, der, label=f"poly{coeffs!r}")
    raise SpecError(f"smooth map kind must be linear or poly, got {kind!r}", location)


def _resolve_equation(spec: ExperimentSpec, seed: int | None) -> GeneralizedEquation:
    ref = spec.equation_ref
    if isinstance(ref, str):
        eqs = equation_catalog()
        if ref not in eqs:
            raise SpecError(
                f"unknown equation id {ref!r}; known: {', '.join(eqs)}", "equation"
            )
        return eqs[ref]
    if isinstance(ref, dict):
        g = build_inline_smooth(ref.get("g", {}), "equation:g")
        m, _, _ = _resolve_map(
            ExperimentSpec("estimate", ref.get("F"), None, {}, "", "csv"), seed
        )
        hint = ref.get("solution_hint")
        return GeneralizedEquation(g, m, None if hint is None else float(hint))
    raise SpecError("equation must be a catalog id or inline mapping", "equation")


def _parse_grid(params: dict, default_radius: float = 0.25) -> GridSpec:
    g = params.get("grid", {})
    if not isinstance(g, dict):
        raise SpecError("grid must be a mapping", "parameters:grid")
    return GridSpec(
        radius=float(g.get("radius", params.get("radius", default_radius))),
        points_per_decade=int(g.get("points_per_decade", 40)),
        decades=int(g.get("decades", 6)),
        symmetric=bool(g.get("symmetric", True)),
    )


def _parse_schedule(params: dict) -> OperatorSchedule:
    sched = params.get("schedule", "newton")
    if isinstance(sched, str):
        named = schedule_catalog()
        if sched not in named:
            raise SpecError(
                f"unknown schedule {sched!r}; known: {', '.join(named)}",
                "parameters:schedule",
            )
        return named[sched]
    if isinstance(sched, dict):
        kind = sched.get("kind")
        if kind == "newton":
            return OperatorSchedule.newton()
        if kind == "chord":
            return OperatorSchedule.chord(float(sched["b0"]))
        if kind == "broyden":
            return OperatorSchedule.broyden(float(sched["b0"]))
        if kind == "explicit":
            name = sched.get("name")
            named = schedule_catalog()
            if name not in named:
                raise SpecError(
                    f"explicit schedules must name a catalog schedule, got {name!r}",
                    "parameters:schedule",
                )
            return named[name]
        raise SpecError(f"unknown schedule kind {kind!r}", "parameters:schedule")
    raise SpecError("schedule must be a name or mapping", "parameters:schedule")


# --------------------------------------------------------------------------
# run results and writers


@dataclass(frozen=True)
class RunResult:
    spec: ExperimentSpec
    verdict: str
    exit_code: int
    tables: dict[str, tuple[list[str], list[tuple]]]
    metadata: dict
    wall_clock: float


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_field(v: Any) -> str:
    s = _fmt(v)
    if "," in s or '"' in s or "\n" in s:
        s = '"' + s.replace('"', '""') + '"'
    return s


def _table_csv(header: list[str], rows: list[tuple]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_field(v) for v in row))
    return "\n".join(lines) + "\n"


def _table_json(header: list[str], rows: list[tuple]) -> str:
    payload = [
        {h: (format(v, ".17g") if isinstance(v, float) else v) for h, v in zip(header, row)}
        for row in rows
    ]
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


def write_result(result: RunResult, out_dir: str | Path | None = None) -> list[Path]:
    """Write all tables plus a deterministic result summary; returns paths."""
    base = Path(result.spec.out_path)
    if out_dir is not None:
        base = Path(out_dir) / base.name
    fmt = result.spec.out_format
    written = []
    names = list(result.tables.keys())
    for name in names:
        header, rows = result.tables[name]
        if name == "primary":
            path = base
        else:
            path = base.with_name(f"{base.stem}.{name}{base.suffix}")
        text = _table_csv(header, rows) if fmt == "csv" else _table_json(header, rows)
        _write_atomic(path, text)
        written.append(path)
    summary = {
        "spec": result.spec.raw,
        "verdict": result.verdict,
        "exit_code": result.exit_code,
        "tool_version": __version__,
        "metadata": result.metadata,
    }
    spath = base.with_name(f"{base.stem}.result.json")
    _write_atomic(spath, json.dumps(summary, indent=1, sort_keys=True, default=str) + "\n")
    written.append(spath)
    return written


# --------------------------------------------------------------------------
# dispatch


def run(spec: ExperimentSpec, seed: int | None = None) -> RunResult:
    """Execute one experiment spec (no file output; see write_result)."""
    t0 = time.perf_counter()
    handler = _HANDLERS[spec.kind]
    verdict, exit_code, tables, metadata = handler(spec, seed)
    wall = time.perf_counter() - t0
    metadata = {"tool_version": __version__, **metadata}
    return RunResult(spec, verdict, exit_code, tables, metadata, wall)


def _estimate_meta(est) -> dict:
    return {
        "modulus": _fmt(est.modulus),
        "witness": _fmt(est.witness),
        "n_points": est.n_points,
        "excluded_points": est.excluded_points,
        "truncation_active": est.truncation_active,
        "inverse_approximate": est.inverse_approximate,
        "radius": _fmt(est.radius),
    }


def _run_estimate(spec: ExperimentSpec, seed):
    m, base, _ = _resolve_map(spec, seed)
    p = spec.parameters
    q = float(p.get("q", 1.0))
    grid = _parse_grid(p, default_radius=1.0)
    strong = bool(p.get("strong", True))
    if strong:
        est = estimate_strong_subreg_modulus(m, base, q, grid, keep_table=True)
    else:
        window = None
        if "search_window" in p:
            w = p["search_window"]
            window = ClosedInterval(float(w[0]), float(w[1]))
        est = estimate_subreg_modulus(m, base, q, grid, window=window, keep_table=True)
    t = est.table
    rows = list(
        zip(
            (float(v) for v in t["x"]),
            (float(v) for v in t["numerator"]),
            (float(v) for v in t["denominator"]),
            (float(v) for v in t["ratio"]),
        )
    )
    verdict = "violation" if est.violation else "pass"
    tables = {"primary": (["x", "numerator", "denominator", "ratio"], rows)}
    return verdict, (1 if est.violation else 0), tables, _estimate_meta(est)


def _run_order_scan(spec: ExperimentSpec, seed):
    m, base, _ = _resolve_map(spec, seed)
    p = spec.parameters
    q_list = [float(q) for q in p.get("q_list", [1.0, 2.0])]
    radii = [float(r) for r in p.get("radii", [10.0**-i for i in range(1, 7)])]
    grid = _parse_grid(p, default_radius=radii[0])
    rep = order_scan(m, base, q_list, radii, grid, strong=bool(p.get("strong", True)))
    rows = [(r.q, r.radius, r.eta_hat, rep.verdicts[r.q]) for r in rep.rows]
    tables = {"primary": (["q", "radius", "eta_hat", "verdict"], rows)}
    meta = {
        "verdicts": {str(q): v for q, v in rep.verdicts.items()},
        "q_star_range": [None if v is None else _fmt(v) for v in rep.q_star_range],
    }
    return "completed", 0, tables, meta


def _run_growth_check(spec: ExperimentSpec, seed):
    m, base, potential = _resolve_map(spec, seed)
    if potential is None:
        raise SpecError(
            "growth-check needs a subdifferential catalog map with a potential", "map"
        )
    p = spec.parameters
    variant = p.get("variant", "lower")
    q = float(p.get("q", 2.0))
    eta = float(p.get("eta", 0.5))
    xbar, xstar = base[0], float(p.get("target_subgradient", base[1]))
    if variant == "lower":
        alpha = float(p.get("alpha", 1.0))
        res = growth_check_lower(
            potential, m.inverse_eval(xstar), xbar, xstar, q, alpha, eta, keep_rows=True
        )
        rows = list(res.rows)
        tables = {"primary": (["x", "lhs", "rhs", "margin"], rows)}
        meta = {"margin": _fmt(res.margin), "witness": _fmt(res.witness)}
        return ("pass" if res.passed else "fail"), (0 if res.passed else 1), tables, meta
    if variant == "pairwise":
        beta = float(p.get("beta", 0.5))
        res = growth_check_pairwise(potential, m, xbar, xstar, q, beta, eta)
        v = res.first_violation
        rows = []
        if v is not None:
            rows.append((v.u, v.x, v.xstar_at_x, v.margin))
        tables = {"primary": (["u", "x", "xstar", "margin"], rows)}
        meta = {
            "min_margin": _fmt(res.min_margin),
            "n_pairs": res.n_pairs,
            "n_violations": res.n_violations,
        }
        return ("pass" if res.passed else "fail"), (0 if res.passed else 1), tables, meta
    raise SpecError(f"growth-check variant must be lower or pairwise, got {variant!r}", "parameters")


def _run_mr_probe(spec: ExperimentSpec, seed):
    m, base, _ = _resolve_map(spec, seed)
    p = spec.parameters
    grid = _parse_grid(p, default_radius=0.2)
    radii = [float(r) for r in p["radii"]] if "radii" in p else None
    sequences = None
    if "sequences" in p:
        sequences = {
            str(name): ([float(v) for v in s["x"]], [float(v) for v in s["y"]])
            for name, s in p["sequences"].items()
        }
    rep = metric_regularity_probe(m, base, grid=grid, radii=radii, sequences=sequences)
    rows = [(r, k, wx, wy) for (r, k, wx, wy) in rep.kappa_table]
    tables: dict = {"primary": (["radius", "kappa_hat", "witness_x", "witness_y"], rows)}
    for name, seq_rows in rep.sequence_tables.items():
        tables[f"seq-{name}"] = (
            ["index", "x", "y", "quotient"],
            [(r.index, r.x, r.y, r.quotient) for r in seq_rows],
        )
    if rep.qmap_table:
        tables["qmap-sequences"] = (
            ["k", "alpha_k", "dist_perturbed", "dist_at_step", "quotient"],
            [(r.k, r.alpha_k, r.dist_perturbed, r.dist_at_step, r.quotient) for r in rep.qmap_table],
        )
    return rep.verdict, 0, tables, {"verdict": rep.verdict}


def _run_perturb_check(spec: ExperimentSpec, seed):
    m, base, _ = _resolve_map(spec, seed)
    p = spec.parameters
    q = float(p.get("q", 2.0))
    grid = _parse_grid(p, default_radius=1.0)
    g = build_inline_smooth(p.get("g", {"kind": "linear", "slope": 0.1}), "parameters:g")
    lam = float(p.get("lam", p.get("lambda", 0.1)))
    if "kappa" in p:
        kappa = float(p["kappa"])
    else:
        base_est = estimate_strong_subreg_modulus(m, base, q, grid)
        kappa = base_est.modulus * float(p.get("kappa_factor", 1.05))
    rep = perturbation_bound_check(m, g, base, q, kappa, lam, grid)
    rows = [
        (
            lam,
            kappa,
            rep.perturbed_estimate.modulus,
            rep.bound,
            rep.guaranteed_radius,
            "yes" if rep.satisfied else "no",
        )
    ]
    tables = {
        "primary": (
            ["lam", "kappa", "eta_perturbed", "bound", "guaranteed_radius", "satisfied"],
            rows,
        )
    }
    meta = {
        "satisfied": rep.satisfied,
        "lip_estimate": _fmt(rep.lip_estimate),
        "kappa_covers_estimate": rep.kappa_covers_estimate,
        "lambda_covers_lip": rep.lambda_covers_lip,
    }
    return ("pass" if rep.satisfied else "fail"), (0 if rep.satisfied else 1), tables, meta


def _run_param_check(spec: ExperimentSpec, seed):
    m, base, _ = _resolve_map(spec, seed)
    p = spec.parameters
    q = float(p.get("q", 2.0))
    grid = _parse_grid(p, default_radius=0.25)
    g = build_inline_smooth(p.get("g", {"kind": "poly", "coeffs": [0, 0, 1]}), "parameters:g")
    lam_target = float(p.get("lambda_target", 1.3))
    u_radius = float(p.get("u_radius", 0.1))
    n_u = int(p.get("n_u", 21))
    eq_grid = None
    if "equivalence_grid" in p:
        eg = p["equivalence_grid"]
        eq_grid = GridSpec(
            float(eg.get("radius", 1e-3)),
            int(eg.get("points_per_decade", 40)),
            int(eg.get("decades", 6)),
        )
    rep = parameterized_check(
        m, g, base, q, lam_target, u_radius, grid, n_u=n_u, equivalence_grid=eq_grid
    )
    rows = [(u, est.modulus, est.witness) for u, est in zip(rep.us, rep.moduli)]
    tables = {"primary": (["u", "modulus", "witness"], rows)}
    ok = rep.all_within_target and rep.equivalence_within
    meta = {
        "all_within_target": rep.all_within_target,
        "worst_modulus": _fmt(rep.worst_modulus),
        "equivalence_agree": rep.equivalence_agree,
        "moduli_rel_gap": _fmt(rep.moduli_rel_gap),
    }
    return ("pass" if ok else "fail"), (0 if ok else 1), tables, meta


def _run_solve(spec: ExperimentSpec, seed):
    eq = _resolve_equation(spec, seed)
    p = spec.parameters
    x0 = float(p.get("x0", 0.0))
    schedule = _parse_schedule(p)
    cfg = SolveConfig(
        max_iter=int(p.get("max_iter", 30)),
        tol=float(p.get("tol", 1e-12)),
        window=(
            ClosedInterval(float(p["window"][0]), float(p["window"][1]))
            if "window" in p
            else None
        ),
    )
    trace = solve(eq, x0, schedule, cfg)
    orders: dict[int, float] = {}
    dm: tuple[float, ...] = ()
    if eq.solution_hint is not None and len(trace) >= 4:
        try:
            rr = rate_analysis(trace, eq.solution_hint)
            orders = rr.pointwise_orders
            dm = rr.dennis_more_ratios
        except SubregLabError:
            pass
    rows = []
    for i, (x, r) in enumerate(zip(trace.iterates, trace.residuals)):
        k = i + 1
        b = trace.operators[i] if i < len(trace.operators) else ""
        qk = orders.get(k, "")
        dmr = dm[i] if i < len(dm) else ""
        rows.append((k, x, r, b, qk, dmr))
    tables = {"primary": (["k", "x_k", "residual", "B_k", "q_k", "dm_ratio"], rows)}
    ok = trace.status == "converged"
    meta = {"status": trace.status, "n_iterates": len(trace), "schedule": trace.schedule_name}
    return trace.status, (0 if ok else 1), tables, meta


_HANDLERS = {
    "estimate": _run_estimate,
    "order-scan": _run_order_scan,
    "growth-check": _run_growth_check,
    "mr-probe": _run_mr_probe,
    "perturb-check": _run_perturb_check,
    "param-check": _run_param_check,
    "solve": _run_solve,
}


# --------------------------------------------------------------------------
# replicate-all output


def write_matrix(summary: ReplicationSummary, out_dir: str | Path, fmt: str = "csv") -> Path:
    rows = summary.matrix_rows()
    header = ["criterion", "status", "detail"]
    path = Path(out_dir) / ("matrix.csv" if fmt == "csv" else "matrix.json")
    text = _table_csv(header, rows) if fmt == "csv" else _table_json(header, rows)
    _write_atomic(path, text)
    return path


def run_replicate_all(out_dir: str | Path | None = None, fmt: str = "csv", threads: int = 1):
    summary = replicate_all(threads=threads)
    path = None
    if out_dir is not None:
        path = write_matrix(summary, out_dir, fmt)
    return summary, path
