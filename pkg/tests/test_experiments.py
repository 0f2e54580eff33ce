import json
import math

import numpy as np
import pytest
import yaml

import subreglab.maps
from subreglab.cli import main as cli_main
from subreglab.errors import SpecError
from subreglab.experiments import (
    build_inline_map,
    build_inline_smooth,
    load_spec,
    parse_spec,
    run,
    run_replicate_all,
    write_result,
)
from subreglab.replication import CRITERIA, replicate_all


def _write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return p


ESTIMATE_DOC = {
    "kind": "estimate",
    "map": "sqrt-abs",
    "parameters": {
        "q": 2.0,
        "strong": True,
        "grid": {"radius": 1.0, "points_per_decade": 100, "decades": 6},
    },
    "output": {"path": "est.csv", "format": "csv"},
}

SOLVE_DOC = {
    "kind": "solve",
    "equation": "example-5-2",
    "parameters": {"x0": 0.5, "schedule": "example-5-2"},
    "output": {"path": "trace.csv", "format": "csv"},
}


class TestSpecParsing:
    def test_valid_estimate(self):
        spec = parse_spec(ESTIMATE_DOC)
        assert spec.kind == "estimate" and spec.map_ref == "sqrt-abs"

    def test_bad_kind(self):
        with pytest.raises(SpecError) as e:
            parse_spec({"kind": "frobnicate"})
        assert "kind" in e.value.location

    def test_unknown_catalog_id(self):
        with pytest.raises(SpecError):
            parse_spec({"kind": "estimate", "map": "no-such-map"})

    def test_missing_map(self):
        with pytest.raises(SpecError):
            parse_spec({"kind": "estimate"})

    def test_solve_needs_equation(self):
        with pytest.raises(SpecError):
            parse_spec({"kind": "solve"})

    def test_bad_output_format(self):
        doc = dict(ESTIMATE_DOC, output={"path": "x.csv", "format": "xml"})
        with pytest.raises(SpecError):
            parse_spec(doc)

    def test_load_spec_rejects_bad_yaml(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("kind: [unclosed")
        with pytest.raises(SpecError):
            load_spec(p)

    def test_malformed_spec_fuzz(self):
        # deleting or corrupting required keys must raise SpecError, never crash
        rng = np.random.default_rng(20260810)
        mutations = [
            lambda d: {k: v for k, v in d.items() if k != "kind"},
            lambda d: dict(d, kind=42),
            lambda d: dict(d, parameters="not-a-mapping"),
            lambda d: dict(d, output=[1, 2]),
            lambda d: dict(d, map={"no-inline": {}}),
            lambda d: {k: v for k, v in d.items() if k != "map"},
        ]
        for _ in range(60):
            doc = dict(ESTIMATE_DOC)
            mut = mutations[int(rng.integers(0, len(mutations)))]
            bad = mut(doc)
            with pytest.raises(SpecError):
                spec = parse_spec(bad)
                run(spec)


class TestInlineDefinitions:
    def test_inline_abs_map(self):
        m = build_inline_map(
            {
                "pieces": [
                    {"lo": -1.0, "hi": 0.0, "kind": "affine", "a": -1.0, "b": 0.0},
                    {"lo": 0.0, "hi": 1.0, "kind": "affine", "a": 1.0, "b": 0.0},
                ],
                "anchors": [0.0],
                "label": "abs",
            },
            "map.inline",
        )
        assert m.eval(0.5).parts[0].lo == 0.5
        assert m.eval(-0.5).parts[0].lo == 0.5

    def test_inline_estimate_spec(self):
        doc = {
            "kind": "estimate",
            "map": {
                "inline": {
                    "pieces": [
                        {"lo": -1.0, "hi": 0.0, "kind": "affine", "a": -1.0},
                        {"lo": 0.0, "hi": 1.0, "kind": "affine", "a": 1.0},
                    ]
                },
                "base": [0.0, 0.0],
            },
            "parameters": {"q": 1.0, "grid": {"radius": 0.5, "points_per_decade": 20, "decades": 4}},
            "output": {"path": "inline.csv"},
        }
        result = run(parse_spec(doc))
        assert result.verdict == "pass"
        assert float(result.metadata["modulus"]) == 1.0

    def test_inline_requires_pieces(self):
        with pytest.raises(SpecError):
            build_inline_map({"pieces": []}, "x")

    def test_inline_bad_piece_kind(self):
        with pytest.raises(SpecError):
            build_inline_map({"pieces": [{"lo": 0, "hi": 1, "kind": "cubic"}]}, "x")

    def test_inline_smooth_poly(self):
        g = build_inline_smooth({"kind": "poly", "coeffs": [1.0, 0.0, 2.0]}, "g")
        assert g.value(3.0) == 19.0
        assert g.derivative(3.0) == 12.0

    def test_inline_smooth_linear(self):
        g = build_inline_smooth({"kind": "linear", "slope": 0.25}, "g")
        assert g.value(8.0) == 2.0 and g.derivative(1.0) == 0.25


class TestRunAndWrite:
    def test_estimate_run(self, tmp_path):
        result = run(parse_spec(ESTIMATE_DOC))
        assert result.verdict == "pass" and result.exit_code == 0
        header, rows = result.tables["primary"]
        assert header == ["x", "numerator", "denominator", "ratio"]
        assert len(rows) == 1202
        paths = write_result(result, tmp_path)
        assert (tmp_path / "est.csv").exists()
        assert (tmp_path / "est.result.json").exists()
        summary = json.loads((tmp_path / "est.result.json").read_text())
        assert summary["verdict"] == "pass"
        assert summary["tool_version"]

    def test_estimate_csv_deterministic(self, tmp_path):
        spec = parse_spec(ESTIMATE_DOC)
        write_result(run(spec), tmp_path / "a")
        write_result(run(spec), tmp_path / "b")
        assert (tmp_path / "a" / "est.csv").read_bytes() == (tmp_path / "b" / "est.csv").read_bytes()

    def test_solve_trace_csv(self, tmp_path):
        result = run(parse_spec(SOLVE_DOC))
        assert result.exit_code == 0 and result.verdict == "converged"
        write_result(result, tmp_path)
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        assert lines[0] == "k,x_k,residual,B_k,q_k,dm_ratio"
        row4 = lines[4].split(",")
        assert int(row4[0]) == 4
        assert float(row4[1]) == math.ldexp(1.0, -24)
        assert float(row4[4]) == 5.0  # pointwise order between k=4 and k=5

    def test_growth_check_violation_exit_code(self, tmp_path):
        doc = {
            "kind": "growth-check",
            "map": "subdiff-sqrt",
            "parameters": {"variant": "pairwise", "q": 2.0, "beta": 1.0, "eta": 1.0},
            "output": {"path": "growth.csv"},
        }
        result = run(parse_spec(doc))
        assert result.exit_code == 1 and result.verdict == "fail"
        header, rows = result.tables["primary"]
        assert header == ["u", "x", "xstar", "margin"]
        assert len(rows) == 1 and rows[0][3] < 0

    def test_order_scan_table_contract(self):
        doc = {
            "kind": "order-scan",
            "map": "sqrt-abs",
            "parameters": {
                "q_list": [1.0, 2.5],
                "radii": [0.1, 0.01, 0.001],
                "grid": {"points_per_decade": 20, "decades": 3},
            },
            "output": {"path": "scan.csv"},
        }
        result = run(parse_spec(doc))
        header, rows = result.tables["primary"]
        assert header == ["q", "radius", "eta_hat", "verdict"]
        assert len(rows) == 6
        assert result.metadata["verdicts"]["1.0"] == "bounded"

    def test_mr_probe_qmap_tables(self, tmp_path):
        doc = {
            "kind": "mr-probe",
            "map": "Q-map",
            "parameters": {"grid": {"radius": 0.2, "points_per_decade": 6, "decades": 3}},
            "output": {"path": "probe.csv"},
        }
        result = run(parse_spec(doc))
        assert result.verdict == "unbounded"
        assert "qmap-sequences" in result.tables
        write_result(result, tmp_path)
        assert (tmp_path / "probe.qmap-sequences.csv").exists()

    def test_perturb_check_spec(self):
        doc = {
            "kind": "perturb-check",
            "map": "sqrt-abs",
            "parameters": {
                "q": 2.0,
                "g": {"kind": "linear", "slope": 0.1},
                "lam": 0.1,
                "kappa_factor": 1.05,
                "grid": {"radius": 1.0, "points_per_decade": 60, "decades": 6},
            },
            "output": {"path": "pert.csv"},
        }
        result = run(parse_spec(doc))
        assert result.verdict == "pass" and result.exit_code == 0

    def test_param_check_spec(self):
        doc = {
            "kind": "param-check",
            "map": "sqrt-abs",
            "parameters": {
                "q": 2.0,
                "g": {"kind": "poly", "coeffs": [0.0, 0.0, 1.0]},
                "lambda_target": 1.3,
                "u_radius": 0.1,
                "grid": {"radius": 0.25, "points_per_decade": 40, "decades": 5},
                "equivalence_grid": {"radius": 0.001, "points_per_decade": 40, "decades": 5},
            },
            "output": {"path": "param.csv"},
        }
        result = run(parse_spec(doc))
        assert result.verdict == "pass" and result.exit_code == 0

    def test_json_output(self, tmp_path):
        doc = dict(SOLVE_DOC, output={"path": "trace.json", "format": "json"})
        result = run(parse_spec(doc))
        write_result(result, tmp_path)
        payload = json.loads((tmp_path / "trace.json").read_text())
        assert payload[0]["k"] == 1


class TestCLI:
    def test_run_verb(self, tmp_path):
        spec = _write(tmp_path, "est.yaml", ESTIMATE_DOC)
        code = cli_main(["run", str(spec), "--out-dir", str(tmp_path / "out")])
        assert code == 0
        assert (tmp_path / "out" / "est.csv").exists()

    def test_run_verb_threads(self, tmp_path):
        s1 = _write(tmp_path, "a.yaml", ESTIMATE_DOC)
        s2 = _write(tmp_path, "b.yaml", dict(SOLVE_DOC, output={"path": "b.csv", "format": "csv"}))
        code = cli_main(
            ["run", str(s1), str(s2), "--out-dir", str(tmp_path / "out"), "--threads", "2"]
        )
        assert code == 0

    def test_run_verb_bad_spec_exits_2(self, tmp_path):
        spec = _write(tmp_path, "bad.yaml", {"kind": "nope"})
        assert cli_main(["run", str(spec)]) == 2

    def test_run_verb_failing_check_exits_1(self, tmp_path):
        doc = {
            "kind": "growth-check",
            "map": "subdiff-sqrt",
            "parameters": {"variant": "pairwise", "q": 2.0, "beta": 1.0, "eta": 1.0},
            "output": {"path": "g.csv"},
        }
        spec = _write(tmp_path, "g.yaml", doc)
        assert cli_main(["run", str(spec), "--out-dir", str(tmp_path)]) == 1

    def test_catalog_list(self, capsys):
        assert cli_main(["catalog", "list"]) == 0
        out = capsys.readouterr().out
        assert "sqrt-abs" in out and "Q-map" in out

    def test_catalog_describe(self, capsys):
        assert cli_main(["catalog", "describe", "S-map"]) == 0
        out = capsys.readouterr().out
        assert "base point" in out

    def test_catalog_describe_unknown(self):
        assert cli_main(["catalog", "describe", "nope"]) == 2


class TestReplicateAll:
    def test_all_pass_and_matrix_contract(self, tmp_path):
        summary, path = run_replicate_all(out_dir=tmp_path)
        assert summary.all_passed
        names = [r.name for r in summary.results]
        assert "Ex3.3-strong-2-subreg" in names
        assert "Thm4.1-bound" in names
        text = path.read_text()
        assert text.startswith("criterion,status,detail")

    def test_tampered_branch_constant_fails_ex33(self, monkeypatch):
        # negative control: corrupting the staircase step base must be caught
        monkeypatch.setattr(
            subreglab.maps, "STEP_BASE", subreglab.maps.STEP_BASE * 1.2
        )
        by_name = dict(CRITERIA)
        tampered = by_name["Ex3.3-strong-2-subreg"]()
        assert not tampered.passed
        summary = replicate_all()
        assert not summary.all_passed

    def test_cli_replicate_all(self, tmp_path, capsys):
        code = cli_main(["replicate-all", "--out-dir", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert "18/18 criteria passed" in out
        assert (tmp_path / "matrix.csv").exists()
