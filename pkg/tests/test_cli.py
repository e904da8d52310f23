import filecmp
import json
import os

import pytest

from crsphere.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OBSTRUCTION, EXIT_OK, RunConfig, main, parse_sweep
from crsphere.errors import ConfigError


def run(*argv):
    return main(list(argv))


@pytest.fixture()
def pert_file(tmp_path):
    path = tmp_path / "pert.json"
    path.write_text(json.dumps({
        "label": "test", "epsilon": 0.05,
        "terms": [{"p": 1, "q": 1, "index": 0, "coeff": 1.0}],
    }))
    return str(path)


@pytest.fixture()
def plh_file(tmp_path):
    path = tmp_path / "plh.json"
    path.write_text(json.dumps({
        "label": "pluriharmonic", "terms": [],
        "qdata_terms": [
            {"p": 1, "q": 0, "index": 0, "coeff": "1"},
            {"p": 0, "q": 1, "index": 0, "coeff": "1"},
        ],
    }))
    return str(path)


class TestRunConfig:
    def test_round_trip(self):
        cfg = RunConfig(command="spectrum", n=2, degree=5, mode="float", sweep="4..8")
        assert RunConfig.from_dict(cfg.to_dict()) == cfg

    def test_validation(self):
        with pytest.raises(ConfigError):
            RunConfig(command="basis", n=0)
        with pytest.raises(ConfigError):
            RunConfig(command="basis", mode="both")
        with pytest.raises(ConfigError):
            RunConfig(command="basis", obstruction_tol=-1.0)

    def test_parse_sweep(self):
        assert parse_sweep("10..16") == [10, 12, 14, 16]
        assert parse_sweep("1..3:1") == [1, 2, 3]
        assert parse_sweep("8,12,10") == [8, 10, 12]
        assert parse_sweep(None) is None


class TestCommands:
    def test_basis_cache_idempotent(self, tmp_path, capsys):
        cache = str(tmp_path / "cache")
        out = str(tmp_path / "out")
        assert run("basis", "--n", "1", "--degree", "4", "--cache", cache, "--out", out) == EXIT_OK
        first = capsys.readouterr().out
        assert "built" in first
        assert run("basis", "--n", "1", "--degree", "4", "--cache", cache, "--out", out) == EXIT_OK
        second = capsys.readouterr().out
        assert "cache hit" in second
        report = json.loads((tmp_path / "out" / "basis_report.json").read_text())
        assert report["total_dim"] == sum((d + 1) ** 2 for d in range(5))
        assert report["dim_formula_check"]

    def test_spectrum_eigentable_row(self, tmp_path):
        out = str(tmp_path / "out")
        assert run("spectrum", "--n", "1", "--degree", "4", "--out", out) == EXIT_OK
        lines = (tmp_path / "out" / "eigentable_n1_N4.csv").read_text().splitlines()
        assert lines[0] == "p,q,dim,lambda_deltab,lambda_iT,lambda_P"
        assert "1,1,3,8,0,16" in lines

    def test_spectrum_matrix_matches_diagonal_at_zero(self, tmp_path):
        pert = tmp_path / "zero.json"
        pert.write_text(json.dumps({"epsilon": 0.0, "terms": [
            {"p": 1, "q": 1, "index": 0, "coeff": 1.0}]}))
        out = str(tmp_path / "out")
        assert run("spectrum", "--n", "1", "--degree", "4",
                   "--perturbation", str(pert), "--out", out) == EXIT_OK
        rows = (tmp_path / "out" / "matrix_spectrum_n1_N4.csv").read_text().splitlines()[1:]
        eigs = sorted(float(r.split(",")[1]) for r in rows)
        from crsphere.parametrix import spectrum_diagonal
        from crsphere.spectral import Truncation, critical_gjms

        expected = spectrum_diagonal(critical_gjms(Truncation(1, 4))).eigenvalues
        assert max(abs(a - b) for a, b in zip(eigs, expected)) < 1e-12

    def test_spectrum_sweep_emits_summary(self, tmp_path):
        out = str(tmp_path / "out")
        assert run("spectrum", "--n", "1", "--degree", "4", "--sweep", "4..6",
                   "--out", out) == EXIT_OK
        summary = json.loads((tmp_path / "out" / "stability_summary.json").read_text())
        assert [s["N"] for s in summary["sweep"]] == [4, 6]
        assert summary["max_relative_decrease_from_first"] <= 0.0 + 1e-12

    def test_parametrix_check(self, tmp_path, pert_file):
        out = str(tmp_path / "out")
        assert run("parametrix-check", "--n", "1", "--degree", "6",
                   "--perturbation", pert_file, "--out", out) == EXIT_OK
        diag = json.loads((tmp_path / "out" / "parametrix_diagonal.json").read_text())
        assert diag["PG_plus_Pi_minus_I_sup"] == "0"
        assert diag["R0_rank"] == 1
        mat = json.loads((tmp_path / "out" / "parametrix_matrix.json").read_text())
        assert mat["A0_method"] == "direct_inverse"
        assert mat["PG_plus_Pi_minus_I_interior"] <= 1e-8

    def test_qcurv_flow(self, tmp_path, pert_file):
        out = str(tmp_path / "out")
        assert run("qcurv", "compute", "--n", "1", "--degree", "8",
                   "--perturbation", pert_file, "--out", out) == EXIT_OK
        comp = json.loads((tmp_path / "out" / "qcurv_compute.json").read_text())
        assert comp["total_q_vanishes"]
        assert run("qcurv", "check", "--n", "1", "--degree", "8",
                   "--perturbation", pert_file, "--out", out) == EXIT_OK
        assert run("qcurv", "solve", "--n", "1", "--degree", "8",
                   "--perturbation", pert_file, "--out", out) == EXIT_OK
        solve = json.loads((tmp_path / "out" / "qcurv_solve.json").read_text())
        assert solve["solvable"] and solve["residual"] <= 1e-8
        assert (tmp_path / "out" / "upsilon_sol.csv").exists()

    def test_qcurv_obstruction_exit_code(self, tmp_path, plh_file):
        out = str(tmp_path / "out")
        assert run("qcurv", "check", "--n", "1", "--degree", "6",
                   "--perturbation", plh_file, "--out", out) == EXIT_OBSTRUCTION
        assert run("qcurv", "solve", "--n", "1", "--degree", "6",
                   "--perturbation", plh_file, "--out", out) == EXIT_OBSTRUCTION

    def test_selftest(self, tmp_path):
        out = str(tmp_path / "out")
        assert run("heisenberg-selftest", "--n", "1", "--out", out) == EXIT_OK
        rep = json.loads((tmp_path / "out" / "heisenberg_selftest.json").read_text())
        assert rep["passed"]
        assert {r["name"] for r in rep["runs"][0]["identities"]} >= {
            "group_axioms", "commutation_relation", "kohn_identity",
            "levi_normalization", "adjoint_rules", "pbw_soundness",
        }
        # the serialized model operators round-trip
        from crsphere.heisenberg import LeftInvariantOp, box_b

        op = LeftInvariantOp.from_jsonable(rep["runs"][0]["operators"]["box_b"])
        assert op == box_b(1)

    def test_bad_config_exit_code(self, tmp_path):
        assert run("basis", "--n", "0", "--out", str(tmp_path / "o")) == EXIT_CONFIG
        assert run("qcurv", "check", "--n", "1", "--degree", "4",
                   "--perturbation", str(tmp_path / "missing.json"),
                   "--out", str(tmp_path / "o2")) == EXIT_CONFIG


class TestDeterminismAndManifest:
    def _emit(self, tmp_path, name):
        out = str(tmp_path / name)
        code = run("spectrum", "--n", "1", "--degree", "5", "--mode", "exact",
                   "--seed", "3", "--out", out)
        assert code == EXIT_OK
        return out

    def test_byte_identical_runs(self, tmp_path):
        out1 = self._emit(tmp_path, "a")
        out2 = self._emit(tmp_path, "b")
        for fname in os.listdir(out1):
            if fname == "manifest.json":
                continue  # carries timestamps by design
            assert filecmp.cmp(
                os.path.join(out1, fname), os.path.join(out2, fname), shallow=False
            ), fname
        # the manifests agree on every hash
        m1 = json.loads((tmp_path / "a" / "manifest.json").read_text())
        m2 = json.loads((tmp_path / "b" / "manifest.json").read_text())
        assert m1["emitted"] == m2["emitted"]

    def test_manifest_lists_every_file(self, tmp_path):
        out = self._emit(tmp_path, "c")
        manifest = json.loads((tmp_path / "c" / "manifest.json").read_text())
        listed = {e["path"] for e in manifest["emitted"]}
        on_disk = {f for f in os.listdir(out) if f != "manifest.json"}
        assert listed == on_disk

    def test_verify_detects_tampering(self, tmp_path):
        out = self._emit(tmp_path, "d")
        assert run("spectrum", "--out", out, "--verify") == EXIT_OK
        target = tmp_path / "d" / "eigentable_n1_N5.csv"
        target.write_text(target.read_text() + "tampered\n")
        assert run("spectrum", "--out", out, "--verify") == EXIT_NUMERICAL

    def test_verify_without_manifest(self, tmp_path):
        assert run("spectrum", "--out", str(tmp_path / "nope"), "--verify") == EXIT_CONFIG
