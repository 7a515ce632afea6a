import importlib.util
import json
from pathlib import Path
from types import SimpleNamespace
from typing import List

import jsonschema
import numpy as np
import pandas as pd
import pytest

import lowdeg
import main
from errors import NoConvergence
from instances import gen_gaussian_null
from matrix_io import write_matrix
from reporting import atomic_write_bytes

ROOT = Path(__file__).resolve().parents[2]
SCHEMA_DIR = ROOT / "schemas"
GOLDEN_DIR = ROOT / "tests" / "fixtures" / "golden"


def _report(path: Path) -> dict:
    return json.loads(path.read_text())


# One small run per subcommand; paths are relative to the run directory.
RUNS = {
    "gen": ["gen", "--kind", "logd-over-alpha2", "--n", "128", "--d", "64", "--alpha", "0.25"]
    + ["--gamma", "1"],
    "spread-check": ["spread-check", "--input", "gauss.sprd", "--m", "3", "--delta", "0.9"]
    + ["--method", "heuristic", "--restarts", "4"],
    "certify": ["certify", "--input", "gauss.sprd", "--delta", "0.9", "--threshold", "2"],
    "kl": ["kl", "--alpha", "0.1", "--lambda", "0.2", "--shift", "1"],
    "fano": ["fano", "--construction", "logd-over-alpha2", "--n", "128", "--d", "64"]
    + ["--alpha", "0.25", "--gamma", "1", "--pairs", "20"],
    "lowdeg": ["lowdeg", "--n", "50", "--rho", "0.2", "--d", "20", "--sigma", "0.2"]
    + ["--degree", "10"],
    "distinguish": ["distinguish", "--n", "200", "--d", "2", "--rho", "0.5", "--sigma", "0"]
    + ["--trials", "10"],
    "regress": ["regress", "--design", "gaussian", "--n", "200", "--d", "2", "--alpha", "0.5"]
    + ["--lambda", "0.5", "--seeds", "3"],
    "spark": ["spark", "--input", "a.sprd", "--m", "2"],
}

# Runs pinned by tests/fixtures/golden/<name>.json.
GOLDEN_RUNS = {
    "gen": ["gen", "--kind", "gaussian", "--n", "64", "--d", "4"],
    "certify": RUNS["certify"],
    "kl": RUNS["kl"],
    "fano": RUNS["fano"],
    "lowdeg": RUNS["lowdeg"],
    "distinguish": RUNS["distinguish"],
    "spark": ["spark", "--input", "a.sprd"],
}


def _load_script(name: str):
    spec = importlib.util.spec_from_file_location(name, ROOT / "scripts" / f"{name}.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def _committed_schema(subcommand: str) -> dict:
    return json.loads((SCHEMA_DIR / f"{subcommand}.schema.json").read_text())


def _run_to(argv: List[str], output: str) -> Path:
    """Run with seed 5 and return the report path."""
    assert main.main(argv + ["--seed", "5", "--output", output]) == main.EXIT_OK
    return Path(output) / "report.json" if argv[0] == "gen" else Path(output)


@pytest.fixture
def run_dir(tmp_path, monkeypatch):
    """Working directory holding the input matrices of RUNS."""
    monkeypatch.chdir(tmp_path)
    (tmp_path / "a.sprd").write_text("SPRD1\n1 3\nrational\n1/1\n1/1\n1/1\n")
    write_matrix(tmp_path / "gauss.sprd", gen_gaussian_null(256, 4, 0))
    return tmp_path


@pytest.mark.integration
class TestFrontDoor:
    """Test suite for the batch command line."""

    def test_kl(self, tmp_path, capsys):
        out = tmp_path / "kl.json"
        argv = ["kl", "--alpha", "0.1", "--lambda", "0.2", "--shift", "1"]
        code = main.main(argv + ["--output", str(out)])
        assert code == main.EXIT_OK
        envelope = _report(out)
        assert envelope["tool"] == "spreadlab"
        assert envelope["subcommand"] == "kl"
        assert envelope["report"]["kl"] == pytest.approx(0.0211365, abs=1e-7)
        assert envelope["report"]["lambda"] == 0.2
        assert "kl:" in capsys.readouterr().out

    def test_deterministic_reports(self, tmp_path):
        outputs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            argv = ["distinguish", "--n", "200", "--d", "2", "--rho", "0.5", "--sigma", "0"]
            assert main.main(argv + ["--trials", "10", "--seed", "5", "--output", str(out)]) == 0
            envelope = _report(out)
            # Only the output path differs between the two runs.
            envelope["config"].pop("output")
            outputs.append(envelope)
        assert outputs[0] == outputs[1]

    def test_malformed_matrix(self, tmp_path, capsys):
        bad = tmp_path / "bad.sprd"
        bad.write_bytes(b"NOPE\n1 1\nfloat64\n")
        out = tmp_path / "report.json"
        code = main.main(["certify", "--input", str(bad), "--delta", "0.9", "--output", str(out)])
        assert code == main.EXIT_INVALID
        assert not out.exists()
        assert "error:" in capsys.readouterr().err

    def test_invalid_parameter(self, tmp_path):
        out = tmp_path / "kl.json"
        code = main.main(["kl", "--alpha", "1.5", "--lambda", "0.2", "--output", str(out)])
        assert code == main.EXIT_INVALID
        assert not out.exists()

    def test_no_convergence_exit(self, tmp_path, monkeypatch):
        def failing(p, seed, output):
            raise NoConvergence("eigen-solver stalled")

        monkeypatch.setitem(main.HANDLERS, "kl", failing)
        out = tmp_path / "kl.json"
        code = main.main(["kl", "--alpha", "0.1", "--lambda", "0.2", "--output", str(out)])
        assert code == main.EXIT_NO_CONVERGENCE
        assert not out.exists()

    def test_exact_arithmetic_failure_exit(self, tmp_path, monkeypatch):
        def failing(p, seed, output):
            raise ArithmeticError("spark witness failed exact verification")

        monkeypatch.setitem(main.HANDLERS, "spark", failing)
        matrix = tmp_path / "a.sprd"
        matrix.write_text("SPRD1\n1 3\nrational\n1/1\n1/1\n1/1\n")
        out = tmp_path / "spark.json"
        code = main.main(["spark", "--input", str(matrix), "--output", str(out)])
        assert code == main.EXIT_NO_CONVERGENCE
        assert not out.exists()

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        out = blocker / "kl.json"
        code = main.main(["kl", "--alpha", "0.1", "--lambda", "0.2", "--output", str(out)])
        assert code == main.EXIT_INVALID
        assert "cannot write" in capsys.readouterr().err

    def test_constant_statistics_report_null_separation(self, tmp_path, monkeypatch):
        def silent_planted(n, d, params, seed):
            return SimpleNamespace(observed=np.zeros((n, d)))

        monkeypatch.setattr(lowdeg, "gen_planted", silent_planted)
        monkeypatch.setattr(lowdeg, "degree4_statistic", lambda A: float(np.any(A)))
        out = tmp_path / "distinguish.json"
        argv = ["distinguish", "--n", "50", "--d", "2", "--rho", "0.5", "--sigma", "0"]
        code = main.main(argv + ["--trials", "10", "--output", str(out)])
        assert code == main.EXIT_OK
        envelope = _report(out)
        assert envelope["report"]["separation"] is None
        jsonschema.Draft202012Validator(_committed_schema("distinguish")).validate(envelope)

    def test_spark_file(self, tmp_path):
        matrix = tmp_path / "a.sprd"
        matrix.write_text("SPRD1\n1 3\nrational\n1/1\n1/1\n1/1\n")
        out = tmp_path / "spark.json"
        code = main.main(["spark", "--input", str(matrix), "--m", "2", "--output", str(out)])
        assert code == 0
        report = _report(out)["report"]
        assert report["spark"]["spark"] == 2
        assert report["delta"] == "7/8"
        assert report["consistency"]["passed"] is True

    def test_gen_then_certify(self, tmp_path):
        bundle_dir = tmp_path / "bundle"
        code = main.main(
            ["gen", "--kind", "logd-over-alpha2", "--n", "128", "--d", "64", "--alpha", "0.25"]
            + ["--gamma", "1", "--output", str(bundle_dir)]
        )
        assert code == 0
        meta = json.loads((bundle_dir / "meta.json").read_text())
        assert meta["lambda"] == 0.5
        assert _report(bundle_dir / "report.json")["report"]["kind"] == "logd-over-alpha2"

        out = tmp_path / "spread.json"
        code = main.main(
            ["spread-check", "--input", str(bundle_dir / "design.sprd"), "--m", "2"]
            + ["--delta", "0.9", "--method", "heuristic", "--restarts", "4", "--output", str(out)]
        )
        assert code == 0
        assert _report(out)["report"]["method"] == "heuristic"

    def test_gen_gaussian_certify(self, tmp_path):
        bundle_dir = tmp_path / "g"
        argv = ["gen", "--kind", "gaussian", "--n", "2048", "--d", "8"]
        assert main.main(argv + ["--output", str(bundle_dir)]) == 0
        out = tmp_path / "certify.json"
        code = main.main(
            ["certify", "--input", str(bundle_dir / "design.sprd"), "--delta", "0.9"]
            + ["--threshold", "2", "--output", str(out)]
        )
        assert code == 0
        assert _report(out)["report"]["verdict"] == "YES"

    def test_lowdeg_csv_and_plot(self, tmp_path):
        out = tmp_path / "lowdeg.csv"
        plot = tmp_path / "lowdeg.png"
        code = main.main(
            ["lowdeg", "--n", "50", "--rho", "0.2", "--d", "20", "--sigma", "0.2"]
            + ["--degree", "10", "--format", "csv", "--output", str(out), "--plot", str(plot)]
        )
        assert code == 0
        table = pd.read_csv(out)
        assert list(table["k"]) == [4, 6, 8, 10]
        assert plot.read_bytes().startswith(b"\x89PNG")

    def test_missing_required_option(self, tmp_path):
        out = tmp_path / "r.json"
        argv = ["regress", "--design", "gaussian", "--n", "50", "--d", "2", "--alpha", "0.5"]
        code = main.main(argv + ["--output", str(out)])
        assert code == main.EXIT_INVALID


@pytest.mark.integration
class TestSchemaExport:
    """Test suite for the schema export script and the committed schemas."""

    def test_writes_all_schemas(self, tmp_path):
        written = _load_script("export_schemas").export(tmp_path)
        assert len(written) == len(main.SUBCOMMANDS)
        kl_schema = json.loads((tmp_path / "kl.schema.json").read_text())
        assert "lambda" in kl_schema["properties"]["report"]["properties"]

    def test_committed_schemas_match_fresh_export(self):
        assert _load_script("export_schemas").stale_schemas(SCHEMA_DIR) == []

    def test_every_subcommand_has_a_schema(self):
        shipped = {p.name for p in SCHEMA_DIR.glob("*.schema.json")}
        assert shipped == {f"{s}.schema.json" for s in main.SUBCOMMANDS}

    @pytest.mark.parametrize("subcommand", main.SUBCOMMANDS)
    def test_report_validates_against_schema(self, run_dir, subcommand):
        output = f"{subcommand}-out" if subcommand == "gen" else f"{subcommand}.json"
        envelope = _report(_run_to(RUNS[subcommand], output))
        jsonschema.Draft202012Validator(_committed_schema(subcommand)).validate(envelope)

    def test_schema_rejects_renamed_field(self, run_dir):
        envelope = _report(_run_to(RUNS["kl"], "kl.json"))
        envelope["report"]["lam"] = envelope["report"].pop("lambda")
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.Draft202012Validator(_committed_schema("kl")).validate(envelope)


@pytest.mark.integration
class TestReplay:
    """Test suite for byte-identical replays against golden reports."""

    @pytest.mark.parametrize("name", sorted(GOLDEN_RUNS))
    def test_replay_matches_golden(self, run_dir, name):
        argv = GOLDEN_RUNS[name]
        output = "g" if name == "gen" else f"{name}.json"
        first = _run_to(argv, output).read_bytes()
        second = _run_to(argv, output).read_bytes()
        assert first == second

        golden = GOLDEN_DIR / f"{name}.json"
        if not golden.exists():
            # Record once; later runs must reproduce these bytes.
            atomic_write_bytes(golden, first)
        assert first == golden.read_bytes()


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
