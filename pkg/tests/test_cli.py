import csv
import io
import json

import pytest

from fpb_probe import analytics as an
from fpb_probe.cli import EXIT_CHECK, EXIT_OK, EXIT_USAGE, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def exit_code(*argv):
    """Exit status whether argparse exits or ``main`` returns."""
    try:
        return main(list(argv))
    except SystemExit as exc:
        return exc.code


def parse_csv(text):
    """Split an output into its '#' metadata lines and the CSV records."""
    lines = text.splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return comments, list(csv.DictReader(io.StringIO("\n".join(body))))


class TestCurves:
    def test_endpoints_and_dominance(self, capsys):
        code, out = run_cli(capsys, "curves", "--grid", "11")
        assert code == EXIT_OK
        _, rows = parse_csv(out)
        assert len(rows) == 11
        first, last = rows[0], rows[-1]
        assert float(first["renyi_projective"]) == 0.0 and float(first["renyi_povm"]) == 0.0
        assert float(last["renyi_projective"]) == pytest.approx(1.0, abs=1e-12)
        assert float(last["renyi_povm"]) == pytest.approx(1.0, abs=1e-12)
        for row in rows[1:-1]:
            assert float(row["renyi_projective"]) > float(row["renyi_povm"])

    def test_csv_round_trip(self, capsys):
        _, out = run_cli(capsys, "curves", "--grid", "101")
        _, rows = parse_csv(out)
        for row in rows:
            pe = float(row["pe"])
            assert float(row["renyi_projective"]) == pytest.approx(an.renyi_projective(pe), abs=1e-10)
            assert float(row["renyi_povm"]) == pytest.approx(an.renyi_povm(pe), abs=1e-10)

    def test_two_points(self, capsys):
        _, out = run_cli(capsys, "curves", "--grid", "2")
        assert len(parse_csv(out)[1]) == 2

    def test_grid_too_small(self, capsys):
        assert exit_code("curves", "--grid", "1") == EXIT_USAGE

    def test_metadata_line(self, capsys):
        _, out = run_cli(capsys, "curves", "--grid", "3")
        assert out.startswith("# tool=fpb-probe version=")
        assert "command=curves" in out.splitlines()[0]


class TestTable:
    def test_bit_level_at_one_third(self, capsys):
        code, out = run_cli(capsys, "table", "--pe", "1/3", "--level", "bit")
        assert code == EXIT_OK
        _, rows = parse_csv(out)
        assert len(rows) == 12
        assert all(float(r["probability"]) == 0.0 for r in rows if r["e"] == "inc")

    def test_state_level_values(self, capsys):
        _, out = run_cli(capsys, "table", "--pe", "0.2")
        _, rows = parse_csv(out)
        assert len(rows) == 24
        lookup = {(r["alice"], r["bob"], r["eve"]): float(r["probability"]) for r in rows}
        assert lookup[("H", "V", "H")] == pytest.approx(0.025, abs=1e-12)
        assert sum(lookup.values()) == pytest.approx(1.0, abs=1e-12)
        for key, p in an.table1(0.2):
            assert lookup[key] == pytest.approx(p, abs=1e-10)

    def test_json(self, capsys):
        _, out = run_cli(capsys, "table", "--pe", "0.1", "--format", "json")
        doc = json.loads(out)
        assert doc["meta"]["command"] == "table"
        assert doc["meta"]["pe"] == 0.1
        assert len(doc["rows"]) == 24
        assert set(doc["rows"][0]) == {"alice", "bob", "eve", "probability"}

    @pytest.mark.parametrize("pe", ["0.4", "-0.1", "abc"])
    def test_bad_pe(self, capsys, pe):
        assert exit_code("table", "--pe", pe) == EXIT_USAGE

    def test_out_file(self, tmp_path, capsys):
        path = tmp_path / "t.csv"
        assert main(["table", "--pe", "0.2", "--out", str(path)]) == EXIT_OK
        assert capsys.readouterr().out == ""
        assert len(parse_csv(path.read_text())[1]) == 24


class TestSimulate:
    def test_passes_and_reports(self, capsys):
        code, out = run_cli(capsys, "simulate", "--pe", "0.2", "--trials", "100000", "--seed", "3")
        assert code == EXIT_OK
        comments, rows = parse_csv(out)
        assert any(c.startswith("# summary") and "passed=true" in c for c in comments)
        assert len(rows) == 24
        counts = {(r["alice"], r["bob"], r["eve"]): int(r["count"]) for r in rows}
        assert counts[("H", "H", "V")] == 0

    def test_json_summary(self, capsys):
        _, out = run_cli(
            capsys, "simulate", "--pe", "0.1", "--trials", "20000", "--level", "bit", "--format", "json"
        )
        doc = json.loads(out)
        assert doc["meta"]["seed"] == 42
        assert doc["summary"]["passed"] is True
        assert len(doc["rows"]) == 12

    def test_byte_identical(self, capsys):
        argv = ["simulate", "--pe", "0.25", "--trials", "30000", "--seed", "9"]
        _, first = run_cli(capsys, *argv)
        _, second = run_cli(capsys, *argv, "--workers", "3")
        assert first == second

    def test_zero_trials(self, capsys):
        assert exit_code("simulate", "--pe", "0.2", "--trials", "0") == EXIT_USAGE

    def test_projective(self, capsys):
        code, out = run_cli(capsys, "simulate", "--pe", "0.2", "--trials", "20000", "--probe", "projective")
        assert code == EXIT_OK
        assert all(r["eve"] != "inc" for r in parse_csv(out)[1])


class TestLossy:
    def test_output(self, capsys):
        code, out = run_cli(capsys, "lossy", "--eta", "0.3", "--trials", "100000")
        assert code == EXIT_OK
        _, rows = parse_csv(out)
        by_name = {r["quantity"]: r for r in rows}
        assert float(by_name["forwarded_fraction"]["analytic"]) == pytest.approx(0.3)
        assert float(by_name["error_given_conclusive"]["analytic"]) == pytest.approx(1 / 3)
        assert abs(float(by_name["error_given_conclusive"]["z"])) <= 5

    def test_bad_eta(self, capsys):
        assert exit_code("lossy", "--eta", "0", "--trials", "10") == EXIT_USAGE


class TestValidate:
    def test_clean(self, capsys):
        code, out = run_cli(capsys, "validate", "--format", "json")
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["summary"]["passed"] is True
        assert len({r["group"] for r in doc["rows"]}) >= 6

    @pytest.mark.parametrize("delta", ["1e-6", "0.5"])
    def test_perturbed_povm_fails(self, capsys, delta):
        code, out = run_cli(capsys, "validate", "--perturb-inc", delta, "--trials", "10000")
        assert code == EXIT_CHECK
        assert "passed=false" in out
