"""Command line behavior: exit codes, output formats, artifacts."""
import json
import os

import pytest

from hyperq.cli import generate_pwd_model, main
from hyperq.errors import ValidationError
from hyperq.satenc import read_solver_file

FIX = os.path.join(os.path.dirname(__file__), "fixtures")
K1 = os.path.join(FIX, "k1.kripke")
K2 = os.path.join(FIX, "k2.kripke")
PWD2 = os.path.join(FIX, "pwd2.kripke")
QNI0 = os.path.join(FIX, "qni_c0.prop")
QNI1 = os.path.join(FIX, "qni_c1.prop")
SIMPLE = os.path.join(FIX, "simple.prop")
GUARDED = os.path.join(FIX, "guarded.prop")


# --- password model ---------------------------------------------------------


def test_pwd_model_shape():
    for bits in (1, 2, 3):
        k = generate_pwd_model(bits)
        assert len(k.states) == 4 * bits + 3
        assert k.init == "start"
        assert set(k.ap) == {"i", "o"}
        marked = [s for s in k.states if "o" in k.label(s)]
        assert marked == ["acc"]


def test_pwd_model_bounds():
    with pytest.raises(ValidationError):
        generate_pwd_model(0)
    with pytest.raises(ValidationError):
        generate_pwd_model(9)


# --- exit codes -------------------------------------------------------------


def test_check_holds_exit_zero(capsys):
    assert main(["check", K1, SIMPLE]) == 0
    out = capsys.readouterr().out
    assert "verdict: holds" in out


def test_check_violated_exit_one(capsys):
    assert main(["check", K2, SIMPLE]) == 1
    out = capsys.readouterr().out
    assert "verdict: violated" in out
    assert "infinite" in out


def test_check_qni_on_password_model(capsys):
    assert main(["check", PWD2, QNI0]) == 1
    assert main(["check", PWD2, QNI1]) == 0


def test_check_property_file_and_inline_agree(capsys):
    a = main(["check", K1, SIMPLE])
    b = main(["check", K1, "(count sigma : {a} . true) <= 3"])
    assert a == b == 0


def test_parse_error_exit_two(capsys):
    assert main(["check", K1, "count sigma"]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_model_exit_two(capsys):
    assert main(["check", os.path.join(FIX, "nope.kripke"), SIMPLE]) == 2


def test_bad_pwd_spec_exit_two(capsys):
    assert main(["check", "pwd:x", SIMPLE]) == 2
    assert main(["check", "pwd:0", SIMPLE]) == 2


def test_resource_guard_exit_three(capsys):
    deep = "(count sigma : {a} . " + "X " * 70 + "a_sigma) <= 1"
    assert main(["encode", K1, deep]) == 3
    assert "resource guard" in capsys.readouterr().err


def test_guarded_vacuous_holds(capsys):
    # no grouping trace satisfies the guard, so the bound holds
    assert main(["check", K2, GUARDED]) == 0


# --- output formats ---------------------------------------------------------


def test_check_json_shape(capsys):
    code = main(["check", PWD2, QNI0, "--format", "json"])
    assert code == 1
    payload = json.loads(capsys.readouterr().out)
    assert payload["holds"] is False
    assert payload["route"] == "maximum-count"
    assert payload["witness"]["count"] == 2
    assert payload["command"] == "check"


def test_json_deterministic_without_timings(capsys):
    main(["check", K2, SIMPLE, "--format", "json"])
    first = capsys.readouterr().out
    main(["check", K2, SIMPLE, "--format", "json"])
    assert capsys.readouterr().out == first
    assert "seconds" not in json.loads(first)


def test_json_timings_opt_in(capsys):
    main(["check", K1, SIMPLE, "--format", "json", "--timings"])
    payload = json.loads(capsys.readouterr().out)
    assert isinstance(payload["seconds"], float)


def test_count_json(capsys):
    assert main(["count", PWD2, QNI0, "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["maximum"] == 2
    assert payload["minimum"] == 2
    assert payload["no_eligible_grouping"] is False


def test_count_reports_infinite_maximum(capsys):
    assert main(["count", K2, SIMPLE, "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["maximum"] == "infinite"


# --- dpl --------------------------------------------------------------------


def test_dpl_witness_exit_one(capsys):
    assert main(["dpl", K2, SIMPLE]) == 1
    assert "found" in capsys.readouterr().out


def test_dpl_none_exit_zero(capsys):
    assert main(["dpl", K1, SIMPLE]) == 0
    assert "none" in capsys.readouterr().out


# --- encode -----------------------------------------------------------------


def test_encode_writes_readable_file(tmp_path, capsys):
    out = tmp_path / "enc.cnf"
    code = main(
        ["encode", K2, SIMPLE, "--mu", "4", "--out", str(out), "--solve"]
    )
    assert code == 0
    human = capsys.readouterr().out
    assert "bounded maximum at this depth: 5" in human
    parsed = read_solver_file(out.read_text())
    assert parsed["n_vars"] > 0
    assert len(parsed["ind"]) == 5  # one counted observation per timestep


def test_encode_stdout_is_clause_text(capsys):
    assert main(["encode", K2, SIMPLE, "--mu", "2"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("p cnf ")
    read_solver_file(out)


def test_encode_marks_capped_runs(capsys):
    code = main(
        [
            "encode",
            K2,
            "(count sigma : {a} . a_sigma) <= 3",
            "--mu",
            "2",
            "--solve",
            "--format",
            "json",
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["capped"] is True
    assert payload["completeness"] == "bounded (incomplete)"


# --- references -------------------------------------------------------------


def test_oracle_exit_codes(capsys):
    assert main(["oracle", K1, SIMPLE, "--max-len", "3"]) == 0
    assert main(["oracle", K2, SIMPLE, "--max-len", "4"]) == 1


def test_expansion_exit_codes(capsys):
    assert main(["expansion", K2, GUARDED, "--max-len", "3"]) == 0
    assert (
        main(
            [
                "expansion",
                K2,
                "(count sigma : {a} . true) >= 5",
                "--max-len",
                "2",
            ]
        )
        == 1
    )


# --- bench ------------------------------------------------------------------


def test_bench_writes_csv_and_figure(tmp_path, capsys):
    code = main(
        [
            "bench",
            "--bits",
            "1",
            "--bounded-max-bits",
            "1",
            "--mu",
            "6",
            "--out-dir",
            str(tmp_path),
        ]
    )
    assert code == 0
    csv_text = (tmp_path / "bench.csv").read_text().splitlines()
    assert csv_text[0] == "bits,states,route,mu,seconds,holds"
    routes = [line.split(",")[2] for line in csv_text[1:]]
    assert routes == ["automata", "bounded"]
    assert all(line.endswith("True") for line in csv_text[1:])
    png = (tmp_path / "bench.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"
