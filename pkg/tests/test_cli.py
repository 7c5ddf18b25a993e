import csv
import subprocess
import sys
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from selfsim_khintchine import __version__
from selfsim_khintchine.cli import (
    EXIT_DOMAIN,
    EXIT_HYPOTHESIS,
    EXIT_OK,
    EXIT_USAGE,
    RunSpec,
    parse_config_text,
    parse_value,
    run,
)
from selfsim_khintchine.errors import DomainError


def _rows(path):
    lines = path.read_text().splitlines()
    assert lines[-1] == f"# seed=0, version={__version__}" or lines[-1].startswith("# seed=")
    return list(csv.reader(lines[:-1]))


def test_unknown_subcommand_is_usage_error(capsys):
    assert run(["frobnicate"]) == EXIT_USAGE
    assert run([]) == EXIT_USAGE


def test_constants(tmp_path):
    assert run(["constants", "--eps", "0", "--out", str(tmp_path)]) == EXIT_OK
    rows = dict((r[0], r[1]) for r in _rows(tmp_path / "constants.csv")[1:])
    assert rows["kappa (eps->0)"] == "25/704"
    assert rows["s* (eps->0)"] == "20416/20441"
    assert rows["cantor cutoff (eps->0)"] == "3247/3872"


def test_gap_sum_routes_agree(tmp_path):
    code = run(["gap-sum", "--base", "3", "--digits", "0,2", "--n", "2", "--delta", "1",
                "--brute-force", "--out", str(tmp_path)])
    assert code == EXIT_OK
    rows = _rows(tmp_path / "gap_sum.csv")
    assert [r[1] for r in rows[1:]] == ["5/36", "5/36"]


def test_check_hypothesis_failure_exit_code(tmp_path):
    assert run(["check-hypothesis", "--out", str(tmp_path)]) == EXIT_HYPOTHESIS
    assert (tmp_path / "hypothesis.csv").exists()


def test_negative_samples_names_the_key(tmp_path, capsys):
    assert run(["equidist", "--samples", "-5", "--out", str(tmp_path)]) == EXIT_DOMAIN
    assert "samples" in capsys.readouterr().err


def test_decimal_rejected_for_exact_key(tmp_path, capsys):
    assert run(["simplex", "--radius", "0.666", "--out", str(tmp_path)]) == EXIT_DOMAIN
    assert "radius" in capsys.readouterr().err
    assert parse_value("radius", "2/3") == Fraction(2, 3)


def test_missing_ifs_file_is_domain_error(tmp_path):
    assert run(["walk", "--ifs", str(tmp_path / "nope.txt"), "--out", str(tmp_path)]) == EXIT_DOMAIN


def test_config_errors_name_the_line():
    with pytest.raises(DomainError, match="line 2"):
        parse_config_text("subcommand = walk\nbogus = 3\n")
    with pytest.raises(DomainError, match="line 3"):
        parse_config_text("subcommand = walk\nn_max = 2\nn_max = 3\n")
    with pytest.raises(DomainError, match="subcommand"):
        parse_config_text("n_max = 2\n")


spec_values = st.fixed_dictionaries({
    "seed": st.integers(0, 10**6),
    "samples": st.integers(100, 10**6),
    "eps": st.lists(st.floats(0.01, 0.99), min_size=1, max_size=3).map(tuple),
    "radius": st.fractions(Fraction(1, 10**4), 1, max_denominator=10**4),
    "alpha": st.lists(st.integers(0, 4), min_size=1, max_size=4).map(tuple),
    "norm": st.sampled_from(["max", "euclidean"]),
})


@given(spec_values)
def test_config_round_trip(values):
    spec = RunSpec("equidist", values, "results")
    back = parse_config_text(spec.to_text())
    assert back == spec


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("subcommand = rational-avg\n# comment\np = 3\nm = 1\ntest = cusp:1/2\n")
    assert run(["rational-avg", "--config", str(cfg), "--m", "2", "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "rational_avg.csv")
    assert rows[-1] == ["2", "1/3", "exact"]


def test_walk_output(tmp_path):
    assert run(["walk", "--ifs", "missing:base=3,digits=0,2", "--n-max", "2", "--test", "d1",
                "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "walk.csv")
    assert rows[-1][1] == "17/8"


def test_equidist_is_byte_identical_for_same_seed(tmp_path):
    args = ["equidist", "--samples", "20000", "--t", "4", "--eps", "0.3", "--seed", "5"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(args + ["--out", str(a), "--threads", "1"]) in (EXIT_OK, EXIT_HYPOTHESIS)
    assert run(args + ["--out", str(b), "--threads", "4"]) in (EXIT_OK, EXIT_HYPOTHESIS)
    assert (a / "equidist.csv").read_bytes() == (b / "equidist.csv").read_bytes()


def test_khintchine_lebesgue(tmp_path):
    code = run(["khintchine", "--ifs", "lebesgue", "--psi", "recip", "--n-min", "1", "--n-max", "6",
                "--samples", "300", "--out", str(tmp_path)])
    assert code in (EXIT_OK, EXIT_HYPOTHESIS)
    rows = _rows(tmp_path / "khintchine.csv")
    cum = [float(r[rows[0].index("cum_hit")]) for r in rows[1:]]
    assert cum == sorted(cum)


def test_bc_verify_and_simplex(tmp_path):
    assert run(["bc-verify", "--mu", "1/n", "--M", "2", "--N", "200", "--out", str(tmp_path)]) == EXIT_OK
    assert run(["simplex", "--sweep", "40", "--out", str(tmp_path)]) == EXIT_OK
    assert _rows(tmp_path / "simplex.csv")[1][2] == "0"


def test_identity_audit_and_profile(tmp_path):
    assert run(["identity-audit", "--ifs", "missing:base=3,digits=0,2", "--max-word", "2",
                "--points", "3", "--depth", "2", "--out", str(tmp_path)]) == EXIT_OK
    assert run(["profile", "--psi", "log:a=1", "--n-max", "8", "--x", "1/3", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "lattice_scan.csv").exists()


def test_console_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "selfsim_khintchine", "gap-sum", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
