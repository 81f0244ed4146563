import re

import pytest

from swaptionsim.cli import Options, load_text, main, run
from swaptionsim.scenario import parse_scenario


def cli(capsys, *args):
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


def test_list(capsys):
    code, out, _ = cli(capsys, "list")
    assert code == 0
    assert "fig3_exercise" in out.split()


def test_fig2_enumeration_bob_honest(capsys):
    code, out, _ = cli(capsys, "run", "fig2_swap", "--enumerate", "--honest", "bob")
    assert code == 0
    assert re.search(r"^0 violations over \d+ outcomes$", out, re.M)


def test_mutant_reports_violations_but_meets_expectation(capsys):
    code, out, _ = cli(capsys, "run", "fig2_mutant")
    assert code == 0
    assert re.search(r"^[1-9]\d* violations over", out, re.M)


def test_violation_without_expectation_exits_one(capsys):
    code, out, _ = cli(capsys, "run", "fig5_mutant", "--honest", "bob", "--enumerate")
    assert code == 0  # the scenario expects the violation
    _, text = load_text("fig5_mutant")
    sc = parse_scenario(text.replace("violations = >=1", ""))
    code, _ = run(sc, Options(enumerate=True))
    assert code == 1


def test_fig4_cheat(capsys):
    code, out, _ = cli(capsys, "run", "fig4_cheat")
    assert code == 0
    assert "publish:breach_exercise" in out and "publish:breach_cancel" in out
    assert re.search(r"bob\s+ACoin\s+1.1", out) and re.search(r"bob\s+BCoin\s+1\b", out)


def test_fig6_payoff_table(capsys):
    code, out, _ = cli(capsys, "run", "fig6_payoff", "--grid", "0.5:2.0:0.01",
                       "--numeraire", "acoin")
    assert code == 0
    rows = [l.split() for l in out.splitlines() if re.match(r"^\d", l)]
    assert len(rows) == 151 and all(len(r) == 2 for r in rows)
    assert "# kinks 1 1.25" in out
    code, out, _ = cli(capsys, "run", "fig6_payoff", "--numeraire", "bcoin")
    assert "# kinks 0.8 1" in out and code == 0


def test_expectation_failure_exits_one(tmp_path, capsys):
    _, text = load_text("fig3_exercise")
    bad = tmp_path / "bad.ini"
    bad.write_text(text.replace("delta.alice.BCoin = 1", "delta.alice.BCoin = 2"))
    code, out, _ = cli(capsys, "run", "--scenario", str(bad))
    assert code == 1
    assert "FAILED" in out


def test_usage_and_parse_errors_exit_two(tmp_path, capsys):
    assert cli(capsys, "run", "no_such_scenario")[0] == 2
    assert cli(capsys, "run")[0] == 2
    assert cli(capsys, "bogus")[0] == 2
    assert cli(capsys, "run", "fig3_exercise", "--grid", "1:2:0.1")[0] == 2
    assert cli(capsys, "run", "fig6_payoff", "--grid", "nope")[0] == 2
    assert cli(capsys, "run", "fig3_exercise", "--enumerate")[0] == 2
    empty = tmp_path / "empty.ini"
    empty.write_text("")
    code, _, err = cli(capsys, "run", "--scenario", str(empty))
    assert code == 2 and "syntax error" in err


def test_records_format(capsys):
    code, out, _ = cli(capsys, "run", "fig3_exercise", "--format", "records")
    assert code == 0
    finals = [l for l in out.splitlines() if l.startswith("final ")]
    assert "final alice BCoin 1000000" in finals
    publishes = [l.split() for l in out.splitlines() if " publish:" in l]
    assert all(len(p) >= 5 and p[0].isdigit() for p in publishes)


def test_out_dir_and_jobs_match_serial(tmp_path, capsys):
    names = ["fig1_claim", "fig2_swap", "fig4_cancel", "fig7_unwind"]
    code, out, _ = cli(capsys, "run", *names, "--jobs", "3", "--out", str(tmp_path / "p"))
    assert code == 0
    assert [l.split(":")[0] for l in out.splitlines()] == names
    cli(capsys, "run", *names, "--out", str(tmp_path / "s"))
    for n in names:
        assert (tmp_path / "p" / f"{n}.txt").read_bytes() == (tmp_path / "s" / f"{n}.txt").read_bytes()


def test_lightning_scenarios(capsys):
    code, out, _ = cli(capsys, "run", "fig7_unwind")
    assert code == 0
    assert "# positions alice-dave carol-bob" in out
    code, out, _ = cli(capsys, "run", "lightning_route")
    assert code == 0


def test_lightning_step_error(tmp_path, capsys):
    _, text = load_text("fig7_unwind")
    bad = tmp_path / "l.ini"
    bad.write_text(text.replace("unwind alice_carol carol_alice", "unwind alice_carol ghost"))
    code, out, _ = cli(capsys, "run", "--scenario", str(bad))
    assert code == 1 and "unknown position 'ghost'" in out


@pytest.mark.parametrize("name", ["fig1_claim", "fig3_expire", "fig5_bob_default",
                                  "future_forward"])
def test_bundled_runs_cleanly(name, capsys):
    assert cli(capsys, "run", name)[0] == 0
