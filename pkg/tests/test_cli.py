import pytest

from asymtrust.cli import main, parse_faults, parse_seeds
from asymtrust.cli import InputError


@pytest.fixture(scope="module")
def fx(tmp_path_factory):
    root = tmp_path_factory.mktemp("fx")
    assert main(["fixtures", "--out", str(root)]) == 0
    return root


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def records(text):
    return [line.split("\t") for line in text.splitlines()]


# -- argument helpers ---------------------------------------------------------------------


def test_parse_seeds():
    assert list(parse_seeds("3")) == [3]
    assert list(parse_seeds("5..7")) == [5, 6, 7]
    for bad in ("x", "7..5", "-1"):
        with pytest.raises(InputError):
            parse_seeds(bad)


def test_parse_faults():
    assert parse_faults("5,6", 6) == 0b110000
    assert parse_faults("", 6) == 0
    with pytest.raises(InputError):
        parse_faults("7", 6)


# -- analyze -------------------------------------------------------------------------------


def test_analyze_fd_quorums(fx, capsys):
    code, cap = cli(capsys, "--records", "analyze", fx / "systems" / "fd.system")
    assert code == 0
    rec = records(cap.out)
    assert ["b3", "true", ""] in rec
    quorums = {r[1]: r[2] for r in rec if r[0] == "quorums"}
    assert quorums == {
        "p1": "{3,4} {4,5,6}", "p2": "{3,4} {4,5,6}", "p3": "{3,5,6}",
        "p4": "{4,5,6}", "p5": "{3,5,6}", "p6": "{3,5,6}",
    }
    assert ["tolerated", "{1,2,4}"] in rec and ["q3", "true"] in rec


def test_analyze_fd_with_faults(fx, capsys):
    code, cap = cli(capsys, "analyze", fx / "systems" / "fd.system", "--faults", "5,6", "--records")
    assert code == 0
    rec = records(cap.out)
    procs = [r[1:] for r in rec if r[0] == "process"]
    assert [p[2] for p in procs] == ["1", "1", "0", "0", "bot", "bot"]
    assert ["guild", "none"] in rec


def test_analyze_human_output(fx, capsys):
    code, cap = cli(capsys, "analyze", fx / "systems" / "fd.system", "--faults", "5,6")
    assert code == 0
    assert "B3: true" in cap.out and "maximal guild: none" in cap.out


def test_analyze_non_b3_exits_one(tmp_path, capsys):
    p = tmp_path / "bad.system"
    p.write_text("n: 3\nfail_prone: [[[1], [2], [3]], [[1], [2], [3]], [[1], [2], [3]]]\n")
    code, cap = cli(capsys, "analyze", p)
    assert code == 1 and "B3: false" in cap.out


def test_analyze_parse_error_exits_two(tmp_path, capsys):
    p = tmp_path / "broken.system"
    p.write_text("n: 2\nfail_prone:\n  - [[1]]\n")
    code, cap = cli(capsys, "analyze", p)
    assert code == 2
    assert f"{p}:3:3:" in cap.err


def test_missing_file_exits_two(tmp_path, capsys):
    code, cap = cli(capsys, "analyze", tmp_path / "nope.system")
    assert code == 2 and cap.err


def test_usage_error_exits_two(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


# -- run, replay, explore -----------------------------------------------------------------


def test_run_violation_exit_and_witness(fx, tmp_path, capsys):
    code, cap = cli(capsys, "run", fx / "scenarios" / "norb1_demo.scn", "--out", tmp_path, "--records")
    assert code == 1
    tot = next(r for r in records(cap.out) if r[0] == "rb.totality")
    assert tot[1] == "VIOLATED"
    assert "33.1 output p2 dar-deliver v=0 ; end@34 p1 no dar-deliver" in tot[3]
    assert (tmp_path / "norb1-Eprime-rb_premature.summary").exists()


def test_run_holds_exit_zero(fx, capsys):
    code, cap = cli(capsys, "run", fx / "scenarios" / "norb1_rb3.scn")
    assert code == 0 and "VACUOUS" in cap.out


def test_run_seed_range_in_parallel(fx, tmp_path, capsys):
    code, _ = cli(capsys, "run", fx / "scenarios" / "rb3_threshold7.scn", "--seeds", "0..3", "--jobs", "2",
                  "--out", tmp_path)
    assert code == 0
    assert sorted(p.name for p in tmp_path.glob("*.trace")) == [f"rb3-threshold7-s{s}.trace" for s in range(4)]


def test_run_horizon_override_reports_exhaustion(fx, capsys):
    code, cap = cli(capsys, "run", fx / "scenarios" / "rb3_threshold7.scn", "--horizon", "3")
    assert "horizon exhausted" in cap.out
    assert code == 0


def test_replay_identical_then_diverged(fx, tmp_path, capsys):
    cli(capsys, "run", fx / "scenarios" / "bca_explore.scn", "--out", tmp_path)
    trace = next(tmp_path.glob("*.trace"))
    code, cap = cli(capsys, "replay", trace)
    assert code == 0 and "identical" in cap.out
    lines = trace.read_text().splitlines(keepends=True)
    k = next(i for i, x in enumerate(lines) if "\tdeliver\t" in x)
    lines[k] = lines[k].replace("deliver", "drop", 1)
    trace.write_text("".join(lines))
    code, cap = cli(capsys, "replay", trace)
    assert code == 1 and f"diverges at line {k + 1}" in cap.out


def test_replay_digest_mismatch(fx, tmp_path, capsys):
    cli(capsys, "run", fx / "scenarios" / "bca_explore.scn", "--out", tmp_path)
    trace = next(tmp_path.glob("*.trace"))
    text = trace.read_text()
    trace.write_text(text.replace('"horizon":40', '"horizon":41', 1))
    code, cap = cli(capsys, "replay", trace)
    assert code == 1 and "digest mismatch" in cap.out


def test_replay_garbage_exits_two(tmp_path, capsys):
    p = tmp_path / "x.trace"
    p.write_text("hello\n")
    code, _ = cli(capsys, "replay", p)
    assert code == 2


def test_explore_small_bound(fx, capsys):
    code, cap = cli(capsys, "explore", fx / "scenarios" / "bca_explore.scn", "--bound", "40", "--records")
    assert code == 0
    rec = {r[0]: r for r in records(cap.out)}
    assert rec["bca.agreement"][1] == "HOLDS" and rec["bca.binding"][1] == "HOLDS"


def test_explore_rejects_non_bca(fx, capsys):
    code, _ = cli(capsys, "explore", fx / "scenarios" / "rb3_threshold7.scn", "--bound", "3")
    assert code == 2
