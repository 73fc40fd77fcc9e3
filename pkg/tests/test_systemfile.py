import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asymtrust import bitsets as bs
from asymtrust.fixtures import fd_system, layered, threshold, write_fixtures
from asymtrust.systemfile import (
    SystemFileError,
    dump_system,
    load_checks,
    load_scenario,
    parse_scenario,
    parse_system,
)
from asymtrust.trust import FailProneSystem

FD_TEXT = """\
n: 6
fail_prone:
  - [[1, 2, 5, 6], [1, 2, 3]]
  - [[1, 2, 5, 6], [1, 2, 3]]
  - [[1, 2, 4]]
  - [[1, 2, 3]]
  - [[1, 2, 4]]
  - [[1, 2, 4]]
"""


def test_list_form_parses_to_fd():
    assert parse_system(FD_TEXT).fps == fd_system()


def test_mapping_form_parses_to_fd():
    text = dump_system(fd_system())
    assert "p1:" in text
    assert parse_system(text).fps == fd_system()


def test_labels_and_explicit_quorums():
    text = "n: 2\nlabels: [a, b]\nfail_prone: [[[]], [[]]]\nquorums:\n  p1: [[1, 2]]\n  p2: [[2]]\n"
    doc = parse_system(text)
    assert doc.labels == ("a", "b")
    assert doc.quorums == ((bs.from_labels([1, 2]),), (bs.from_labels([2]),))


def test_comment_lines_are_ignored():
    lay = layered(3)
    text = dump_system(lay.fps, comment="first\nsecond")
    assert text.startswith("# first\n# second\n")
    assert parse_system(text).fps == lay.fps


@pytest.mark.parametrize("text,line,col,fragment", [
    ("n: 3\nfail_prone:\n  - [[1]]\n  - [[9]]\n  - [[3]]\n", 4, 7, "outside 1..3"),
    ("n: 2\nfail_prone:\n  - [[1]]\n", 3, 3, "lists 1 processes"),
    ("fail_prone: []\n", 1, 1, "missing key 'n'"),
    ("n: two\nfail_prone: []\n", 1, 4, "must be an integer"),
    ("n: 1\nfail_prone: [[[1]]]\nextra: 1\n", 3, 1, "unknown key"),
    ("n: 1\nfail_prone: [[[1]]\n", 3, 1, "YAML syntax"),
    ("n: 2\nfail_prone:\n  p1: [[1]]\n  p7: [[2]]\n", 4, 3, "unknown process"),
    ("n: 2\nfail_prone:\n  p1: [[1]]\n", 3, 3, "no entry for p2"),
    ("n: 1\nn: 1\nfail_prone: [[[1]]]\n", 2, 1, "duplicate key"),
])
def test_errors_carry_position(text, line, col, fragment):
    with pytest.raises(SystemFileError) as info:
        parse_system(text, "x.system")
    err = info.value
    assert (err.line, err.column) == (line, col)
    assert fragment in str(err)
    assert str(err).startswith(f"x.system:{line}:{col}:")


def test_empty_document():
    with pytest.raises(SystemFileError, match="empty"):
        parse_system("")


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.lists(st.integers(0, (1 << n) - 1), min_size=1, max_size=4), min_size=n, max_size=n))))
def test_dump_parse_round_trip_keeps_antichains(case):
    n, rows = case
    fps = FailProneSystem(n, rows)
    back = parse_system(dump_system(fps)).fps
    assert back == fps
    for row in back.sets:
        assert tuple(bs.maximal(row)) == row


def test_fixture_scenarios_round_trip(tmp_path):
    from asymtrust import fixtures as F
    from asymtrust.protocols.factory import ProtocolKind

    write_fixtures(tmp_path)
    expect = {
        "norb1_demo.scn": F.norb1_scenario(),
        "norb1_rb3.scn": F.norb1_scenario(ProtocolKind.RB3),
        "rb3_threshold7.scn": F.rb3_threshold7(),
        "coin_n4.scn": F.coin_n4(),
        "bca_explore.scn": F.bca_explore(),
        "consensus_n4.scn": F.consensus_n4(),
        "consensus_layered.scn": F.consensus_layered(),
    }
    for name, sc in expect.items():
        assert load_scenario(tmp_path / "scenarios" / name).digest() == sc.digest(), name
    assert load_checks(tmp_path / "scenarios" / "norb1_demo.scn") == {"d": 1}
    assert load_checks(tmp_path / "scenarios" / "coin_n4.scn") == {}


def test_layered_fixture_comments_match_depths(tmp_path):
    from asymtrust.trust import canonical_quorums, depth_map, fmt_depth

    write_fixtures(tmp_path)
    for k in (3, 10):
        text = (tmp_path / "systems" / f"layered{k}.system").read_text()
        comments = dict(line[2:].split(": ", 1) for line in text.splitlines() if line.startswith("# ") and ": " in line)
        fps = parse_system(text).fps
        faults = bs.from_labels(int(x) for x in comments["faults"].split(","))
        depths = depth_map(canonical_quorums(fps), faults)
        assert comments["oracle depths"] == ",".join(fmt_depth(d) for d in depths)


def test_inline_scenario_system():
    text = """
system:
  n: 4
  fail_prone: [[[1]], [[2]], [[3]], [[4]]]
protocol: BCA
faults: [4]
inputs: {p1: 0, p2: 1, p3: 1}
"""
    sc = parse_scenario(text)
    assert sc.n == 4 and sc.faults == bs.from_labels([4])
    assert sc.inputs == {0: 0, 1: 1, 2: 1}


def test_scenario_missing_system_file(tmp_path):
    p = tmp_path / "a.scn"
    p.write_text("system: nowhere.system\nprotocol: RB3\n")
    with pytest.raises(SystemFileError, match="not found") as info:
        load_scenario(p)
    assert info.value.line == 1


def test_scenario_invalid_system_is_reported(tmp_path):
    p = tmp_path / "a.scn"
    p.write_text("system:\n  n: 3\n  fail_prone: [[[1], [2], [3]], [[1], [2], [3]], [[1], [2], [3]]]\nprotocol: RB3\n")
    # every process fears any single process: B3 fails, so no canonical quorums
    sc = load_scenario(p)
    from asymtrust.sim.scenario import ValidationError

    with pytest.raises(ValidationError):
        sc.validate()


def test_threshold_fixture_round_trip():
    fps = threshold(7, 2)
    assert parse_system(dump_system(fps)).fps == fps
