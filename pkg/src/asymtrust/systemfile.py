"""System and scenario files.

Both are YAML documents with processes written 1-based. A system file::

    n: 6
    labels: [a, b, c, d, e, f]        # optional
    fail_prone:                       # one entry per process, p1 first
      - [[1, 2, 5, 6], [1, 2, 3]]
      - ...
    quorums:                          # optional explicit quorum lists
      - [[3, 4], [4, 5, 6]]
      - ...

``fail_prone`` and ``quorums`` may also be mappings keyed ``p1``..``pn``.
A scenario file mirrors the Scenario type; its ``system`` entry is either an
inline system document or a path relative to the scenario file. An optional
``checks`` mapping (for instance ``{d: 1}``) overrides the depths the property
checkers use; it is not part of the scenario digest.
Errors carry the line and column of the offending node.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from . import bitsets as bs
from .sim.scenario import Scenario, ValidationError
from .trust import FailProneSystem


class SystemFileError(ValueError):
    def __init__(self, msg: str, line: int | None = None, column: int | None = None, path: str | None = None):
        self.line, self.column, self.path = line, column, path
        where = ""
        if line is not None:
            where = f"{path or '<input>'}:{line}:{column}: "
        elif path:
            where = f"{path}: "
        super().__init__(where + msg)


@dataclass
class SystemDoc:
    fps: FailProneSystem
    quorums: tuple | None = None
    labels: tuple[str, ...] | None = None


def _err(node, msg: str, path: str | None) -> SystemFileError:
    mark = getattr(node, "start_mark", None)
    if mark is None:
        return SystemFileError(msg, path=path)
    return SystemFileError(msg, mark.line + 1, mark.column + 1, path)


def _compose(text: str, path: str | None):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise SystemFileError(f"YAML syntax: {exc.problem or exc}", line, col, path) from None
    if node is None:
        raise SystemFileError("empty document", path=path)
    return node


def _mapping(node, what: str, path) -> dict:
    if not isinstance(node, yaml.MappingNode):
        raise _err(node, f"{what} must be a mapping", path)
    out = {}
    for k, v in node.value:
        if not isinstance(k, yaml.ScalarNode):
            raise _err(k, "keys must be scalars", path)
        if k.value in out:
            raise _err(k, f"duplicate key {k.value!r}", path)
        out[k.value] = v
    return out


def _seq(node, what: str, path) -> list:
    if not isinstance(node, yaml.SequenceNode):
        raise _err(node, f"{what} must be a list", path)
    return list(node.value)


def _int(node, what: str, path) -> int:
    if not isinstance(node, yaml.ScalarNode):
        raise _err(node, f"{what} must be an integer", path)
    try:
        return int(node.value)
    except ValueError:
        raise _err(node, f"{what} must be an integer, got {node.value!r}", path) from None


def _pset(node, n: int, path) -> int:
    m = 0
    for item in _seq(node, "a process set", path):
        p = _int(item, "a process index", path)
        if not 1 <= p <= n:
            raise _err(item, f"process {p} outside 1..{n}", path)
        m |= 1 << (p - 1)
    return m


def _per_process(node, n: int, what: str, path) -> list[list[int]]:
    if isinstance(node, yaml.MappingNode):
        entries = _mapping(node, what, path)
        rows: list = [None] * n
        for key, val in entries.items():
            label = key[1:] if key.startswith("p") else key
            if not label.isdigit() or not 1 <= int(label) <= n:
                k = next(k for k, _ in node.value if k.value == key)
                raise _err(k, f"{what}: unknown process {key!r}", path)
            rows[int(label) - 1] = val
        missing = [i + 1 for i, r in enumerate(rows) if r is None]
        if missing:
            raise _err(node, f"{what}: no entry for p{missing[0]}", path)
    else:
        rows = _seq(node, what, path)
        if len(rows) != n:
            raise _err(node, f"{what} lists {len(rows)} processes, expected {n}", path)
    out = []
    for row in rows:
        sets = _seq(row, f"{what} entry", path)
        if not sets:
            raise _err(row, f"{what} entry is empty", path)
        out.append([_pset(s, n, path) for s in sets])
    return out


def parse_system(text: str, path: str | None = None) -> SystemDoc:
    return _system_from_node(_compose(text, path), path)


def _system_from_node(node, path) -> SystemDoc:
    doc = _mapping(node, "a system document", path)
    if "n" not in doc:
        raise _err(node, "missing key 'n'", path)
    n = _int(doc["n"], "n", path)
    if not 1 <= n <= bs.MAX_PROCESSES:
        raise _err(doc["n"], f"n must be in 1..{bs.MAX_PROCESSES}", path)
    if "fail_prone" not in doc:
        raise _err(node, "missing key 'fail_prone'", path)
    unknown = set(doc) - {"n", "labels", "fail_prone", "quorums"}
    if unknown:
        key = next(k for k, _ in node.value if k.value in unknown)
        raise _err(key, f"unknown key {key.value!r}", path)
    fps = FailProneSystem(n, _per_process(doc["fail_prone"], n, "fail_prone", path))
    quorums = None
    if "quorums" in doc and not (isinstance(doc["quorums"], yaml.ScalarNode) and doc["quorums"].value in ("", "null", "~")):
        quorums = tuple(tuple(row) for row in _per_process(doc["quorums"], n, "quorums", path))
    labels = None
    if "labels" in doc:
        items = _seq(doc["labels"], "labels", path)
        if len(items) != n:
            raise _err(doc["labels"], f"labels lists {len(items)} names, expected {n}", path)
        labels = tuple(str(i.value) for i in items)
    return SystemDoc(fps, quorums, labels)


def load_system(path) -> SystemDoc:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SystemFileError(f"cannot read: {exc.strerror}", path=str(path)) from None
    return parse_system(text, str(path))


def dump_system(fps: FailProneSystem, quorums=None, comment: str = "") -> str:
    lines = [f"# {c}" if c else "#" for c in comment.splitlines()] if comment else []
    lines.append(f"n: {fps.n}")
    lines.append("fail_prone:")
    for i, row in enumerate(fps.sets):
        lines.append(f"  p{i + 1}: {_fmt_sets(row)}")
    if quorums is not None:
        lines.append("quorums:")
        for i, row in enumerate(quorums):
            lines.append(f"  p{i + 1}: {_fmt_sets(row)}")
    return "\n".join(lines) + "\n"


def _fmt_sets(row) -> str:
    return "[" + ", ".join("[" + ", ".join(str(x) for x in bs.labels(s)) + "]" for s in row) + "]"


# -- scenarios ----------------------------------------------------------------


def parse_scenario(text: str, path: str | None = None, base: Path | None = None) -> Scenario:
    node = _compose(text, path)
    doc = _mapping(node, "a scenario document", path)
    if "system" not in doc:
        raise _err(node, "missing key 'system'", path)
    sys_node = doc["system"]
    if isinstance(sys_node, yaml.ScalarNode):
        ref = Path(sys_node.value)
        if not ref.is_absolute() and base is not None:
            ref = base / ref
        if not ref.exists():
            raise _err(sys_node, f"system file {sys_node.value!r} not found", path)
        sysdoc = load_system(ref)
    else:
        sysdoc = _system_from_node(sys_node, path)
    data = yaml.safe_load(text)
    data.pop("checks", None)
    data["system"] = {
        "n": sysdoc.fps.n,
        "fail_prone": [[bs.labels(s) for s in row] for row in sysdoc.fps.sets],
    }
    if sysdoc.quorums is not None:
        data["system"]["quorums"] = [[bs.labels(q) for q in row] for row in sysdoc.quorums]
    prot = data.get("protocol")
    if isinstance(prot, str):
        data["protocol"] = {"kind": prot}
    if isinstance(data.get("inputs"), dict):
        data["inputs"] = {str(k).lstrip("p"): v for k, v in data["inputs"].items()}
    try:
        return Scenario.from_dict(data)
    except ValidationError as exc:
        raise SystemFileError(str(exc), path=path) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SystemFileError(f"cannot read: {exc.strerror}", path=str(path)) from None
    return parse_scenario(text, str(path), path.parent)


def load_checks(path) -> dict:
    """The ``checks`` overrides of a scenario file, or an empty dict."""
    path = Path(path)
    node = _compose(path.read_text(), str(path))
    doc = _mapping(node, "a scenario document", str(path))
    if "checks" not in doc:
        return {}
    out = {}
    for key, val in _mapping(doc["checks"], "checks", str(path)).items():
        if key not in ("d", "d_prime"):
            k = next(k for k, _ in doc["checks"].value if k.value == key)
            raise _err(k, f"unknown check parameter {key!r}", str(path))
        out[key] = float("inf") if val.value == "inf" else _int(val, key, str(path))
    return out


def dump_scenario(sc: Scenario, system_ref: str | None = None, checks: dict | None = None) -> str:
    d = sc.to_dict()
    if system_ref is not None:
        d["system"] = system_ref
    if checks:
        d["checks"] = dict(checks)
    return yaml.safe_dump(d, sort_keys=False, default_flow_style=None, width=100)


__all__ = ["SystemDoc", "SystemFileError", "dump_scenario", "dump_system", "load_checks", "load_scenario", "load_system",
           "parse_scenario", "parse_system"]
