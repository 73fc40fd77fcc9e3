"""Command line front end: analyze, run, explore, replay, fixtures.

Exit codes: 0 when everything holds, 1 on a property violation or replay
divergence, 2 on bad input.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import bitsets as bs
from . import properties as P
from .sim.explorer import ExplosionGuard, explore
from .sim.runner import run
from .sim.scenario import Scenario, ValidationError, parse_schedule
from .sim.trace import TraceFormatError, parse_trace
from .systemfile import SystemFileError, load_checks, load_scenario, load_system
from .trust import (
    B3Violation,
    QuorumSystem,
    canonical_quorums,
    check_b3,
    check_q3,
    classify,
    depth_map,
    fmt_depth,
    maximal_guild,
    tolerated_system,
    verify_availability,
    verify_consistency,
)

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2
ENUMERATION_LIMIT = 16  # largest n for the 2**n fault-set sweeps


class InputError(Exception):
    pass


# -- argument helpers -----------------------------------------------------------


def parse_seeds(text: str) -> range:
    """``7`` or ``A..B`` (inclusive)."""
    a, sep, b = text.partition("..")
    try:
        lo = int(a)
        hi = int(b) if sep else lo
    except ValueError:
        raise InputError(f"--seeds expects N or A..B, got {text!r}") from None
    if lo < 0:
        raise InputError(f"seeds must be non-negative, got {text!r}")
    if hi < lo:
        raise InputError(f"empty seed range {text!r}")
    return range(lo, hi + 1)


def parse_faults(text: str, n: int) -> int:
    """Comma-separated 1-based process numbers; empty means no faults."""
    m = 0
    for tok in filter(None, (t.strip().lstrip("p") for t in text.split(","))):
        if not tok.isdigit() or not 1 <= int(tok) <= n:
            raise InputError(f"--faults: {tok!r} is not a process in 1..{n}")
        m |= 1 << (int(tok) - 1)
    return m


def _sets(row) -> str:
    return " ".join(bs.fmt(s) for s in row)


class Out:
    """Human lines or tab-separated records, never both."""

    def __init__(self, records: bool, stream=None):
        self.records = records
        self.stream = stream or sys.stdout

    def human(self, line: str = "") -> None:
        if not self.records:
            print(line, file=self.stream)

    def record(self, *fields) -> None:
        if self.records:
            print("\t".join(str(f) for f in fields), file=self.stream)

    def report(self, r: P.Report) -> None:
        print(r.record() if self.records else r.human(), file=self.stream)


# -- analyze ----------------------------------------------------------------------


def cmd_analyze(args, out: Out) -> int:
    doc = load_system(args.system)
    fps = doc.fps
    n = fps.n
    ok, witness = check_b3(fps)
    out.human(f"system {args.system}: n={n}")
    out.human(f"B3: {'true' if ok else 'false'}")
    out.record("b3", str(ok).lower(), "" if ok else str(witness))
    if not ok:
        out.human(f"  witness: {witness}")
        return EXIT_VIOLATION
    if doc.quorums is not None:
        qs = QuorumSystem(n, doc.quorums)
        for check in (verify_consistency, verify_availability):
            good, w = check(qs, fps)
            name = check.__name__.removeprefix("verify_")
            out.human(f"{name}: {'true' if good else 'false'}")
            out.record(name, str(good).lower(), "" if good else str(w))
            if not good:
                out.human(f"  witness: {w}")
                return EXIT_VIOLATION
        out.human("quorums (explicit):")
    else:
        qs = canonical_quorums(fps)
        out.human("quorums (canonical):")
    for i, row in enumerate(qs.quorums):
        out.human(f"  p{i + 1}: {_sets(row)}")
        out.record("quorums", f"p{i + 1}", _sets(row))
    out.human("kernels:")
    for i, row in enumerate(qs.kernels.kernels):
        out.human(f"  p{i + 1}: {_sets(row)}")
        out.record("kernels", f"p{i + 1}", _sets(row))

    if args.faults is not None:
        faults = parse_faults(args.faults, n)
        kinds = classify(fps, faults)
        depths = depth_map(qs, faults)
        guild = maximal_guild(qs, fps, faults)
        out.human(f"faults: {bs.fmt(faults)}")
        out.record("faults", bs.fmt(faults))
        out.human("process  class   depth")
        for i in range(n):
            out.human(f"  p{i + 1:<6} {kinds[i].value:<7} {fmt_depth(depths[i])}")
            out.record("process", f"p{i + 1}", kinds[i].value, fmt_depth(depths[i]))
        out.human(f"maximal guild: {'none' if guild is None else bs.fmt(guild)}")
        out.record("guild", "none" if guild is None else bs.fmt(guild))
        return EXIT_OK

    if n > ENUMERATION_LIMIT:
        out.human(f"tolerated system: skipped, needs 2^{n} fault sets")
        out.record("tolerated", "skipped")
        return EXIT_OK
    tol = tolerated_system(qs, fps)
    sym = tol if qs.origin.value == "canonical" else tolerated_system(canonical_quorums(fps), fps)
    q3 = check_q3(tol, n)
    covered, bad = _guild_faults_covered(qs, fps, tol)
    out.human(f"tolerated system: {_sets(tol) or '(empty)'}")
    out.human(f"symmetric reduction: {_sets(sym) or '(empty)'}")
    out.human(f"tolerated system is Q3: {str(q3).lower()}")
    out.human(f"every fault set with a guild is tolerated: {str(covered).lower()}")
    if not covered:
        out.human(f"  counterexample: {bs.fmt(bad)}")
    out.record("tolerated", _sets(tol))
    out.record("symmetric", _sets(sym))
    out.record("q3", str(q3).lower())
    out.record("guild-covered", str(covered).lower(), "" if covered else bs.fmt(bad))
    return EXIT_OK if q3 and covered else EXIT_VIOLATION


def _guild_faults_covered(qs, fps, tol) -> tuple[bool, int | None]:
    """Every fault set whose execution has a guild is contained in a tolerated set."""
    for faults in range(1 << fps.n):
        if maximal_guild(qs, fps, faults) and not any(faults & ~t == 0 for t in tol):
            return False, faults
    return True, None


# -- run ---------------------------------------------------------------------------


def _scenario_from_args(args) -> tuple[Scenario, dict]:
    sc = load_scenario(args.scenario)
    checks = load_checks(args.scenario)
    changes = {}
    if getattr(args, "faults", None) is not None:
        changes["faults"] = parse_faults(args.faults, sc.n)
    if getattr(args, "horizon", None) is not None:
        changes["horizon"] = args.horizon
    if getattr(args, "schedule", None) is not None:
        changes["schedule"] = parse_schedule(args.schedule)
    if changes:
        sc = sc.replace(**changes)
    if getattr(args, "d", None) is not None:
        checks["d"] = args.d
    if getattr(args, "d_prime", None) is not None:
        checks["d_prime"] = args.d_prime
    sc.validate()
    return sc, checks


def _run_one(sc: Scenario):
    return run(sc)


def cmd_run(args, out: Out) -> int:
    sc, checks = _scenario_from_args(args)
    seeds = parse_seeds(args.seeds) if args.seeds else range(sc.seed, sc.seed + 1)
    scenarios = [sc.replace(seed=s) for s in seeds]
    if args.jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            traces = list(pool.map(_run_one, scenarios, chunksize=max(1, len(scenarios) // (4 * args.jobs))))
    else:
        traces = [run(s) for s in scenarios]
    outdir = Path(args.out) if args.out else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
    stem = sc.name or Path(args.scenario).stem
    for s, t in zip(seeds, traces):
        if outdir:
            (outdir / f"{stem}-s{s}.trace").write_text(t.to_text())
        if not t.complete:
            out.human(f"seed {s}: horizon exhausted after {t.delivered} deliveries, {t.pending} pending")
            out.record("horizon", s, t.delivered, t.pending)
    reports = P.check_all(traces, checks)
    done = sum(1 for t in traces if t.complete)
    out.human(f"{stem}: {len(traces)} traces, {done} complete")
    for r in reports:
        out.report(r)
    if outdir:
        summary = "".join(r.record() + "\n" for r in reports)
        (outdir / f"{stem}.summary").write_text(summary)
    return P.exit_code(reports)


# -- explore ------------------------------------------------------------------------


def cmd_explore(args, out: Out) -> int:
    sc, checks = _scenario_from_args(args)
    bound = args.bound if args.bound is not None else sc.horizon
    dd = dict(P.DEFAULT_DEPTHS.get(sc.protocol, {}))
    dd.update(checks)
    try:
        res = explore(sc, bound, dd.get("d", 6), cap=args.cap)
    except ExplosionGuard as exc:
        raise InputError(str(exc)) from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out.human(f"explored {res.states} states to depth {bound}: {res.leaves} leaves, "
              f"{res.truncated_leaves} cut by the bound, {res.binding_checks} binding checks")
    out.record("explored", res.states, res.leaves, res.truncated_leaves, res.binding_checks)
    reports = P.check_bca(res, dd.get("d_prime", 2), dd.get("d", 6), binding=True)
    for r in reports:
        out.report(r)
    return P.exit_code(reports)


# -- replay ---------------------------------------------------------------------------


def _first_difference(a: str, b: str) -> tuple[int, str, str] | None:
    la, lb = a.splitlines(), b.splitlines()
    for i, (x, y) in enumerate(zip(la, lb), start=1):
        if x != y:
            return i, x, y
    if len(la) != len(lb):
        i = min(len(la), len(lb)) + 1
        return i, la[i - 1] if i <= len(la) else "<end of file>", lb[i - 1] if i <= len(lb) else "<end of file>"
    if a != b:
        return len(la), "<trailing bytes differ>", ""
    return None


def cmd_replay(args, out: Out) -> int:
    code = EXIT_OK
    for path in args.traces:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputError(f"{path}: {exc.strerror}") from None
        try:
            trace = parse_trace(text)
            sc = trace.scenario()
        except (TraceFormatError, ValidationError) as exc:
            raise InputError(f"{path}: {exc}") from None
        if sc.digest() != trace.digest:
            out.human(f"{path}: scenario digest mismatch (header says {trace.digest}, scenario hashes to {sc.digest()})")
            out.record("replay", path, "digest-mismatch", trace.digest, sc.digest())
            code = EXIT_VIOLATION
            continue
        fresh = run(sc).to_text()
        diff = _first_difference(text, fresh)
        if diff is None:
            out.human(f"{path}: identical ({len(text.encode())} bytes)")
            out.record("replay", path, "identical")
        else:
            line, theirs, ours = diff
            out.human(f"{path}: diverges at line {line}")
            out.human(f"  file:   {theirs}")
            out.human(f"  replay: {ours}")
            out.record("replay", path, "diverged", line, theirs, ours)
            code = EXIT_VIOLATION
            continue
        checks = {}
        if args.d is not None:
            checks["d"] = args.d
        reports = P.check_all([trace], checks)
        for r in reports:
            out.report(r)
        code = max(code, P.exit_code(reports))
    return code


# -- fixtures ----------------------------------------------------------------------------


def cmd_fixtures(args, out: Out) -> int:
    from .fixtures import write_fixtures

    for path in write_fixtures(Path(args.out)):
        out.human(str(path))
        out.record("wrote", path)
    return EXIT_OK


# -- entry point ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asymtrust", description=__doc__.splitlines()[0])
    parser.add_argument("--records", action="store_true", help="tab-separated machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="quorums, kernels, depths and guilds of a system file")
    a.add_argument("system")
    a.add_argument("--faults", help="comma-separated faulty processes, e.g. 5,6")
    a.set_defaults(func=cmd_analyze)

    def sim_flags(p):
        p.add_argument("scenario")
        p.add_argument("--faults")
        p.add_argument("--horizon", type=int)
        p.add_argument("--schedule", choices=["fifo", "random", "adversarial"])
        p.add_argument("--d", type=int, help="depth for the checkers")
        p.add_argument("--d-prime", dest="d_prime", type=int, help="lower depth for two-level properties")

    r = sub.add_parser("run", help="simulate a scenario over a seed range and check properties")
    sim_flags(r)
    r.add_argument("--seeds", help="N or A..B inclusive (default: the scenario's seed)")
    r.add_argument("--out", help="directory for traces and the summary")
    r.add_argument("--jobs", type=int, default=1, help="worker processes")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("explore", help="enumerate every delivery order of a crusader-agreement scenario")
    sim_flags(e)
    e.add_argument("--bound", type=int, help="deliveries per path (default: the horizon)")
    e.add_argument("--cap", type=int, default=5_000_000, help="give up after this many states")
    e.set_defaults(func=cmd_explore)

    p = sub.add_parser("replay", help="re-execute traces and compare byte for byte")
    p.add_argument("traces", nargs="+")
    p.add_argument("--d", type=int, help="depth for the checkers")
    p.set_defaults(func=cmd_replay)

    f = sub.add_parser("fixtures", help="write the bundled systems and scenarios")
    f.add_argument("--out", default="fixtures")
    f.set_defaults(func=cmd_fixtures)

    for sp in (a, r, e, p, f):
        sp.add_argument("--records", action="store_true", default=argparse.SUPPRESS,
                        help="tab-separated machine-readable output")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Out(args.records)
    try:
        return args.func(args, out)
    except (InputError, SystemFileError, ValidationError, B3Violation) as exc:
        print(f"asymtrust: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
