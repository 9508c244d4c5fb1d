"""Command-line front end.

Exit codes: 0 when every requested verdict passes, 1 when one fails (including rejected input
files), 2 for usage errors, 3 for internal errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

PASS, FAIL, USAGE, INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _colour(text: str, ok: bool) -> str:
    if os.environ.get("FIMALL_COLOR", "").lower() in ("", "0", "no", "never", "false"):
        return text
    return f"\x1b[{32 if ok else 31}m{text}\x1b[0m"


def _diag(e: Exception) -> dict:
    d = {"error": type(e).__name__, "message": str(e)}
    line, col = getattr(e, "line", None), getattr(e, "col", None)
    if line is not None:
        d["span"] = {"line": line, "column": col}
    return d


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


# ---------------------------------------------------------------------------
# per-file work (top level so --jobs can pickle it)


def _check_file(path: str, validity: bool, explain: bool, depth: int | None) -> dict:
    from .derivation import check_local, load
    from .validity import check_validity, oracle_bounded_check

    rep = {"file": path, "verdicts": {}, "diagnostics": []}
    try:
        d = load(_read(path))
    except ValueError as e:
        rep["verdicts"]["local"] = False
        rep["diagnostics"].append(_diag(e))
        return rep
    errs = check_local(d)
    rep["verdicts"]["local"] = not errs
    rep["diagnostics"] += [{"error": "LocalCheckError", "message": str(x)} for x in errs]
    if validity and not errs:
        v = check_validity(d, local=False)
        rep["verdicts"]["validity"] = bool(v)
        rep["detail"] = v.describe() if explain else v.describe().splitlines()[0]
        if depth is not None:
            o = oracle_bounded_check(d, depth)
            rep["oracle"] = o.describe() if hasattr(o, "describe") else type(o).__name__
    return rep


def _program(path: str):
    from .session import parse_program
    return parse_program(_read(path))


def _typecheck_file(path: str, explain: bool) -> dict:
    from .session import check_typing, typecheck

    rep = {"file": path, "verdicts": {}, "diagnostics": []}
    try:
        prog = _program(path)
        typings = typecheck(prog)
    except ValueError as e:
        rep["verdicts"]["typecheck"] = False
        rep["diagnostics"].append(_diag(e))
        return rep
    errs = [e for td in typings.values() for e in check_typing(prog, td)]
    rep["verdicts"]["typecheck"] = not errs
    rep["definitions"] = sorted(typings)
    rep["diagnostics"] += [{"error": "SessionTypeError", "message": str(x)} for x in errs]
    return rep


def _guard_file(path: str, explain: bool, main: str | None = None) -> dict:
    from .session import guard_check, typecheck

    rep = {"file": path, "verdicts": {}, "diagnostics": []}
    try:
        prog = _program(path)
        names = [main] if main else None
        if main:
            prog.lookup(main)
        verdicts = guard_check(prog, typecheck(prog, names))
    except ValueError as e:
        rep["verdicts"]["typecheck"] = False
        rep["diagnostics"].append(_diag(e))
        return rep
    rep["guard"] = {}
    for name, v in verdicts.items():
        rep["verdicts"][name] = bool(v)
        rep["guard"][name] = v.describe() if explain or not v else type(v).__name__
    return rep


# ---------------------------------------------------------------------------
# subcommands


def _batch(fn, paths: list, jobs: int, *args) -> list:
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(fn, paths, *([a] * len(paths) for a in args)))
    return [fn(p, *args) for p in paths]


def cmd_check(ns) -> dict:
    for p in ns.files:
        _read(p)
    return {"files": _batch(_check_file, ns.files, ns.jobs, ns.validity, ns.explain, ns.depth)}


def cmd_validity(ns) -> dict:
    ns.validity = True
    return cmd_check(ns)


def cmd_typecheck(ns) -> dict:
    for p in ns.files:
        _read(p)
    return {"files": _batch(_typecheck_file, ns.files, ns.jobs, ns.explain)}


def cmd_guard(ns) -> dict:
    for p in ns.files:
        _read(p)
    return {"files": _batch(_guard_file, ns.files, ns.jobs, ns.explain, ns.main)}


def cmd_normalize(ns) -> dict:
    from .cutelim import FuelExhausted, eliminate_cuts
    from .derivation import DerivationError, check_local, load, show_script

    rep = {"file": ns.file, "verdicts": {}, "diagnostics": []}
    try:
        d = load(_read(ns.file))
        r = eliminate_cuts(d, ns.depth, fuel=ns.fuel)
    except (FuelExhausted, DerivationError, ValueError) as e:
        rep["verdicts"]["normalize"] = False
        rep["diagnostics"].append(_diag(e))
        return {"files": [rep]}
    if ns.trace:
        for e in r.events:
            print(json.dumps(e.to_json(), sort_keys=True))
    out = r.derivation
    ok = out.is_cut_free() and not check_local(out, allow_open=True)
    rep["verdicts"]["normalize"] = ok
    rep["treat_events"] = r.treat_events
    rep["nodes"] = len(out.nodes)
    rep["derivation"] = show_script(out)
    if ns.out_dir:
        from .report import normalize_report
        rep["outputs"] = [str(p) for p in normalize_report(Path(ns.out_dir), Path(ns.file).stem, r)]
    return {"files": [rep]}


def cmd_run(ns) -> dict:
    from .runtime import RuntimeFault, run_program

    rep = {"file": ns.file, "main": ns.main, "verdicts": {}, "diagnostics": []}
    try:
        prog = _program(ns.file)
        r = run_program(prog, ns.main, ns.budget, ns.seed)
    except (RuntimeFault, ValueError) as e:
        rep["verdicts"]["run"] = False
        rep["diagnostics"].append(_diag(e))
        return {"files": [rep]}
    rep.update(outcome=str(r.outcome), steps=r.steps, sends=len(r.trace), receives=len(r.receives),
               external_sends=r.external_sends, external_receives=r.external_receives)
    rep["verdicts"]["run"] = True
    if ns.trace_json:
        Path(ns.trace_json).write_text(json.dumps([m.to_json() for m in r.trace], indent=1) + "\n")
    if ns.out_dir:
        from .report import run_report
        rep["outputs"] = [str(p) for p in run_report(Path(ns.out_dir), f"{Path(ns.file).stem}.{ns.main}", r)]
    return {"files": [rep]}


def cmd_certify(ns) -> dict:
    from .encoder import certify

    rep = {"file": ns.file, "main": ns.main, "verdicts": {}, "diagnostics": []}
    try:
        prog = _program(ns.file)
        prog.lookup(ns.main)
        t = time.perf_counter()
        cert = certify(prog, ns.main, ns.run_budget, ns.normalize_depth, ns.seed)
        elapsed = time.perf_counter() - t
    except ValueError as e:
        rep["verdicts"]["certified"] = False
        rep["diagnostics"].append(_diag(e))
        return {"files": [rep]}
    s = cert.summary()
    rep["certificate"] = s
    rep["verdicts"]["certified"] = cert.ok
    if ns.explain and cert.star_derivation is not None and not cert.ok:
        rep["explain"] = cert.validity.describe() if cert.validity is not None else None
    if ns.out_dir:
        from .report import certify_report
        timings = _stage_timings(prog, ns, elapsed)
        rep["outputs"] = [str(p) for p in certify_report(Path(ns.out_dir), f"{Path(ns.file).stem}.{ns.main}",
                                                         s, timings)]
    return {"files": [rep]}


def _stage_timings(prog, ns, total: float) -> dict:
    """Re-run the stages one at a time to attribute the certification time."""
    from .encoder import build_star_derivation, lockstep_bisim
    from .session import guard_verdict, typecheck
    from .validity import check_validity

    out = {}
    t = time.perf_counter()
    td = typecheck(prog, [ns.main])[ns.main]
    guard_verdict(td)
    out["guard"] = time.perf_counter() - t
    t = time.perf_counter()
    star = build_star_derivation(prog, ns.main, td)
    out["star"] = time.perf_counter() - t
    t = time.perf_counter()
    check_validity(star, local=False)
    out["validity"] = time.perf_counter() - t
    t = time.perf_counter()
    lockstep_bisim(td, star)
    out["lockstep"] = time.perf_counter() - t
    rest = total - sum(out.values())
    if ns.normalize_depth is not None or ns.run_budget is not None:
        out["normalize+runtime"] = max(rest, 0.0)
    return out


# ---------------------------------------------------------------------------
# output


def _passed(report: dict) -> bool:
    return all(all(f["verdicts"].values()) and f["verdicts"] for f in report["files"])


def _text(report: dict) -> str:
    lines = []
    for f in report["files"]:
        ok = all(f["verdicts"].values()) and bool(f["verdicts"])
        head = f["file"] + (f" [{f['main']}]" if f.get("main") else "")
        lines.append(f"{head}: {_colour('PASS' if ok else 'FAIL', ok)}")
        for k, v in f["verdicts"].items():
            lines.append(f"  {k}: {_colour('ok' if v else 'fail', v)}")
        for key in ("detail", "explain"):
            if f.get(key):
                lines += ["  " + x for x in f[key].splitlines()]
        for key in ("oracle", "outcome", "treat_events"):
            if f.get(key) is not None:
                lines.append(f"  {key}: {f[key]}")
        for name, g in f.get("guard", {}).items():
            lines.append(f"  {name}: {g}")
        if "certificate" in f:
            for k, v in f["certificate"].items():
                if k not in ("main", "certified") and v:
                    lines.append(f"  {k}: {v}")
        if "derivation" in f:
            lines.append(f["derivation"].rstrip("\n"))
        for d in f["diagnostics"]:
            span = d.get("span")
            where = f" ({d['span']['line']}:{d['span']['column']})" if span else ""
            lines.append(f"  {d['error']}{where}: {d['message']}")
        for p in f.get("outputs", []):
            lines.append(f"  wrote {p}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--report", choices=("text", "json"), default="text")
    common.add_argument("--explain", action="store_true", help="print witness threads and cycles")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for batch files")

    p = _Parser(prog="fimall", description="Circular proofs with fixed points, and session-typed processes.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", parents=[common], help="local rule check, optionally validity")
    c.add_argument("files", nargs="+")
    c.add_argument("--validity", action="store_true")
    c.add_argument("--depth", type=int, help="also run the bounded oracle to this depth")
    c.set_defaults(fn=cmd_check)

    v = sub.add_parser("validity", parents=[common], help="same as check --validity")
    v.add_argument("files", nargs="+")
    v.add_argument("--depth", type=int, help="also run the bounded oracle to this depth")
    v.set_defaults(fn=cmd_validity)

    n = sub.add_parser("normalize", parents=[common], help="cut elimination to a given depth")
    n.add_argument("file")
    n.add_argument("--depth", type=int, required=True)
    n.add_argument("--fuel", type=int, default=100_000)
    n.add_argument("--trace", action="store_true", help="reduction events as JSON lines")
    n.add_argument("--out-dir")
    n.set_defaults(fn=cmd_normalize)

    t = sub.add_parser("typecheck", parents=[common], help="typecheck a session-typed program")
    t.add_argument("files", nargs="+")
    t.set_defaults(fn=cmd_typecheck)

    g = sub.add_parser("guard", parents=[common], help="guard verdict per definition")
    g.add_argument("files", nargs="+")
    g.add_argument("--main")
    g.set_defaults(fn=cmd_guard)

    r = sub.add_parser("run", parents=[common], help="execute a definition")
    r.add_argument("file")
    r.add_argument("--main", required=True)
    r.add_argument("--budget", type=int, default=10_000)
    r.add_argument("--seed", type=int)
    r.add_argument("--trace-json", help="write deposited messages to this file")
    r.add_argument("--out-dir")
    r.set_defaults(fn=cmd_run)

    k = sub.add_parser("certify", parents=[common], help="strong-progress certificate")
    k.add_argument("file")
    k.add_argument("--main", required=True)
    k.add_argument("--normalize-depth", type=int)
    k.add_argument("--run-budget", type=int)
    k.add_argument("--seed", type=int)
    k.add_argument("--out-dir")
    k.set_defaults(fn=cmd_certify)
    return p


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        if getattr(ns, "jobs", 1) < 1:
            raise UsageError("--jobs must be at least 1")
        report = {"command": ns.command, **ns.fn(ns)}
    except UsageError as e:
        print(f"fimall: {e}", file=sys.stderr)
        return USAGE
    except Exception as e:  # anything else is our bug
        print(f"fimall: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return INTERNAL
    ok = _passed(report)
    report["ok"] = ok
    if ns.report == "json":
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(_text(report))
    return PASS if ok else FAIL


if __name__ == "__main__":
    sys.exit(main())
