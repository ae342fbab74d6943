"""Command-line front end.

Exit codes: 0, 1, 2 are the verdicts BIREACHABLE, NOT_BIREACHABLE, UNKNOWN
for ``decide``; 0 means success for the other subcommands (``corpus``
returns 1 on any disagreement).  Usage and input errors exit with 3.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .conditions import check_phi1, check_phi2
from .coverability import DEFAULT_MAX_DEPTH, DEFAULT_MAX_NODES, ROUTES, CoverCapExceeded, compute_cover
from .dsl import DslError, Instance, parse, parse_configurations, parse_marking, render
from .model import Configuration, PetriNet, compile_petri, normalize, orbit_counts
from .msum import MsumInstance, YVector, solve
from .oracle import OracleBudget, bireach_oracle
from .reduction import EXIT_CODES, DecideConfig, decide
from .stategraph import closure_of
from .vectors import DataVector

SCHEMA_VERSION = 1
USAGE_ERROR = 3
ENV_MSUM_BUDGET = "BIREACH_MSUM_BUDGET"
ENV_COVER_CAP = "BIREACH_COVER_CAP"


class UsageError(Exception):
    pass


# -- output ---------------------------------------------------------------------

def _plain_json(x):
    if isinstance(x, float) and math.isinf(x):
        return "ω"
    if isinstance(x, dict):
        return {str(k): _plain_json(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain_json(v) for v in x]
    return x


def dumps(payload: dict) -> str:
    body = {"schema": SCHEMA_VERSION, **payload}
    return json.dumps(_plain_json(body), sort_keys=True, indent=2, ensure_ascii=False)


def _emit(args, payload: dict, pretty_lines):
    if args.json:
        print(dumps(payload))
    else:
        for line in pretty_lines:
            print(line)


# -- input ----------------------------------------------------------------------

def _read_instance(path: str) -> tuple[Instance, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror or e}") from None
    try:
        return parse(text, allow_reserved=True), text
    except DslError as e:
        raise UsageError(f"{path}: {e}") from None


def _problem(args, need_target=True):
    """(net, src, tgt, source text) with --src/--tgt overriding the file."""
    inst, text = _read_instance(args.net)
    src_txt = getattr(args, "src", None)
    tgt_txt = getattr(args, "tgt", None)
    try:
        if isinstance(inst.net, PetriNet):
            pn = inst.net
            if src_txt is not None:
                pn = dataclasses.replace(pn, marking=parse_marking(pn, src_txt))
            if tgt_txt is not None:
                pn = dataclasses.replace(pn, target=parse_marking(pn, tgt_txt))
            net, src, tgt = compile_petri(pn)
        else:
            net, src, tgt = inst.net, inst.source, inst.target
            if src_txt is not None or tgt_txt is not None:
                texts = [t for t in (src_txt, tgt_txt) if t is not None]
                parsed = parse_configurations(net, *texts)
                if src_txt is not None:
                    src = parsed.pop(0)
                if tgt_txt is not None:
                    tgt = parsed.pop(0)
    except (DslError, ValueError) as e:
        raise UsageError(str(e)) from None
    if src is None:
        raise UsageError("no source configuration (give --src or a source line)")
    if need_target and tgt is None:
        raise UsageError("no target configuration (give --tgt or a target line)")
    return net, src, tgt, text


def _env_int(name: str, default):
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"environment variable {name} must be an integer") from None


def _decide_config(args) -> DecideConfig:
    budget = args.msum_budget if args.msum_budget is not None else _env_int(ENV_MSUM_BUDGET, None)
    cap = args.cover_cap if args.cover_cap is not None else _env_int(ENV_COVER_CAP, DEFAULT_MAX_NODES)
    return DecideConfig(msum_budget=budget, cover_max_nodes=cap,
                        assume_complete=args.assume_complete, route=args.route)


def _config_json(cfg: DecideConfig) -> dict:
    return {"msum_budget": cfg.msum_budget, "cover_cap": cfg.cover_max_nodes,
            "cover_depth": cfg.cover_max_depth, "assume_complete": cfg.assume_complete,
            "route": cfg.route}


# -- subcommands ------------------------------------------------------------------

def cmd_decide(args) -> int:
    net, src, tgt, text = _problem(args)
    cfg = _decide_config(args)
    t0 = time.perf_counter()
    v = decide(net, src, tgt, cfg)
    wall = time.perf_counter() - t0
    payload = {"command": "decide", "net": net.name, **v.to_json()}
    if args.trace:
        manifest = {"tool_version": __version__,
                    "input_sha256": hashlib.sha256(text.encode()).hexdigest(),
                    "config": _config_json(cfg), "verdict": v.kind, "reason": v.reason,
                    "trace": v.trace, "wall_time_s": round(wall, 3)}
        try:
            Path(args.trace).write_text(dumps(manifest) + "\n", encoding="utf-8")
        except OSError as e:
            raise UsageError(f"cannot write {args.trace}: {e.strerror or e}") from None
    lines = [f"{v.kind}: {v.reason}"]
    for i, r in enumerate(v.trace, 1):
        b = "" if r["bound"] is None else f" B={r['bound']}"
        lines.append(f"  {i}. {r['kind']} {r['item']}{b}  rank {tuple(r['rank_before'])} -> "
                     f"{tuple(r['rank_after'])}")
    _emit(args, payload, lines)
    return EXIT_CODES[v.kind]


def cmd_compile(args) -> int:
    inst, _ = _read_instance(args.net)
    if not isinstance(inst.net, PetriNet):
        raise UsageError("compile expects a Petri net file")
    net, src, tgt = compile_petri(inst.net)
    counts = orbit_counts(inst.net)
    payload = {"command": "compile", "net": net.name, "orbit_counts": counts,
               "orbits": len(net.transitions), "registers": list(net.registers),
               "locations": list(net.locations),
               "transitions": [{"name": t.name, "orbit": repr(t)} for t in net.transitions]}
    _emit(args, payload, [render(net, src, tgt).rstrip()])
    return 0


def cmd_normalize(args) -> int:
    net, src, tgt, _ = _problem(args)
    n2, q, q2 = normalize(net, src, tgt)
    payload = {"command": "normalize", "net": n2.name, "rank": list(n2.rank()),
               "source": repr(q), "target": repr(q2),
               "transitions": [repr(t) for t in n2.transitions]}
    _emit(args, payload, [render(n2, Configuration(q, DataVector()), Configuration(q2, DataVector())).rstrip()])
    return 0


def cmd_saturate(args) -> int:
    inst, _ = _read_instance(args.net)
    net = compile_petri(inst.net)[0] if isinstance(inst.net, PetriNet) else inst.net
    table = closure_of(net)
    payload = {"command": "saturate", "net": net.name, "edges": table.to_json()}
    lines = [f"{a} ->* {b}  (length {table.lengths[(a, b)]})" for a, b in table.orbits()]
    _emit(args, payload, lines)
    return 0


def cmd_cover(args) -> int:
    args.src = args.from_
    net, src, _, _ = _problem(args, need_target=False)
    try:
        res = compute_cover(net, src, args.route, args.max_nodes, args.max_depth)
    except CoverCapExceeded as e:
        _emit(args, {"command": "cover", "net": net.name, "unknown": str(e)}, [f"UNKNOWN: {e}"])
        return 2
    payload = {"command": "cover", "net": net.name, "route": args.route,
               "ideals": res.to_json()}
    _emit(args, payload, [repr(i) for i in res.ideals])
    return 0


def cmd_conditions(args) -> int:
    net, src, tgt, _ = _problem(args)
    n2, q, q2 = normalize(net, src, tgt)
    phi1 = check_phi1(n2, q, q2, args.msum_budget, args.assume_complete)
    phi2 = check_phi2(n2, q, q2, args.route, args.cover_cap or DEFAULT_MAX_NODES, DEFAULT_MAX_DEPTH)
    payload = {"command": "conditions", "net": n2.name, "phi1": phi1.to_json(),
               "phi1_holds": phi1.holds(), "phi2": phi2.to_json(), "phi2_holds": phi2.holds()}
    lines = [f"usefulness: {'holds' if phi1.holds() else 'fails'}"]
    lines += [f"  {v.status:8} {v.orbit}" for v in phi1.verdicts]
    lines.append(f"pumpability: {'holds' if phi2.holds() else 'fails'} (bound {phi2.bound_B})")
    if phi2.unknown:
        lines.append(f"  unknown: {phi2.unknown}")
    for p in phi2.places:
        lines.append(f"  {p.place}: pumpable={list(p.pumpable)} bound={p.bound}")
    _emit(args, payload, lines)
    return 0


def cmd_msum(args) -> int:
    try:
        data = json.loads(Path(args.instance).read_text(encoding="utf-8"))
        inst = MsumInstance(tuple(YVector.from_json(g) for g in data["generators"]),
                            YVector.from_json(data["target"]))
    except OSError as e:
        raise UsageError(f"cannot read {args.instance}: {e.strerror or e}") from None
    except (ValueError, KeyError, TypeError) as e:
        raise UsageError(f"{args.instance}: malformed instance ({e})") from None
    try:
        out = solve(inst, args.budget, certified=args.certified)
    except ValueError as e:
        raise UsageError(str(e)) from None
    _emit(args, {"command": "msum", **out.to_json()}, [f"{out.kind} (budget {out.budget})"]
          + [f"  {k} x generator {g} under {dict(m)}" for g, m, k in out.witness])
    return 0


def cmd_oracle(args) -> int:
    net, src, tgt, _ = _problem(args)
    try:
        budget = OracleBudget(args.max_tokens, args.max_atoms, args.max_depth, args.max_states)
    except ValueError as e:
        raise UsageError(str(e)) from None
    ans = bireach_oracle(net, src, tgt, budget)
    payload = {"command": "oracle", "net": net.name, "verdict": ans.verdict,
               "forward": ans.forward.to_json(), "backward": ans.backward.to_json()}
    lines = [f"verdict: {ans.verdict or 'inconclusive'}"]
    for name, a in (("forward", ans.forward), ("backward", ans.backward)):
        lines.append(f"{name}: {a.kind} after {a.states} states"
                     + ("" if a.found else f" (complete={a.complete})"))
        for s, v in a.run or ():
            lines.append(f"    {s} {v}")
    _emit(args, payload, lines)
    return 0


# -- corpus runner ------------------------------------------------------------------

def _run_entry(path: str, cfg: DecideConfig, oracle_budget: OracleBudget) -> dict:
    row = {"file": os.path.basename(path)}
    try:
        inst = parse(Path(path).read_text(encoding="utf-8"), allow_reserved=True)
        net, src, tgt = inst.problem()
    except (OSError, DslError, ValueError) as e:
        return {**row, "status": "error", "error": str(e)}
    row["expect"] = inst.meta.get("expect")
    if src is None or tgt is None:
        return {**row, "status": "error", "error": "missing source or target"}
    t0 = time.perf_counter()
    v = decide(net, src, tgt, cfg)
    row["decide_s"] = round(time.perf_counter() - t0, 3)
    row["verdict"] = v.kind
    row["steps"] = len(v.trace)
    row["oracle"] = None
    if inst.meta.get("oracle", "").strip() != "skip":
        row["oracle"] = bireach_oracle(net, src, tgt, oracle_budget).verdict
    problems = []
    if row["expect"] and v.kind != "UNKNOWN" and v.kind != row["expect"]:
        problems.append(f"expected {row['expect']}")
    if row["oracle"] and v.kind != "UNKNOWN" and v.kind != row["oracle"]:
        problems.append(f"oracle says {row['oracle']}")
    if row["expect"] and row["oracle"] and row["expect"] != row["oracle"]:
        problems.append("annotation contradicts the oracle")
    row["status"] = "disagree: " + "; ".join(problems) if problems else (
        "unknown" if v.kind == "UNKNOWN" else "agree")
    return row


def run_corpus(directory, cfg: DecideConfig | None = None,
               oracle_budget: OracleBudget | None = None, jobs: int = 1) -> list[dict]:
    cfg = cfg or DecideConfig()
    oracle_budget = oracle_budget or OracleBudget()
    paths = sorted(str(p) for p in Path(directory).iterdir()
                   if p.suffix in (".dvass", ".petri"))
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(_run_entry, paths, [cfg] * len(paths),
                               [oracle_budget] * len(paths)))
    else:
        rows = [_run_entry(p, cfg, oracle_budget) for p in paths]
    return rows


def cmd_corpus(args) -> int:
    d = Path(args.dir)
    if not d.is_dir():
        raise UsageError(f"{args.dir} is not a directory")
    rows = run_corpus(d, _decide_config(args), OracleBudget(max_states=args.max_states),
                      args.jobs)
    bad = [r for r in rows if r["status"].startswith(("disagree", "error"))]
    summary = {"entries": len(rows), "agree": sum(r["status"] == "agree" for r in rows),
               "unknown": sum(r["status"] == "unknown" for r in rows), "problems": len(bad)}
    # timings vary between runs; keep them out of the JSON so it stays byte-stable
    stable = [{k: v for k, v in r.items() if k != "decide_s"} for r in rows]
    lines = [f"{'file':28} {'expect':18} {'verdict':18} {'oracle':18} {'time':>7}  status"]
    for r in rows:
        lines.append(f"{r['file']:28} {str(r.get('expect')):18} {str(r.get('verdict')):18} "
                     f"{str(r.get('oracle')):18} {r.get('decide_s', 0):7.2f}  {r['status']}")
    lines.append(f"{summary['entries']} entries, {summary['agree']} agree, "
                 f"{summary['unknown']} unknown, {summary['problems']} problems")
    lines += [f"PROBLEM {r['file']}: {r.get('error') or r['status']}" for r in bad]
    _emit(args, {"command": "corpus", "rows": stable, "summary": summary}, lines)
    return 1 if bad else 0


# -- argument parsing ---------------------------------------------------------------

def _add_decide_knobs(p):
    p.add_argument("--msum-budget", type=int, default=None,
                   help=f"atom pool bound for Multiset Sum (default: ${ENV_MSUM_BUDGET} or automatic)")
    p.add_argument("--cover-cap", type=int, default=None,
                   help=f"node cap of each coverability tree (default: ${ENV_COVER_CAP} or {DEFAULT_MAX_NODES})")
    p.add_argument("--assume-complete", action="store_true",
                   help="treat budget-bounded negatives as certified")
    p.add_argument("--route", choices=ROUTES, default="direct")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bireach", description="Bi-reachability in data VASS.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(name, helptext, net=True, endpoints=True):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--json", action="store_true", help="emit JSON")
        if net:
            p.add_argument("--net", required=True, help="net file (.dvass or .petri)")
        if endpoints:
            p.add_argument("--src", help="source configuration (overrides the file)")
            p.add_argument("--tgt", help="target configuration (overrides the file)")
        return p

    p = common("decide", "decide bi-reachability")
    _add_decide_knobs(p)
    p.add_argument("--trace", help="write a run manifest with the reduction trace")
    p.set_defaults(func=cmd_decide)

    p = common("compile", "compile a Petri net with data to a data VASS", endpoints=False)
    p.set_defaults(func=cmd_compile)

    p = common("normalize", "move endpoint data into the net")
    p.set_defaults(func=cmd_normalize)

    p = common("saturate", "closure of the state graph", endpoints=False)
    p.set_defaults(func=cmd_saturate)

    p = common("cover", "coverability ideals", endpoints=False)
    p.add_argument("--from", dest="from_", help="start configuration (default: source)")
    p.add_argument("--route", choices=ROUTES, default="dvas",
                   help="dvas: reduce to one location first (default); direct: tree on the net")
    p.add_argument("--max-nodes", type=int, default=DEFAULT_MAX_NODES)
    p.add_argument("--max-depth", type=int, default=DEFAULT_MAX_DEPTH)
    p.set_defaults(func=cmd_cover)

    p = common("conditions", "usefulness and pumpability reports")
    _add_decide_knobs(p)
    p.set_defaults(func=cmd_conditions)

    p = common("msum", "solve a Multiset Sum instance", net=False, endpoints=False)
    p.add_argument("--instance", required=True, help="JSON file with generators and target")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--certified", action="store_true",
                   help="report exhaustion of the budget as certified")
    p.set_defaults(func=cmd_msum)

    p = common("oracle", "bounded breadth-first bi-reachability search")
    p.add_argument("--max-tokens", type=int, default=OracleBudget.max_tokens_per_place)
    p.add_argument("--max-atoms", type=int, default=OracleBudget.max_total_atoms)
    p.add_argument("--max-depth", type=int, default=OracleBudget.max_depth)
    p.add_argument("--max-states", type=int, default=OracleBudget.max_states)
    p.set_defaults(func=cmd_oracle)

    p = common("corpus", "run decide and the oracle over a directory", net=False, endpoints=False)
    p.add_argument("dir", help="directory of .dvass/.petri files")
    _add_decide_knobs(p)
    p.add_argument("--max-states", type=int, default=OracleBudget.max_states)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_corpus)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else USAGE_ERROR
    try:
        return args.func(args)
    except UsageError as e:
        print(f"bireach: error: {e}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
