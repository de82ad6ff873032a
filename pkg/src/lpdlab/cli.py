"""Command-line surface: gen-code, decode, witness, matching, threshold, montecarlo.

Exit codes: 0 on success, 1 on operational errors (bad input, solver
failure), 2 when a certificate-chain invariant is violated.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import exponents
from .channel import FlipPattern, gamma_from_flips
from .factor_graph import EnsembleParams, read_alist, sample_bit_regular, write_alist
from .harness import ExperimentConfig, emit_results, run_montecarlo
from .lp_decoder import DecoderConfig, build_full_relaxation, decode_lp, write_lp_file
from .matching import find_contraction_bruteforce, find_pq_matching
from .witness import check_dual_witness, chi_interval, hyperflow_from_matching

CHAIN_VIOLATION_EXIT = 2


def _load_flips(spec: str) -> FlipPattern:
    """Accept an inline JSON object or a path to a JSON file."""
    text = spec
    if not spec.lstrip().startswith("{"):
        with open(spec, "r", encoding="ascii") as fh:
            text = fh.read()
    return FlipPattern.from_json(text)


def _emit(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_gen_code(args) -> int:
    params = EnsembleParams(rate=args.rate, d_v=args.dv, n=args.n, seed=args.seed)
    graph = sample_bit_regular(params)
    write_alist(graph, args.out)
    dup = len(set(graph.var_adj)) < graph.n
    _emit(
        {
            "n": graph.n,
            "m": graph.m,
            "d_v": args.dv,
            "rate": args.rate,
            "seed": args.seed,
            "alist": args.out,
            "duplicate_neighborhoods_allowed": True,
            "duplicate_neighborhoods_present": dup,
        },
        args.json_out,
    )
    return 0


def _cmd_decode(args) -> int:
    graph = read_alist(args.alist)
    flips = _load_flips(args.flips)
    gamma = gamma_from_flips(flips)
    cfg = DecoderConfig(mode=args.mode, exact=args.exact)
    result = decode_lp(graph, gamma, cfg)
    if args.emit_lp:
        write_lp_file(graph, gamma, build_full_relaxation(graph), args.emit_lp)
    _emit(
        {
            "status": result.status,
            "objective": float(result.objective),
            "y": [float(v) for v in result.y],
            "cuts_added": result.cuts_added,
            "iterations": result.iterations,
            "rounds": result.rounds,
            "decoded_all_zero": bool(not result.rounded.any()),
        },
        args.json_out,
    )
    return 0


def _cmd_witness(args) -> int:
    graph = read_alist(args.alist)
    flips = _load_flips(args.flips)
    gamma = gamma_from_flips(flips)
    matching = find_pq_matching(graph, flips, args.p, args.q)
    lo, hi = chi_interval(args.p, args.q, graph.max_var_degree)
    chi = args.chi if args.chi is not None else 0.5 * (lo + hi)
    payload: dict = {
        "p": args.p,
        "q": args.q,
        "chi": chi,
        "chi_interval": [lo, hi],
        "matching": None,
        "tau": None,
        "verdict": "no-matching",
    }
    code = 0
    if matching is not None:
        tau = hyperflow_from_matching(graph, flips, matching, args.p, args.q, chi)
        check = check_dual_witness(graph, gamma, tau)
        payload["matching"] = {str(j): sorted(cs) for j, cs in matching.assignment.items()}
        payload["tau"] = {f"{i},{a}": w for (i, a), w in sorted(tau.tau.items())}
        payload["verdict"] = "certified" if check.ok else "invalid-witness"
        if not check.ok:
            payload["violations"] = [list(v) for v in check.violations]
            code = CHAIN_VIOLATION_EXIT
    _emit(payload, args.json_out)
    return code


def _cmd_matching(args) -> int:
    graph = read_alist(args.alist)
    flips = _load_flips(args.flips)
    matching = find_pq_matching(graph, flips, args.p, args.q)
    payload: dict = {
        "p": args.p,
        "q": args.q,
        "contraction_inequality": "strict",
        "matching": None,
        "contraction": None,
    }
    if matching is not None:
        payload["matching"] = {str(j): sorted(cs) for j, cs in matching.assignment.items()}
    else:
        witness = find_contraction_bruteforce(graph, flips, args.p, args.q)
        if witness is not None:
            payload["contraction"] = {
                "s1": list(witness.s1),
                "s2": list(witness.s2),
                "neighborhood_size": witness.neighborhood_size,
                "total_requests": witness.total_requests,
            }
    _emit(payload, args.json_out)
    return 0


def _cmd_threshold(args) -> int:
    grid = tuple(args.eps2) if args.eps2 else exponents.DEFAULT_EPS2_GRID
    if args.search:
        res = exponents.alpha_crit_search(
            rate=args.rate, d_v=args.dv, p=args.p, q=args.q, eps1=args.eps1, eps2_grid=grid
        )
        payload = {
            "schema_version": 1,
            "mode": "search",
            "alpha_star": res.alpha_star,
            "bracket": list(res.bracket),
            "verified_below": [[a, ok] for a, ok in res.verified_below],
            "report_at_star": res.report_at_star.to_json_dict() if res.report_at_star else None,
        }
    else:
        params = exponents.ExponentParams(
            rate=args.rate, d_v=args.dv, p=args.p, q=args.q, alpha=args.alpha,
            eps1=args.eps1, eps2_grid=grid,
        )
        report = exponents.certificate(params)
        payload = {"schema_version": 1, "mode": "alpha"} | report.to_json_dict()
    _emit(payload, args.json_out)
    return 0


def _cmd_montecarlo(args) -> int:
    with open(args.config, "r", encoding="ascii") as fh:
        cfg_dict = json.load(fh)
    if args.seed is not None:
        cfg_dict["master_seed"] = args.seed
    if args.workers is not None:
        cfg_dict["workers"] = args.workers
    config = ExperimentConfig.from_json_dict(cfg_dict)
    results = run_montecarlo(config)
    out_dir = args.out or "lpdlab-results"
    paths = emit_results(results, out_dir)
    print(json.dumps({
        "out": out_dir,
        "files": paths,
        "chain_violations": results.chain_violations,
        "summaries": [dataclasses.asdict(s) for s in results.summaries],
    }, indent=2, sort_keys=True))
    return CHAIN_VIOLATION_EXIT if results.chain_violations else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpdlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-code", help="sample a bit-regular code and write it as alist")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--rate", type=float, default=0.5)
    g.add_argument("--dv", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--json-out", default=None)
    g.set_defaults(func=_cmd_gen_code)

    d = sub.add_parser("decode", help="LP-decode a flip pattern over an alist code")
    d.add_argument("--alist", required=True)
    d.add_argument("--flips", required=True, help="JSON file or inline {'n':..,'flipped':[..]}")
    d.add_argument("--mode", choices=["cuts", "full"], default="cuts")
    d.add_argument("--exact", action="store_true", help="rational arithmetic end to end")
    d.add_argument("--emit-lp", default=None)
    d.add_argument("--json-out", default=None)
    d.set_defaults(func=_cmd_decode)

    w = sub.add_parser("witness", help="matching -> hyperflow -> dual witness certificate")
    w.add_argument("--alist", required=True)
    w.add_argument("--flips", required=True)
    w.add_argument("--p", type=int, required=True)
    w.add_argument("--q", type=int, required=True)
    w.add_argument("--chi", type=float, default=None)
    w.add_argument("--json-out", default=None)
    w.set_defaults(func=_cmd_witness)

    m = sub.add_parser("matching", help="(p,q)-matching or a contraction witness")
    m.add_argument("--alist", required=True)
    m.add_argument("--flips", required=True)
    m.add_argument("--p", type=int, required=True)
    m.add_argument("--q", type=int, required=True)
    m.add_argument("--json-out", default=None)
    m.set_defaults(func=_cmd_matching)

    t = sub.add_parser("threshold", help="exponent certificate or alpha_crit search")
    t.add_argument("--rate", type=float, required=True)
    t.add_argument("--dv", type=int, required=True)
    t.add_argument("--p", type=int, required=True)
    t.add_argument("--q", type=int, required=True)
    mode = t.add_mutually_exclusive_group(required=True)
    mode.add_argument("--alpha", type=float, default=None)
    mode.add_argument("--search", action="store_true")
    t.add_argument("--eps1", type=float, default=0.0)
    t.add_argument("--eps2", type=float, nargs="*", default=None)
    t.add_argument("--json-out", default=None)
    t.set_defaults(func=_cmd_threshold)

    mc = sub.add_parser("montecarlo", help="run a seeded Monte Carlo sweep from a JSON config")
    mc.add_argument("--config", required=True)
    mc.add_argument("--seed", type=int, default=None)
    mc.add_argument("--out", default=None)
    mc.add_argument("--workers", type=int, default=None)
    mc.set_defaults(func=_cmd_montecarlo)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"lpdlab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
