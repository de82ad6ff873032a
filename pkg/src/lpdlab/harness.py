"""Monte Carlo experiment orchestration and result persistence.

Each trial samples a fresh code and flip pattern (the joint distribution
over codes and errors), runs the LP decoder, searches for a (p,q)-matching,
routes the implied hyperflow, and checks the certificate chain

    matching found  =>  hyperflow is a valid witness  =>  LP returns all-zero.

Per-trial RNGs derive from (master seed, alpha index, trial index), so any
execution order or worker count reproduces the same records, and output
files are byte-stable across runs with identical configuration (trial wall
times are kept in memory but deliberately left out of the CSVs).
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .channel import FlipPattern, gamma_from_flips, sample_flips
from .factor_graph import EnsembleParams, FactorGraph, sample_bit_regular
from .lp_decoder import INTEGRAL_CODEWORD, DecodeError, DecoderConfig, decode_lp
from .matching import find_pq_matching
from .witness import check_dual_witness, find_dual_witness_lp, hyperflow_from_matching

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "AlphaSummary",
    "MonteCarloResults",
    "run_montecarlo",
    "emit_results",
    "wilson_interval",
]


@dataclass(frozen=True)
class ExperimentConfig:
    alphas: tuple[float, ...]
    trials: int
    n: int = 1000
    rate: float = 0.5
    d_v: int = 8
    p: int = 6
    q: int = 5
    flip_mode: str = "exact"
    master_seed: int = 0
    fresh_graph_per_trial: bool = True
    run_witness_lp: bool = False
    tie_probe: bool = True
    decoder_mode: str = "cuts"
    max_rounds: int = 200
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if list(self.alphas) != sorted(self.alphas):
            raise ValueError("alphas must be sorted ascending")

    def to_json_dict(self) -> dict:
        return asdict(self) | {"alphas": list(self.alphas)}

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["alphas"] = tuple(float(a) for a in d["alphas"])
        return cls(**d)


@dataclass
class TrialRecord:
    alpha_index: int
    trial_index: int
    seed: str                   # master_seed:alpha_index:trial_index
    alpha: float
    n_flips: int
    lp_status: str
    lp_objective: float
    lp_success: bool            # status integral and output all-zero
    matching_found: bool
    witness_found: bool
    witness_lp_found: bool | None
    certificate_implies_success_ok: bool
    wall_time: float


@dataclass
class AlphaSummary:
    alpha: float
    trials: int
    lp_successes: int
    matchings: int
    witnesses: int
    lp_success_rate: float
    matching_rate: float
    witness_rate: float
    ci_lo: float
    ci_hi: float


@dataclass
class MonteCarloResults:
    config: ExperimentConfig
    records: list[TrialRecord]
    summaries: list[AlphaSummary]
    chain_violations: int


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score 95% interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def _trial_seed(config: ExperimentConfig, alpha_index: int, trial_index: int) -> list[int]:
    return [config.master_seed, alpha_index, trial_index]


def _fixed_graph(config: ExperimentConfig) -> FactorGraph:
    params = EnsembleParams(rate=config.rate, d_v=config.d_v, n=config.n, seed=config.master_seed)
    return sample_bit_regular(params)


def run_trial(config: ExperimentConfig, alpha_index: int, trial_index: int,
              graph: FactorGraph | None = None) -> TrialRecord:
    """One decode + certificate-chain evaluation, fully seeded."""
    t0 = time.perf_counter()
    alpha = config.alphas[alpha_index]
    rng = np.random.default_rng(_trial_seed(config, alpha_index, trial_index))
    if graph is None:
        params = EnsembleParams(rate=config.rate, d_v=config.d_v, n=config.n, seed=0)
        graph = sample_bit_regular(params, rng)
    flips = sample_flips(config.n, alpha, mode=config.flip_mode, rng=rng)
    gamma = gamma_from_flips(flips)
    dcfg = DecoderConfig(mode=config.decoder_mode, tie_probe=config.tie_probe,
                         max_rounds=config.max_rounds)
    try:
        result = decode_lp(graph, gamma, dcfg)
        lp_status = result.status
        lp_objective = float(result.objective)
        lp_success = result.status == INTEGRAL_CODEWORD and not result.rounded.any()
    except DecodeError as exc:
        lp_status = f"error:{exc}"
        lp_objective = float("nan")
        lp_success = False

    matching = find_pq_matching(graph, flips, config.p, config.q)
    matching_found = matching is not None
    witness_found = False
    if matching_found:
        tau = hyperflow_from_matching(graph, flips, matching, config.p, config.q)
        witness_found = check_dual_witness(graph, gamma, tau).ok
    witness_lp_found: bool | None = None
    if config.run_witness_lp:
        witness_lp_found = find_dual_witness_lp(graph, gamma) is not None
    chain_ok = (not matching_found or witness_found) and (not witness_found or lp_success)
    return TrialRecord(
        alpha_index=alpha_index,
        trial_index=trial_index,
        seed=":".join(map(str, _trial_seed(config, alpha_index, trial_index))),
        alpha=alpha,
        n_flips=flips.count,
        lp_status=lp_status,
        lp_objective=lp_objective,
        lp_success=lp_success,
        matching_found=matching_found,
        witness_found=witness_found,
        witness_lp_found=witness_lp_found,
        certificate_implies_success_ok=chain_ok,
        wall_time=time.perf_counter() - t0,
    )


def _worker(args) -> TrialRecord:
    config, ai, ti, graph = args
    return run_trial(config, ai, ti, graph)


def run_montecarlo(config: ExperimentConfig) -> MonteCarloResults:
    """All trials for all alphas; aggregation is order-independent."""
    graph = None if config.fresh_graph_per_trial else _fixed_graph(config)
    tasks = [
        (config, ai, ti, graph)
        for ai in range(len(config.alphas))
        for ti in range(config.trials)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_worker, tasks, chunksize=8))
    else:
        records = [_worker(t) for t in tasks]
    records.sort(key=lambda r: (r.alpha_index, r.trial_index))
    summaries = []
    for ai, alpha in enumerate(config.alphas):
        rs = [r for r in records if r.alpha_index == ai]
        succ = sum(r.lp_success for r in rs)
        mat = sum(r.matching_found for r in rs)
        wit = sum(r.witness_found for r in rs)
        lo, hi = wilson_interval(succ, len(rs))
        summaries.append(
            AlphaSummary(
                alpha=alpha, trials=len(rs), lp_successes=succ, matchings=mat, witnesses=wit,
                lp_success_rate=succ / len(rs), matching_rate=mat / len(rs),
                witness_rate=wit / len(rs), ci_lo=lo, ci_hi=hi,
            )
        )
    violations = sum(not r.certificate_implies_success_ok for r in records)
    return MonteCarloResults(config=config, records=records, summaries=summaries,
                             chain_violations=violations)


def emit_results(results: MonteCarloResults, out_dir: str) -> dict[str, str]:
    """Write manifest.json, trials.csv, summary.csv, plotdata.csv.

    Byte-stable for identical configs: rows sorted by (alpha, trial), floats
    rendered with repr, and wall times excluded.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "manifest": os.path.join(out_dir, "manifest.json"),
        "trials": os.path.join(out_dir, "trials.csv"),
        "summary": os.path.join(out_dir, "summary.csv"),
        "plotdata": os.path.join(out_dir, "plotdata.csv"),
    }
    manifest = {
        "schema_version": 1,
        "package_version": __version__,
        "config": results.config.to_json_dict(),
        "chain_violations": results.chain_violations,
    }
    with open(paths["manifest"], "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(paths["trials"], "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([
            "alpha_index", "trial_index", "seed", "alpha", "n_flips", "lp_status", "lp_objective",
            "lp_success", "matching_found", "witness_found", "witness_lp_found", "chain_ok",
        ])
        for r in results.records:
            w.writerow([
                r.alpha_index, r.trial_index, r.seed, repr(r.alpha), r.n_flips, r.lp_status,
                repr(r.lp_objective), int(r.lp_success), int(r.matching_found),
                int(r.witness_found),
                "" if r.witness_lp_found is None else int(r.witness_lp_found),
                int(r.certificate_implies_success_ok),
            ])
    with open(paths["summary"], "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([
            "alpha", "trials", "lp_successes", "matchings", "witnesses",
            "lp_success_rate", "matching_rate", "witness_rate", "ci_lo", "ci_hi",
        ])
        for s in results.summaries:
            w.writerow([
                repr(s.alpha), s.trials, s.lp_successes, s.matchings, s.witnesses,
                repr(s.lp_success_rate), repr(s.matching_rate), repr(s.witness_rate),
                repr(s.ci_lo), repr(s.ci_hi),
            ])
    with open(paths["plotdata"], "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "success_rate", "ci_lo", "ci_hi"])
        for s in results.summaries:
            w.writerow([repr(s.alpha), repr(s.lp_success_rate), repr(s.ci_lo), repr(s.ci_hi)])
    return paths
