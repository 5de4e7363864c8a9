"""Seeded Monte Carlo experiments with reproducible, self-contained reports.

Each experiment is a per-trial function plus an aggregator over the trial
records, so reports can be recomputed from their own records, merging is
order-independent, and parallel execution (per-trial seeds spawned from the
master seed) gives byte-identical output to serial runs.  Exact counts are
serialized as decimal strings, never floats.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from itertools import combinations
from typing import Callable, Optional

import numpy as np

from . import analysis
from .digraph import Digraph, couple, gen_binomial, gen_process, hitting_time
from .errors import DomainError
from .exact import count_hamilton_cycles, count_one_factors, enumerate_one_factors
from .frieze import (
    Constants,
    PipelineConfig,
    build_star_digraph,
    compute_constants,
    find_hamilton,
    find_one_factor,
    is_good_factor,
)
from .rng import derive_seed, make_generator

SCHEMA_VERSION = "1"
_BATCH = 100_000  # Bernoulli samples per record in the subsample experiment


@dataclass
class ExperimentConfig:
    """One experiment run: everything needed to reproduce it bit-for-bit.

    Optional fields are experiment-specific; validation happens at dispatch.
    All thresholds are echoed into the report, so defaults are never hidden.
    """

    experiment: str
    n: int
    trials: int = 1
    seed: int = 0
    p: Optional[float] = None
    m: Optional[int] = None
    m_prime: Optional[int] = None
    m0: Optional[int] = None
    m3: Optional[int] = None
    slack: Optional[int] = None
    model: str = "binomial"
    samples: int = 10_000
    pass_fraction: float = 0.9
    se_multiplier: float = 3.0
    count_cap: int = 24
    enum_limit: int = 20_000
    exact_counts: bool = False
    check_identity_relabel: bool = False
    include_timings: bool = False
    workers: int = 1
    pipeline: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if self.experiment not in EXPERIMENTS:
            raise DomainError(
                f"unknown experiment {self.experiment!r}; known: {sorted(EXPERIMENTS)}")
        if self.experiment == "subsample-ratio":
            # one record per sample batch; trials is derived, not user-set
            self.trials = max(1, math.ceil(self.samples / _BATCH))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Report:
    experiment: str
    config: dict
    records: list
    aggregates: dict
    passed: bool
    schema_version: str = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "config": self.config,
            "records": self.records,
            "aggregates": self.aggregates,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ": "), indent=1)

    def recompute_aggregates(self) -> tuple[dict, bool]:
        """Re-derive aggregates from the records; must match the embedded ones."""
        cfg = ExperimentConfig.from_dict(self.config)
        return EXPERIMENTS[self.experiment].aggregate(cfg, self.records)


@dataclass(frozen=True)
class Experiment:
    trial: Callable[[ExperimentConfig, int], dict]
    aggregate: Callable[[ExperimentConfig, list], tuple[dict, bool]]


def run_experiment(cfg: ExperimentConfig) -> Report:
    exp = EXPERIMENTS[cfg.experiment]
    t0 = time.perf_counter()
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_trial_entry,
                                    [(cfg.to_dict(), i) for i in range(cfg.trials)]))
    else:
        records = [exp.trial(cfg, i) for i in range(cfg.trials)]
    records.sort(key=lambda r: r["trial"])
    aggregates, passed = exp.aggregate(cfg, records)
    if cfg.include_timings:
        aggregates["wall_time_seconds"] = time.perf_counter() - t0
    return Report(cfg.experiment, cfg.to_dict(), records, aggregates, passed)


def _trial_entry(packed: tuple[dict, int]) -> dict:
    cfg_dict, idx = packed
    cfg = ExperimentConfig.from_dict(cfg_dict)
    return EXPERIMENTS[cfg.experiment].trial(cfg, idx)


# -- expected Hamilton-cycle count ------------------------------------------------


def _expected_count_trial(cfg: ExperimentConfig, idx: int) -> dict:
    seed = derive_seed(cfg.seed, idx)
    if cfg.model == "binomial":
        if cfg.p is None:
            raise DomainError("expected-count with model=binomial needs p")
        d = gen_binomial(cfg.n, cfg.p, False, seed)
    elif cfg.model == "uniform":
        if cfg.m is None:
            raise DomainError("expected-count with model=uniform needs m")
        d = gen_process(cfg.n, "loopless", seed).prefix(cfg.m)
    else:
        raise DomainError(f"unknown model {cfg.model!r}")
    x = count_hamilton_cycles(d, cap=cfg.count_cap)
    return {"trial": idx, "seed": seed, "count": str(x)}


def _falling(a: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= a - i
    return out


def _expected_count_aggregate(cfg: ExperimentConfig, records: list) -> tuple[dict, bool]:
    n = cfg.n
    counts = np.array([int(r["count"]) for r in records], dtype=np.float64)
    mean = float(counts.mean())
    sd = float(counts.std(ddof=1)) if len(counts) > 1 else 0.0
    se = sd / math.sqrt(len(counts)) if len(counts) > 1 else 0.0
    if cfg.model == "binomial":
        expected = Fraction(math.factorial(n - 1)) * Fraction(cfg.p) ** n
    else:
        big_n = n * (n - 1)
        expected = Fraction(math.factorial(n - 1)) * Fraction(
            _falling(cfg.m, n), _falling(big_n, n))
    exp_f = float(expected)
    tol = cfg.se_multiplier * se
    passed = abs(mean - exp_f) <= tol if se > 0 else mean == exp_f
    agg = {
        "sample_mean": mean,
        "sample_sd": sd,
        "standard_error": se,
        "expected": exp_f,
        "expected_exact": f"{expected.numerator}/{expected.denominator}",
        "tolerance": tol,
        "se_multiplier": cfg.se_multiplier,
        "deviation": abs(mean - exp_f),
    }
    return agg, passed


# -- hitting time ------------------------------------------------------------------


def _hitting_time_trial(cfg: ExperimentConfig, idx: int) -> dict:
    seed = derive_seed(cfg.seed, idx)
    cp = couple(gen_process(cfg.n, "loopful", seed))
    m_star_loopful = hitting_time(cp.loopful)
    m_star = hitting_time(cp.loopless)
    cp.audit(min(m_star, 200))
    rec = {"trial": idx, "seed": seed, "m_star": m_star, "m_star_loopful": m_star_loopful}
    if cfg.exact_counts and cfg.n <= 20:
        x = count_hamilton_cycles(cp.loopless.prefix(m_star), cap=cfg.count_cap)
        rec["count_at_m_star"] = str(x)
        if x > 0:
            ln_rho = (math.log(x) - math.log(math.factorial(cfg.n))) / cfg.n
            rec["rho"] = math.exp(ln_rho) / (math.log(cfg.n) / cfg.n)
        else:
            rec["rho"] = 0.0
    return rec


def _hitting_time_aggregate(cfg: ExperimentConfig, records: list) -> tuple[dict, bool]:
    agg = {
        "pass_fraction": cfg.pass_fraction,
        "mean_m_star": float(np.mean([r["m_star"] for r in records])),
    }
    passed = True
    if cfg.n >= 16:  # the bracket milestones are defined from here up
        c = compute_constants(cfg.n)
        inside = [r for r in records if c.m0 <= r["m_star"] <= c.m1]
        inside_loopful = [r for r in records if c.m0 <= r["m_star_loopful"] <= c.m1]
        frac = len(inside) / len(records)
        agg.update({
            "m0": c.m0,
            "m1": c.m1,
            "fraction_inside": frac,
            "fraction_inside_loopful": len(inside_loopful) / len(records),
        })
        passed = frac >= cfg.pass_fraction
    if any("count_at_m_star" in r for r in records):
        with_counts = [r for r in records if "count_at_m_star" in r]
        frac_ham = sum(1 for r in with_counts if int(r["count_at_m_star"]) >= 1) / len(with_counts)
        agg["fraction_hamiltonian"] = frac_ham
        agg["mean_rho"] = float(np.mean([r["rho"] for r in with_counts]))
        if cfg.n < 16:
            passed = frac_ham >= cfg.pass_fraction
    return agg, passed


# -- subsample containment ratio ---------------------------------------------------


def _subsample_trial(cfg: ExperimentConfig, idx: int) -> dict:
    # each record is one batch of Bernoulli samples (associative to merge)
    if cfg.m is None or cfg.m_prime is None:
        raise DomainError("subsample-ratio needs m and m_prime")
    if not (cfg.n <= cfg.m_prime <= cfg.m):
        raise DomainError("need n <= m_prime <= m")
    seed = derive_seed(cfg.seed, idx)
    rng = make_generator(seed)
    start = idx * _BATCH
    b = min(_BATCH, cfg.samples - start)
    if b <= 0:
        return {"trial": idx, "seed": seed, "samples": 0, "hits": 0}
    u = rng.random((b, cfg.m))
    kth = np.partition(u, cfg.m_prime - 1, axis=1)[:, cfg.m_prime - 1: cfg.m_prime]
    hits = int(np.all(u[:, : cfg.n] <= kth, axis=1).sum())
    return {"trial": idx, "seed": seed, "samples": b, "hits": hits}


def _subsample_aggregate(cfg: ExperimentConfig, records: list) -> tuple[dict, bool]:
    total = sum(r["samples"] for r in records)
    hits = sum(r["hits"] for r in records)
    exact = Fraction(math.comb(cfg.m - cfg.n, cfg.m_prime - cfg.n), math.comb(cfg.m, cfg.m_prime))
    phat = hits / total if total else 0.0
    q = float(exact)
    se = math.sqrt(q * (1 - q) / total) if total else 0.0
    tol = cfg.se_multiplier * se
    passed = abs(phat - q) <= tol if total else False
    agg = {
        "samples": total,
        "hits": hits,
        "empirical": phat,
        "exact_ratio": f"{exact.numerator}/{exact.denominator}",
        "exact_float": q,
        "standard_error": se,
        "tolerance": tol,
        "deviation": abs(phat - q),
    }
    if cfg.m <= 12:
        match = _subsample_enumeration(cfg.n, cfg.m, cfg.m_prime) == exact
        agg["enumeration_match"] = match
        passed = passed and match
    return agg, passed


def _subsample_enumeration(n: int, m: int, mp: int) -> Fraction:
    planted = set(range(n))
    good = sum(1 for s in combinations(range(m), mp) if planted <= set(s))
    return Fraction(good, math.comb(m, mp))


# -- almost containment sum ---------------------------------------------------------


def almost_containment_prob(n: int, m0: int, m3: int, t: int) -> Fraction:
    """Probability that a uniform m3-subset of [m0] misses at most t elements
    of a planted n-set: sum_{i<=t} C(n,i) C(m0-n, m3-(n-i)) / C(m0, m3).

    Terms whose binomials have negative or oversized arguments contribute 0.
    """
    if t < 0 or n < 0 or not (0 <= m3 <= m0) or n > m0:
        raise DomainError("inadmissible parameters for the containment sum")
    denom = math.comb(m0, m3)
    total = 0
    for i in range(min(t, n) + 1):
        k = m3 - (n - i)
        if k < 0 or k > m0 - n:
            continue
        total += math.comb(n, i) * math.comb(m0 - n, k)
    return Fraction(total, denom)


def _almost_containment_trial(cfg: ExperimentConfig, idx: int) -> dict:
    if cfg.m0 is None or cfg.m3 is None or cfg.slack is None:
        raise DomainError("almost-containment needs m0, m3 and slack")
    value = almost_containment_prob(cfg.n, cfg.m0, cfg.m3, cfg.slack)
    rec = {
        "trial": idx,
        "value": f"{value.numerator}/{value.denominator}",
        "value_float": float(value),
    }
    if math.comb(cfg.m0, cfg.m3) <= 2_000_000:
        rec["enumeration_match"] = _containment_enumeration(
            cfg.n, cfg.m0, cfg.m3, cfg.slack) == value
    return rec


def _containment_enumeration(n: int, m0: int, m3: int, t: int) -> Fraction:
    planted = set(range(n))
    good = sum(1 for s in combinations(range(m0), m3) if len(planted - set(s)) <= t)
    return Fraction(good, math.comb(m0, m3))


def _almost_containment_aggregate(cfg: ExperimentConfig, records: list) -> tuple[dict, bool]:
    rec = records[0]
    agg = {"value": rec["value"], "value_float": rec["value_float"]}
    passed = True
    if "enumeration_match" in rec:
        agg["enumeration_match"] = rec["enumeration_match"]
        passed = rec["enumeration_match"]
    return agg, passed


# -- good-factor fraction -------------------------------------------------------------


def good_fraction_of_digraph(d: Digraph, c: Constants, sigma_seed: int,
                             limit: int) -> dict:
    """Enumerate 1-factors, apply one random head-side relabeling, and
    measure the fraction that are good."""
    enum = enumerate_one_factors(d, limit)
    rng = make_generator(sigma_seed)
    sigma = rng.permutation(d.n).tolist()
    good = sum(1 for f in enum if is_good_factor(analysis.relabel_factor(f, sigma), c))
    total = len(enum)
    return {
        "factors": total,
        "truncated": enum.truncated,
        "good": good,
        "fraction": good / total if total else None,
    }


def _good_fraction_trial(cfg: ExperimentConfig, idx: int) -> dict:
    seed = derive_seed(cfg.seed, idx)
    c = compute_constants(cfg.n)
    cp = couple(gen_process(cfg.n, "loopful", seed))
    star = build_star_digraph(cp, c)
    rec = {"trial": idx, "seed": seed}
    if cfg.n <= 16:
        rec.update(good_fraction_of_digraph(star.star, c, derive_seed(seed, 1), cfg.enum_limit))
    else:
        # sampling mode: repeated seeded extraction counts as one sample each
        good = 0
        got = 0
        for k in range(cfg.samples):
            f = find_one_factor(star.star, seed=derive_seed(seed, 2, k))
            if f is None:
                continue
            sigma = make_generator(derive_seed(seed, 3, k)).permutation(cfg.n).tolist()
            got += 1
            if is_good_factor(analysis.relabel_factor(f, sigma), c):
                good += 1
        rec.update({"factors": got, "good": good,
                    "fraction": good / got if got else None, "truncated": True})
    return rec


def _good_fraction_aggregate(cfg: ExperimentConfig, records: list) -> tuple[dict, bool]:
    c = compute_constants(cfg.n)
    fracs = [r["fraction"] for r in records if r["fraction"] is not None]
    agg = {
        "defined_trials": len(fracs),
        "mean_fraction": float(np.mean(fracs)) if fracs else None,
        "min_fraction": float(np.min(fracs)) if fracs else None,
        "good_loop_cap": c.good_loop_cap,
        "good_cycle_cap": c.good_cycle_cap,
        "reference_loop_bound": _reference_good_loops(cfg.n, c),
    }
    passed = True  # informational: the caps are tiny at desk scale
    if cfg.check_identity_relabel:
        stats = analysis.permutation_cycle_stats(cfg.n, cfg.samples,
                                                 derive_seed(cfg.seed, 99))
        ref = analysis.fixed_point_reference(cfg.n, min(cfg.n, 30))
        agg["identity_relabel_tv"] = analysis.tv_distance(
            stats.fixed_point_histogram, ref, stats.trials)
        agg["identity_relabel_mean_fixed_points"] = stats.mean_fixed_points
    return agg, passed


def _reference_good_loops(n: int, c: Constants) -> float:
    """Exact probability that a uniform permutation has < good_loop_cap loops."""
    cap = math.ceil(c.good_loop_cap) - 1  # strictly fewer
    cap = max(cap, 0)
    total = math.factorial(n)
    acc = sum(Fraction(analysis.rencontres(n, k), total) for k in range(min(cap, n) + 1))
    return float(acc)


# -- 1-factor count lower bound ---------------------------------------------------------


def _factor_count_trial(cfg: ExperimentConfig, idx: int) -> dict:
    seed = derive_seed(cfg.seed, idx)
    c = compute_constants(cfg.n)
    cp = couple(gen_process(cfg.n, "loopful", seed))
    star = build_star_digraph(cp, c)
    count_star = count_one_factors(star.star, cap=cfg.count_cap)
    count_base = count_one_factors(star.base, cap=cfg.count_cap)
    rec = {
        "trial": idx,
        "seed": seed,
        "count_star": str(count_star),
        "count_base": str(count_base),
        "monotone_ok": count_star >= count_base,
    }
    if count_star > 0:
        rec["log_count_per_n"] = math.log(count_star) / cfg.n
    else:
        rec["no_factor"] = True
    f = find_one_factor(star.star, seed=seed)
    if f is not None:
        g = star.base.with_edges(f.edges())
        reg = analysis.regularize_degrees(g, f, c.degree_window_eps, c.m3 / cfg.n)
        rec["removed_pairs"] = len(reg.removed)
    return rec


def _factor_count_aggregate(cfg: ExperimentConfig, records: list) -> tuple[dict, bool]:
    c = compute_constants(cfg.n)
    reference = math.log(2 * math.log(cfg.n) / (3 * math.e))
    logs = [r["log_count_per_n"] for r in records if "log_count_per_n" in r]
    removal_bound = 4 * cfg.n / (math.log(math.log(cfg.n)) ** 2)
    removed = [r["removed_pairs"] for r in records if "removed_pairs" in r]
    agg = {
        "reference_log_rate": reference,
        "mean_log_count_per_n": float(np.mean(logs)) if logs else None,
        "no_factor_trials": sum(1 for r in records if r.get("no_factor")),
        "removal_bound": removal_bound,
        "max_removed_pairs": max(removed) if removed else None,
        "monotone_ok": all(r["monotone_ok"] for r in records),
    }
    return agg, bool(agg["monotone_ok"])


# -- construction pipeline ---------------------------------------------------------------


def _pipeline_trial(cfg: ExperimentConfig, idx: int) -> dict:
    seed = derive_seed(cfg.seed, idx)
    c = compute_constants(cfg.n)
    cp = couple(gen_process(cfg.n, "loopful", seed))
    pc = PipelineConfig(**{"include_timings": cfg.include_timings, **cfg.pipeline})
    out = find_hamilton(cp, c, seed=seed, config=pc)
    rec = {
        "trial": idx,
        "seed": seed,
        "ok": out.ok,
        "m_star": out.m_star,
        "overlap": out.overlap,
        "failure_phase": out.failure_phase,
        "phase_log": out.phase_log,
    }
    if out.ok:
        rec["cycle_head"] = list(out.cycle[:12])
    return rec


def _pipeline_aggregate(cfg: ExperimentConfig, records: list) -> tuple[dict, bool]:
    pc = PipelineConfig(**{"include_timings": cfg.include_timings, **cfg.pipeline})
    floor = cfg.n - pc.overlap_constant * (math.log(cfg.n) ** 2)
    succ = [r for r in records if r["ok"]]
    phases: dict[str, int] = {}
    for r in records:
        if not r["ok"]:
            phases[r["failure_phase"]] = phases.get(r["failure_phase"], 0) + 1
    overlaps = [r["overlap"] for r in succ]
    agg = {
        "successes": len(succ),
        "success_rate": len(succ) / len(records),
        "pass_fraction": cfg.pass_fraction,
        "failure_phases": dict(sorted(phases.items())),
        "overlap_floor": floor,
        "min_overlap": min(overlaps) if overlaps else None,
        "mean_overlap": float(np.mean(overlaps)) if overlaps else None,
    }
    passed = (len(succ) >= math.ceil(cfg.pass_fraction * len(records))
              and all(o >= floor for o in overlaps))
    return agg, passed


EXPERIMENTS = {
    "expected-count": Experiment(_expected_count_trial, _expected_count_aggregate),
    "hitting-time": Experiment(_hitting_time_trial, _hitting_time_aggregate),
    "subsample-ratio": Experiment(_subsample_trial, _subsample_aggregate),
    "almost-containment": Experiment(_almost_containment_trial, _almost_containment_aggregate),
    "good-fraction": Experiment(_good_fraction_trial, _good_fraction_aggregate),
    "factor-count-bound": Experiment(_factor_count_trial, _factor_count_aggregate),
    "pipeline": Experiment(_pipeline_trial, _pipeline_aggregate),
}


def write_trials_csv(report: Report, stream) -> None:
    """Flat CSV dump of the trial records (scalar fields only)."""
    keys = sorted({k for r in report.records for k in r
                   if not isinstance(r[k], (dict, list))})
    stream.write(",".join(keys) + "\n")
    for r in report.records:
        stream.write(",".join(str(r.get(k, "")) for k in keys) + "\n")


def write_histogram_csv(histogram: dict, stream) -> None:
    stream.write("k,count\n")
    for k in sorted(histogram):
        stream.write(f"{k},{histogram[k]}\n")
