from __future__ import annotations
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from dataclasses import asdict
from typing import List
import json
import math
import time

import numpy as np
import pandas as pd
import yaml

from pairmeet import utils
from pairmeet.graphs import ErParams
from pairmeet.graphs import er_sample
from pairmeet.graphs import degree_stats
from pairmeet.graphs import codegree_stats
from pairmeet.graphs import adjacency_sigma2
from pairmeet.markov import TransitionMatrix
from pairmeet.markov import StationaryDistribution
from pairmeet.markov import srw_from_graph
from pairmeet.markov import stationary
from pairmeet.meeting import exact_meeting_times
from pairmeet.meeting import tmeet_pi
from pairmeet.meeting import svd_killed
from pairmeet.meeting import rank_k_tmeet
from pairmeet.method import MethodFactory
from pairmeet.perturb import nu_from_eps
from pairmeet.perturb import perturbation_report
from pairmeet.logging import write_log
from pairmeet.exception import PairMeetError
from pairmeet.exception import InvalidParameterError

METHODS = ("exact", "spectral", "rank-k", "mc")
FORMATS = ("json", "csv")
THETA_TERM = "exp(-theta (log n)^2), theta unknown"

__all__ = ["ExperimentConfig",
           "RunRecord",
           "run_er_experiment",
           "summarize_records",
           "nu_from_eps",
           "concentration_study",
           "rank_k_error_curve",
           "write_records",
           "write_summaries",
           "write_plot_data"]


@dataclass
class ExperimentConfig:
    """One Erdős–Rényi sweep: sizes x seeds, one meeting-time method."""
    sizes: List[int]
    beta: float = None
    c: float = None
    p: float = None
    num_seeds: int = 20
    master_seed: int = 0
    epsilon: float = 0.1
    epsilon1: float = 0.5
    method: str = "exact"
    k: int = 1
    replicas: int = 100000
    lazy: bool = False
    perturb: bool = False
    output: str = None
    fmt: str = "json"
    workers: int = None

    def __post_init__(self):
        if isinstance(self.sizes, int):
            self.sizes = [self.sizes]
        self.sizes = list(self.sizes)
        if not self.sizes:
            err_msg = "sizes should not be empty."
            write_log(err_msg, "error")
            raise InvalidParameterError("sizes", self.sizes, err_msg)

        for n in self.sizes:
            # Validates (beta, c) or p for every size.
            ErParams(n, beta=self.beta, c=self.c, p=self.p)

        utils.check_positive_int("num_seeds", self.num_seeds)
        utils.check_seed("master_seed", self.master_seed)
        utils.check_positive_float("epsilon", self.epsilon)
        utils.check_positive_float("epsilon1", self.epsilon1)
        utils.check_positive_int("k", self.k)
        utils.check_positive_int("replicas", self.replicas)

        self.method = self.method.lower().replace("_", "-")
        if self.method not in METHODS:
            err_msg = "method should be one of %s, not %s."%(METHODS,
                                                             self.method)
            write_log(err_msg, "error")
            raise InvalidParameterError("method", self.method, err_msg)

        if self.fmt not in FORMATS:
            err_msg = "fmt should be one of %s, not %s."%(FORMATS, self.fmt)
            write_log(err_msg, "error")
            raise InvalidParameterError("fmt", self.fmt, err_msg)

    @classmethod
    def from_yaml(cls, fpath: str, **overrides) -> ExperimentConfig:
        """Read a config mapping; `n` is accepted as an alias of `sizes`."""
        with open(fpath, "rt") as fin:
            data = yaml.safe_load(fin.read()) or {}

        if "n" in data:
            data["sizes"] = data.pop("n")
        if "seeds" in data:
            data["num_seeds"] = data.pop("seeds")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunRecord:
    seed: int
    seed_index: int
    n: int
    p: float
    d: float
    method: str
    connected: bool = False
    isolated: bool = False
    skipped: bool = False
    R1: float = None
    R2: float = None
    sigma2_scaled: float = None
    f_nu1: bool = None
    f_nu1_nu2: bool = None
    f_sigma: bool = None
    tmeet_pi: float = None
    tmeet_over_n: float = None
    method_details: dict = field(default_factory=dict)
    perturb_report: dict = None
    wall_time: float = 0.
    error: str = None

    @property
    def ok(self) -> bool:
        return not self.skipped and self.error is None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_row(self) -> dict:
        """Flat mapping for CSV; nested parts are JSON-encoded."""
        row = self.to_dict()
        row["method_details"] = json.dumps(row["method_details"])
        if row["perturb_report"] is not None:
            row["perturb_report"] = json.dumps(row["perturb_report"])
        return row


def _run_seed(task) -> RunRecord:
    config, n, seed_index, seed = task
    t_start = time.perf_counter()

    params = ErParams(n, beta=config.beta, c=config.c, p=config.p)
    record = RunRecord(seed=seed,
                       seed_index=seed_index,
                       n=n,
                       p=params.p,
                       d=params.d,
                       method=config.method)

    g = er_sample(params, seed)
    record.isolated = bool(g.isolated_vertices())
    record.connected = g.is_connected()
    if record.isolated or not record.connected:
        record.skipped = True
        record.wall_time = time.perf_counter() - t_start
        return record

    try:
        d = params.d
        nu1, nu2 = nu_from_eps(config.epsilon1)
        sigma2_limit = utils.get_setting("EXPERIMENT", "SIGMA2_LIMIT")
        record.R1 = degree_stats(g, d).R1
        record.R2 = codegree_stats(g, d).R2
        record.sigma2_scaled = adjacency_sigma2(g, d)
        record.f_nu1 = bool(record.R1 <= nu1)
        record.f_nu1_nu2 = bool(record.f_nu1 and record.R2 <= nu2)
        record.f_sigma = bool(record.sigma2_scaled <= sigma2_limit)

        P = srw_from_graph(g)
        if config.lazy:
            P = P.lazy()
        pi = stationary(P)

        method = MethodFactory.create(config.method,
                                      k=config.k,
                                      replicas=config.replicas,
                                      seed=seed)
        result = method.compute(P, pi)
        record.tmeet_pi = result.tmeet_pi
        record.tmeet_over_n = result.tmeet_pi / n
        record.method_details = {k: v for k, v in result.details.items()}

        if config.perturb:
            record.perturb_report = perturbation_report(P,
                                                        pi,
                                                        graph=g,
                                                        d=d,
                                                        epsilon1=config.epsilon1)
    except Exception as e:
        # Library failures (ARPACK, LAPACK) land here too; a seed never
        # aborts the sweep.
        message = e.message if isinstance(e, PairMeetError) else str(e)
        record.error = "%s: %s"%(e.__class__.__name__, message)
        write_log("Seed %d (n=%d) failed: %s"%(seed, n, record.error),
                  "warning")

    record.wall_time = time.perf_counter() - t_start
    return record


def run_er_experiment(config: ExperimentConfig) -> List[RunRecord]:
    """Run the sweep and return records in (size, seed) order.

    Disconnected samples and samples with an isolated vertex are recorded
    as skipped and not resampled. Per-seed errors of any kind are kept in
    the record and never abort the sweep.
    """
    utils.check_type("config", config, ExperimentConfig)
    seeds = utils.spawn_seeds(config.master_seed, config.num_seeds)
    tasks = [(config, n, i, seed)
             for n in config.sizes
             for i, seed in enumerate(seeds)]

    write_log("ER sweep: sizes=%s, %d seeds, method=%s"%(config.sizes,
                                                         config.num_seeds,
                                                         config.method))
    if config.workers is not None and config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            records = list(executor.map(_run_seed, tasks))
    else:
        records = []
        for task in tasks:
            records.append(_run_seed(task))
            write_log("n=%d seed #%d done"%(task[1], task[2] + 1))
        # end of for

    return records


def _event_bound_terms(n: int, d: float, nu1: float, nu2: float):
    term_degree = 2. * n * math.exp(-nu1**2 * d / 3.)
    term_codegree = 2. * math.comb(n, 2) * math.exp(-nu2**2 * d**2 / (3. * n))
    return term_degree, term_codegree


def summarize_records(records: List[RunRecord],
                      epsilon: float,
                      epsilon1: float) -> List[dict]:
    """Per-size aggregates next to the failure-probability bound terms."""
    nu1, nu2 = nu_from_eps(epsilon1)
    summaries = []
    for n in sorted({r.n for r in records}):
        group = [r for r in records if r.n == n]
        ok = [r for r in group if r.ok]
        ratios = np.array([r.tmeet_over_n for r in ok], dtype=float)
        devs = np.abs(ratios - 1.)
        d = group[0].d
        term_degree, term_codegree = _event_bound_terms(n, d, nu1, nu2)

        summaries.append({
            "n": n,
            "p": group[0].p,
            "d": d,
            "seeds": len(group),
            "skipped": sum(r.skipped for r in group),
            "errors": sum(r.error is not None for r in group),
            "valid": len(ok),
            "mean_tmeet_over_n": float(ratios.mean()) if ok else None,
            "mean_abs_deviation": float(devs.mean()) if ok else None,
            "max_abs_deviation": float(devs.max()) if ok else None,
            "exceed_frequency": float(np.mean(devs > epsilon)) if ok else None,
            "epsilon": epsilon,
            "nu1": nu1,
            "nu2": nu2,
            "freq_f_nu1_nu2": float(np.mean([r.f_nu1_nu2 for r in ok]))
            if ok else None,
            "freq_f_sigma": float(np.mean([r.f_sigma for r in ok]))
            if ok else None,
            "bound_degree_term": term_degree,
            "bound_codegree_term": term_codegree,
            "bound_theta_term": THETA_TERM,
            "bound_known_terms": term_degree + term_codegree,
        })
    # end of for
    return summaries


def _event_report(name, hits, seeds, bound):
    freq = float(np.mean(hits))
    se = math.sqrt(freq * (1. - freq) / seeds)
    passed = None if bound is None else bool(freq <= bound + 3. * se)
    return {"event": name,
            "frequency": freq,
            "standard_error": se,
            "bound": bound,
            "passed": passed}


def concentration_study(n: int,
                        p: float,
                        seeds: int,
                        nu1: float,
                        nu2: float,
                        master_seed: int = 0,
                        sigma2_limit: float = None) -> dict:
    """Empirical frequencies of the concentration failure events.

    {R1 > nu1} and {R2 > nu2} are compared with 2n exp(-nu1^2 np/3) and
    2 C(n,2) exp(-nu2^2 np^2/3); an event passes when its frequency is at
    most the bound plus three standard errors. The sigma2 event has no
    explicit bound and only reports its frequency.
    """
    min_seeds = utils.get_setting("EXPERIMENT", "MIN_CONCENTRATION_SEEDS")
    utils.check_positive_int("seeds", seeds)
    if seeds < min_seeds:
        err_msg = "concentration studies need at least %d seeds, " \
                  "not %d."%(min_seeds, seeds)
        write_log(err_msg, "error")
        raise InvalidParameterError("seeds", seeds, err_msg)

    utils.check_seed("master_seed", master_seed)
    utils.check_positive_float("nu1", nu1)
    utils.check_positive_float("nu2", nu2)
    if sigma2_limit is None:
        sigma2_limit = utils.get_setting("EXPERIMENT", "SIGMA2_LIMIT")

    params = ErParams(n, p=p)
    d = params.d
    if d <= 0.:
        err_msg = "p should be positive for a concentration study."
        write_log(err_msg, "error")
        raise InvalidParameterError("p", p, err_msg)

    r1_hits, r2_hits, sigma_hits = [], [], []
    for seed in utils.spawn_seeds(master_seed, seeds):
        g = er_sample(params, seed)
        r1_hits.append(degree_stats(g, d).R1 > nu1)
        r2_hits.append(codegree_stats(g, d).R2 > nu2)
        sigma_hits.append(adjacency_sigma2(g, d) > sigma2_limit)
    # end of for

    bound_r1 = 2. * n * math.exp(-nu1**2 * n * p / 3.)
    bound_r2 = 2. * math.comb(n, 2) * math.exp(-nu2**2 * n * p**2 / 3.)
    events = [_event_report("R1 > nu1", r1_hits, seeds, bound_r1),
              _event_report("R2 > nu2", r2_hits, seeds, bound_r2),
              _event_report("sigma2 > %g"%(sigma2_limit),
                            sigma_hits,
                            seeds,
                            None)]
    return {"n": n,
            "p": p,
            "seeds": seeds,
            "master_seed": master_seed,
            "nu1": nu1,
            "nu2": nu2,
            "events": events,
            "passed": all(e["passed"] is not False for e in events)}


def rank_k_error_curve(P: TransitionMatrix,
                       pi: StationaryDistribution,
                       ks=None) -> List[tuple]:
    """(k, |rank-k estimate - exact|) for k = 1, 2, 4, ..., n^2."""
    dim = P.n**2
    if ks is None:
        ks = sorted({min(2**i, dim) for i in range(int(math.log2(dim)) + 2)})
    exact = tmeet_pi(exact_meeting_times(P), pi)
    svd = svd_killed(P)
    return [(k, abs(rank_k_tmeet(svd, pi, k).value - exact)) for k in ks]


def write_records(records: List[RunRecord], fpath: str, fmt: str = "json"):
    if fmt == "json":
        with open(fpath, "wt") as fout:
            for record in records:
                fout.write(json.dumps(record.to_dict()) + "\n")
    elif fmt == "csv":
        pd.DataFrame([r.to_row() for r in records]).to_csv(fpath, index=False)
    else:
        err_msg = "fmt=%s is not defined!"%(fmt)
        write_log(err_msg, "error")
        raise InvalidParameterError("fmt", fmt, err_msg)


def write_summaries(summaries: List[dict], fpath: str, fmt: str = "json"):
    if fmt == "json":
        with open(fpath, "wt") as fout:
            for summary in summaries:
                fout.write(json.dumps(summary) + "\n")
    elif fmt == "csv":
        pd.DataFrame(summaries).to_csv(fpath, index=False)
    else:
        err_msg = "fmt=%s is not defined!"%(fmt)
        write_log(err_msg, "error")
        raise InvalidParameterError("fmt", fmt, err_msg)


def write_plot_data(points, fpath: str):
    """Two whitespace-separated columns, one point per line."""
    np.savetxt(fpath, np.asarray(points, dtype=float), fmt="%.17g")
