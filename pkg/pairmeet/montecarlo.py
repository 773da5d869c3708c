from __future__ import annotations
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from dataclasses import asdict
import json
import math

import numpy as np
from scipy.stats import norm

from pairmeet import utils
from pairmeet.markov import TransitionMatrix
from pairmeet.markov import StationaryDistribution
from pairmeet.logging import write_log
from pairmeet.exception import DimensionError
from pairmeet.exception import InvalidParameterError


@dataclass(frozen=True)
class PairWalkRun:
    """One pair of walks; `steps_to_meet` is None when censored at the cap."""
    start: tuple
    steps_to_meet: int
    seed: int
    cap: int

    @property
    def censored(self) -> bool:
        return self.steps_to_meet is None


@dataclass(frozen=True)
class McEstimate:
    mean: float
    ci_half_width: float
    replicas: int
    censored: int
    cap: int
    seed: int
    confidence: float = 0.99

    @property
    def clean(self) -> bool:
        return self.censored == 0

    @property
    def lower_bound(self) -> bool:
        """Censored runs count as `cap`, so the mean only bounds from below."""
        return not self.clean

    @property
    def ci(self):
        return (self.mean - self.ci_half_width, self.mean + self.ci_half_width)

    def contains(self, value: float) -> bool:
        low, high = self.ci
        return low <= value <= high

    def to_dict(self) -> dict:
        out = asdict(self)
        out["clean"] = self.clean
        out["lower_bound"] = self.lower_bound
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def default_cap(n: int) -> int:
    return utils.get_setting("MONTECARLO", "CAP_FACTOR") * n * n


class _Sampler:
    """Inverse-CDF sampling from the rows of P, many walkers at once.

    The cumulative rows are shifted by their row index and concatenated, so
    one global searchsorted over `state + u` picks the next state of every
    walker in O(log n).
    """

    def __init__(self, P: np.ndarray):
        n = P.shape[0]
        cum = np.minimum(np.cumsum(P, axis=1), 1.)
        cum[:, -1] = 1.
        self._n = n
        self._flat = (cum + np.arange(n)[:, None]).ravel()
        # Rounding in state + u may overflow a row; fall back to its last
        # state with positive probability.
        self._last = np.array([np.flatnonzero(row > 0.)[-1] for row in P])

    def step(self, states, u):
        pos = np.searchsorted(self._flat, states + u, side="right")
        nxt = pos - states * self._n
        return np.minimum(nxt, self._last[states])


def _simulate(sampler, x, y, rng, cap):
    x = np.array(x, dtype=np.int64)
    y = np.array(y, dtype=np.int64)
    met_at = np.where(x == y, 0, -1)
    active = np.flatnonzero(met_at < 0)

    t = 0
    while active.size and t < cap:
        t += 1
        u = rng.random((2, active.size))
        x[active] = sampler.step(x[active], u[0])
        y[active] = sampler.step(y[active], u[1])
        hit = x[active] == y[active]
        met_at[active[hit]] = t
        active = active[~hit]
    # end of while
    return met_at


def _check_state(name, val, n):
    utils.check_nonnegative_int(name, val)
    if val >= n:
        err_msg = "%s=%d is out of range [0, %d)."%(name, val, n)
        write_log(err_msg, "error")
        raise InvalidParameterError(name, val, err_msg)


def simulate_pairs(P: TransitionMatrix,
                   starts_i,
                   starts_j,
                   seed: int,
                   cap: int = None) -> np.ndarray:
    """Meeting steps for a batch of independent walk pairs.

    Entry r is the first t >= 0 with X_t = Y_t for the pair started at
    (starts_i[r], starts_j[r]), or -1 if the pair was censored at `cap`.
    """
    utils.check_type("P", P, TransitionMatrix)
    n = P.n
    cap = default_cap(n) if cap is None else cap
    utils.check_positive_int("cap", cap)

    starts_i = np.asarray(starts_i, dtype=np.int64)
    starts_j = np.asarray(starts_j, dtype=np.int64)
    if starts_i.shape != starts_j.shape:
        err_msg = "starts_i and starts_j should have the same shape."
        write_log(err_msg, "error")
        raise DimensionError(starts_i.shape, starts_j.shape, err_msg)

    if np.any(starts_i < 0) or np.any(starts_i >= n) \
            or np.any(starts_j < 0) or np.any(starts_j >= n):
        err_msg = "Start states should lie in [0, %d)."%(n)
        write_log(err_msg, "error")
        raise InvalidParameterError("starts", None, err_msg)

    return _simulate(_Sampler(P.P), starts_i, starts_j, utils.make_rng(seed),
                     cap)


def simulate_pair(P: TransitionMatrix,
                  i: int,
                  j: int,
                  seed: int,
                  cap: int = None) -> PairWalkRun:
    utils.check_type("P", P, TransitionMatrix)
    _check_state("i", i, P.n)
    _check_state("j", j, P.n)
    cap = default_cap(P.n) if cap is None else cap

    met_at = simulate_pairs(P, [i], [j], seed, cap)[0]
    steps = None if met_at < 0 else int(met_at)
    return PairWalkRun(start=(i, j), steps_to_meet=steps, seed=seed, cap=cap)


def _run_chunk(task):
    P, pipi, size, seed, cap = task
    n = P.shape[0]
    rng = utils.make_rng(seed)
    flat = rng.choice(n * n, size=size, p=pipi)
    x, y = np.divmod(flat, n)

    met_at = _simulate(_Sampler(P), x, y, rng, cap)
    censored = met_at < 0
    steps = np.where(censored, cap, met_at).astype(float)
    return float(steps.sum()), float(np.sum(steps**2)), int(censored.sum())


def estimate_tmeet_pi(P: TransitionMatrix,
                      pi: StationaryDistribution,
                      replicas: int,
                      seed: int,
                      cap: int = None,
                      workers: int = None,
                      chunk_size: int = None) -> McEstimate:
    """Monte Carlo estimate of the meeting time from stationarity.

    Start pairs are drawn from pi ⊗ pi. Replicas are split into chunks with
    seeds spawned from `seed`; chunks run in a process pool when
    `workers` > 1 and are reduced in chunk order, so the estimate depends
    only on (P, pi, replicas, seed, cap, chunk_size).
    """
    utils.check_type("P", P, TransitionMatrix)
    utils.check_type("pi", pi, StationaryDistribution)
    utils.check_positive_int("replicas", replicas)
    if pi.n != P.n:
        err_msg = "pi has length %d but the chain has %d states."%(pi.n, P.n)
        write_log(err_msg, "error")
        raise DimensionError(P.n, pi.n, err_msg)

    cap = default_cap(P.n) if cap is None else cap
    utils.check_positive_int("cap", cap)
    if chunk_size is None:
        chunk_size = utils.get_setting("MONTECARLO", "CHUNK_SIZE")
    utils.check_positive_int("chunk_size", chunk_size)

    pipi = pi.pair_vector()
    pipi = pipi / pipi.sum()

    num_chunks = math.ceil(replicas / chunk_size)
    sizes = [chunk_size] * (num_chunks - 1)
    sizes.append(replicas - chunk_size * (num_chunks - 1))
    seeds = utils.spawn_seeds(seed, num_chunks)
    tasks = [(P.P, pipi, size, s, cap) for size, s in zip(sizes, seeds)]

    write_log("Monte Carlo: %d replicas in %d chunk(s), cap=%d"%(replicas,
                                                                num_chunks,
                                                                cap))
    if workers is not None and workers > 1 and num_chunks > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_run_chunk, tasks))
    else:
        results = [_run_chunk(task) for task in tasks]

    total = sum(r[0] for r in results)
    total_sq = sum(r[1] for r in results)
    censored = sum(r[2] for r in results)

    confidence = utils.get_setting("MONTECARLO", "CONFIDENCE")
    mean = total / replicas
    if replicas > 1:
        var = max(total_sq - replicas * mean**2, 0.) / (replicas - 1)
        z = norm.ppf(0.5 + confidence / 2.)
        half = float(z * math.sqrt(var / replicas))
    else:
        half = math.inf

    if censored:
        write_log("%d of %d replicas censored at cap=%d; the mean is a lower "
                  "bound."%(censored, replicas, cap), "warning")

    return McEstimate(mean=float(mean),
                      ci_half_width=half,
                      replicas=replicas,
                      censored=censored,
                      cap=cap,
                      seed=seed,
                      confidence=confidence)
