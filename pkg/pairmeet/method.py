from __future__ import annotations
from dataclasses import dataclass
from dataclasses import field

from pairmeet import utils
from pairmeet.markov import TransitionMatrix
from pairmeet.markov import StationaryDistribution
from pairmeet.meeting import exact_meeting_times
from pairmeet.meeting import tmeet_pi
from pairmeet.meeting import svd_killed
from pairmeet.meeting import spectral_tmeet
from pairmeet.meeting import rank_k_tmeet
from pairmeet.montecarlo import estimate_tmeet_pi
from pairmeet.logging import write_log
from pairmeet.exception import InvalidParameterError


@dataclass
class MethodResult:
    method: str
    tmeet_pi: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"method": self.method, "tmeet_pi": self.tmeet_pi}
        out.update(self.details)
        return out


class MethodFactory:

    @staticmethod
    def create(name: str, **kwargs) -> MeetingTimeMethod:
        """Build the method selected on the command line.

        `name` is one of "exact", "spectral", "rank-k" (or "rank_k") and
        "mc"; keyword arguments go to the constructor.
        """
        key = name.lower().replace("_", "-")
        if key == "exact":
            return ExactMethod(solver=kwargs.get("solver"))
        elif key == "spectral":
            return SpectralMethod()
        elif key == "rank-k":
            return RankKMethod(k=kwargs.get("k", 1))
        elif key == "mc":
            return MonteCarloMethod(replicas=kwargs.get("replicas", 100000),
                                    seed=kwargs.get("seed", 0),
                                    cap=kwargs.get("cap"),
                                    workers=kwargs.get("workers"))

        err_msg = "method=%s is not defined!"%(name)
        write_log(err_msg, "error")
        raise InvalidParameterError("method", name, err_msg)


class MeetingTimeMethod:

    name = None

    def __str__(self):
        return "%s()"%(self.__class__.__name__)

    def __repr__(self):
        return str(self)

    def compute(self,
                P: TransitionMatrix,
                pi: StationaryDistribution) -> MethodResult:
        utils.check_type("P", P, TransitionMatrix)
        utils.check_type("pi", pi, StationaryDistribution)
        write_log("Computing t_meet^pi by %s on n=%d"%(self.name, P.n))
        return self._compute(P, pi)

    def _compute(self, P, pi) -> MethodResult:
        raise NotImplementedError()


class ExactMethod(MeetingTimeMethod):

    name = "exact"

    def __init__(self, solver: str = None):
        self._solver = solver

    def _compute(self, P, pi):
        M = exact_meeting_times(P, solver=self._solver)
        return MethodResult(self.name, tmeet_pi(M, pi))


class SpectralMethod(MeetingTimeMethod):

    name = "spectral"

    def _compute(self, P, pi):
        svd = svd_killed(P)
        return MethodResult(self.name,
                            spectral_tmeet(svd, pi),
                            {"sigma_min": float(svd.sigma[-1])})


class RankKMethod(MeetingTimeMethod):

    name = "rank-k"

    def __init__(self, k: int = 1):
        utils.check_positive_int("k", k)
        self._k = k

    def __str__(self):
        return "%s(k=%d)"%(self.__class__.__name__, self._k)

    @property
    def k(self) -> int:
        return self._k

    def _compute(self, P, pi):
        # One extra triplet for the error bound unless k covers everything.
        dim = P.n**2
        held = dim if self._k >= dim else self._k + 1
        svd = svd_killed(P, k_smallest=held)
        approx = rank_k_tmeet(svd, pi, self._k)
        return MethodResult(self.name,
                            approx.value,
                            {"k": approx.k,
                             "bound": approx.bound,
                             "certified": approx.certified})


class MonteCarloMethod(MeetingTimeMethod):

    name = "mc"

    def __init__(self,
                 replicas: int = 100000,
                 seed: int = 0,
                 cap: int = None,
                 workers: int = None):
        utils.check_positive_int("replicas", replicas)
        self._replicas = replicas
        self._seed = seed
        self._cap = cap
        self._workers = workers

    def __str__(self):
        return "%s(replicas=%d, seed=%d)"%(self.__class__.__name__,
                                           self._replicas,
                                           self._seed)

    def _compute(self, P, pi):
        est = estimate_tmeet_pi(P,
                                pi,
                                self._replicas,
                                self._seed,
                                cap=self._cap,
                                workers=self._workers)
        details = est.to_dict()
        details.pop("mean")
        return MethodResult(self.name, est.mean, details)
