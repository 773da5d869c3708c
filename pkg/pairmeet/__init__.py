from pairmeet.graphs import Graph
from pairmeet.graphs import ErParams
from pairmeet.graphs import er_sample
from pairmeet.markov import TransitionMatrix
from pairmeet.markov import StationaryDistribution
from pairmeet.markov import srw_from_graph
from pairmeet.markov import stationary
from pairmeet.pairspace import PairIndex
from pairmeet.pairspace import PairOperator
from pairmeet.meeting import MeetingTimeMatrix
from pairmeet.meeting import SvdResult
from pairmeet.meeting import exact_meeting_times
from pairmeet.meeting import tmeet_pi
from pairmeet.meeting import svd_killed
from pairmeet.meeting import spectral_tmeet
from pairmeet.meeting import rank_k_tmeet
from pairmeet.method import MethodFactory
from pairmeet.montecarlo import simulate_pair
from pairmeet.montecarlo import estimate_tmeet_pi
from pairmeet.perturb import perturbation_report
