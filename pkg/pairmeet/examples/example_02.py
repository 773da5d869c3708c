from pairmeet.graphs import ErParams
from pairmeet.graphs import er_sample
from pairmeet.graphs import check_regularity_conditions
from pairmeet.markov import srw_from_graph
from pairmeet.markov import stationary
from pairmeet.meeting import exact_meeting_times
from pairmeet.meeting import tmeet_pi
from pairmeet.meeting import recursion_residual
from pairmeet.experiment import rank_k_error_curve
from pairmeet.logging import use_logging, finish_logging


if __name__ == "__main__":

    use_logging("example_02",
                stdout=False,
                fout=True,
                fpath="example_02.log",
                mode='w')

    params = ErParams(30, beta=0.8, c=1.)
    g = er_sample(params, seed=2024)
    print(params, g, "connected:", g.is_connected())
    print(check_regularity_conditions(g, params.d, tol=0.5))

    P = srw_from_graph(g)
    pi = stationary(P)
    M = exact_meeting_times(P)
    t = tmeet_pi(M, pi)
    print("t_meet^pi = %.6f, t/n = %.6f"%(t, t / g.n))
    print("recursion residual: %.3e"%(recursion_residual(P, M)))

    print("k, |rank-k - exact|")
    for k, err in rank_k_error_curve(P, pi):
        print("%5d  %.3e"%(k, err))

    finish_logging()
