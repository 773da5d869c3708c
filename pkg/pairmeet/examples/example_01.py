from pairmeet.graphs import complete_graph
from pairmeet.markov import srw_from_graph
from pairmeet.markov import stationary
from pairmeet.method import MethodFactory
from pairmeet.logging import use_logging, finish_logging


if __name__ == "__main__":

    use_logging("example_01",
                stdout=True,
                fout=False,
                level="info")

    n = 10
    P = srw_from_graph(complete_graph(n))
    pi = stationary(P)

    # Closed form on K_n: (n-1)^3 / (n (n-2))
    print("Closed form: %.10f"%((n - 1)**3 / (n * (n - 2))))
    for name in ["exact", "spectral", "rank-k", "mc"]:
        method = MethodFactory.create(name, k=1, replicas=100000, seed=1)
        result = method.compute(P, pi)
        print("%-9s t_meet^pi = %.10f"%(name, result.tmeet_pi), result.details)

    finish_logging()
