import json

from pairmeet.graphs import ErParams
from pairmeet.graphs import er_sample
from pairmeet.markov import srw_from_graph
from pairmeet.markov import stationary
from pairmeet.perturb import perturbation_report
from pairmeet.logging import use_logging, finish_logging


if __name__ == "__main__":

    use_logging("example_03",
                stdout=True,
                level="warning")

    params = ErParams(30, p=0.7)
    g = er_sample(params, seed=11)
    P = srw_from_graph(g)
    pi = stationary(P)

    report = perturbation_report(P, pi, graph=g, d=params.d, epsilon1=0.5)
    print(json.dumps(report, indent=2))

    if report["certified"]:
        print("sigma_min^2 = %.6g in [%.6g, %.6g]: %s"%(
            report["sigma_min_sq"],
            report["bounds"]["lower_sq"],
            report["bounds"]["upper_sq"],
            report["sigma_min_in_bounds"]))
    else:
        print("Perturbation bounds are not certified for this sample.")

    finish_logging()
