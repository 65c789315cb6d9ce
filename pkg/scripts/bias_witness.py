"""Noiseless DP-FedAvg versus Fed-alpha-NormEC on small heterogeneous quadratics.

Runs both methods on three problems and prints the final gradient norms:
the two-client 1-D pair, a three-client 1-D problem and the
quadratic-hetero suite. With two clients the clipped updates balance
exactly at the optimum, so FedAvg has no bias there.
"""

import argparse

from fednormec import (FedAvgConfig, ProblemConstants, RunConfig, SuiteSpec, TheoryParams, eta_max,
                       make_suite, run_fedavg, run_training)
from fednormec.problems import problem_from_pairs


def compare(pb, K, beta, alpha, R0):
    gamma = 1 / (2 * pb.L)
    eta = eta_max(ProblemConstants.from_problem(pb), TheoryParams(1.0, beta, alpha, R0, gamma, K=K)).value
    ours = run_training(pb, RunConfig(gamma=gamma, beta=beta, alpha=alpha, eta=eta, K=K,
                                      init="residual-plus-offset", init_offset=R0))
    base = run_fedavg(pb, FedAvgConfig(eta=gamma, gamma=gamma, alpha=alpha, K=K))
    return base.records[-1].grad_norm, ours.records[-1].grad_norm


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=2000)
    ap.add_argument("--beta", type=float, default=0.5)
    ap.add_argument("--alpha", type=float, default=0.01)
    ap.add_argument("--R0", type=float, default=0.5)
    args = ap.parse_args(argv)

    problems = {
        "pair (1,1)/(9,-1)": problem_from_pairs([1.0, 9.0], [1.0, -1.0], x0=[3.0]),
        "triple (1,1)/(1,1)/(9,-1)": problem_from_pairs([1.0, 1.0, 9.0], [1.0, 1.0, -1.0], x0=[3.0]),
        "quadratic-hetero M=20 d=10": make_suite(SuiteSpec("quadratic-hetero", clients=20, dim=10)),
    }
    print(f"{'problem':30s} {'fedavg':>12s} {'normec':>12s} {'ratio':>10s}")
    for name, pb in problems.items():
        g_base, g_ours = compare(pb, args.K, args.beta, args.alpha, args.R0)
        print(f"{name:30s} {g_base:12.4e} {g_ours:12.4e} {g_base / g_ours:10.3g}")


if __name__ == "__main__":
    main()
