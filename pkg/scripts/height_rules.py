"""MSE of the cluster-based estimate under silhouette-selected versus h_max cuts.

1-D Toeplitz, gamma^2 = 0.5, several minimum intra-correlations and
inter-correlations.  Writes ``height_rules.csv``.
"""

import argparse
from pathlib import Path

from clacorr.errors import NotPSD
from clacorr.io import write_csv
from clacorr.evaluation import run_benchmark
from clacorr.synthetic import ScenarioSpec


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--replicates", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", type=Path, default=Path("results"))
    args = parser.parse_args()

    rows = []
    for eta in (0.2, 0.5, 0.8):
        for rho in (0.1, 0.3, 0.5):
            spec = ScenarioSpec(eta_minus_a=eta, eta_minus_b=eta, rho=rho,
                                replicates=args.replicates, seed=args.seed)
            try:
                res = run_benchmark(spec, methods=("cla",), height_rules=("maxu", "silhouette"),
                                    threads=args.threads)
            except NotPSD as exc:
                print(f"eta-={eta:g} rho={rho:g}: skipped ({exc.min_eigenvalue:.2g} eigenvalue)")
                continue
            mse = {r.method.split("/")[-1]: r.mse for r in res}
            print(f"eta-={eta:g} rho={rho:g}: MSE x10 maxu {10 * mse['maxu']:.4f} "
                  f"silhouette {10 * mse['silhouette']:.4f}")
            rows += [(eta, rho, rule, value) for rule, value in mse.items()]
    write_csv(args.out / "height_rules.csv", ("eta_minus", "rho", "rule", "mse"), rows)


if __name__ == "__main__":
    main()
