"""Regression of expected robustness and satisfaction probability under mu0.

Samples a formula corpus, estimates both targets on a large mu0 sample,
builds the kernel on an independent smaller one, and sweeps the Gaussian
bandwidth for every method. Writes one tidy CSV per target kind, with a
column for the kernel sample size so several sizes can be compared.

    python3 scripts/mu0_regression.py --out-dir results/mu0 --kernel-samples 250 1000
"""

import argparse
import csv
from pathlib import Path

from stlkernel.experiments import best_rows, estimate_both, measure_sample, sigma_grid, sweep
from stlkernel.formula_gen import FormulaGenConfig, sample_corpus
from stlkernel.kernel import KernelSample
from stlkernel.regression import split
from stlkernel.seeding import derive_seed

FIELDS = ["target", "kernel_samples", "method", "sigma", "lambda", "C", "epsilon", "k", "mse_train", "mse_test"]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-formulas", type=int, default=400)
    p.add_argument("--train-fraction", type=float, default=0.75)
    p.add_argument("--target-samples", type=int, default=10_000)
    p.add_argument("--kernel-samples", type=int, nargs="+", default=[250, 1000])
    p.add_argument("--sigma-n", type=int, default=25)
    p.add_argument("--out-dir", default="results/mu0")
    args = p.parse_args(argv)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    corpus = sample_corpus(FormulaGenConfig(seed=derive_seed(args.seed, "formulas")), args.n_formulas)
    targets = measure_sample("mu0", args.target_samples, derive_seed(args.seed, "targets"))
    rob, sat = estimate_both(corpus, targets)
    split_seed = derive_seed(args.seed, "split")
    sets = {"robustness": split(rob, args.train_fraction, split_seed),
            "satprob": split(sat, args.train_fraction, split_seed)}
    # trajectory i depends only on (seed, i): smaller samples are prefixes of the largest one
    full = measure_sample("mu0", max(args.kernel_samples), derive_seed(args.seed, "kernel"))
    sigmas = sigma_grid(n=args.sigma_n)

    for kind, (train, test) in sets.items():
        with open(out / f"sweep_{kind}.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, FIELDS, lineterminator="\n")
            w.writeheader()
            for m in sorted(args.kernel_samples):
                sample = KernelSample(full.values[:m], full.h, full.t0)
                rows = sweep(train, test, sample, sigmas)
                for r in rows:
                    w.writerow({"target": kind, "kernel_samples": m, **r})
                best = best_rows(rows)
                summary = ", ".join(f"{k} {v['mse_test']:.3g}" for k, v in sorted(best.items()))
                print(f"{kind:10s} M={m:5d}  best test MSE: {summary}")


if __name__ == "__main__":
    main()
