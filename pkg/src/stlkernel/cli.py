"""Command-line front end.

Every subcommand writes its artifacts plus a JSON sidecar into ``--out-dir``.
The sidecar records the full configuration and the seeds, which is enough to
reproduce the artifact byte for byte. Component seeds are derived from the
single ``--seed`` flag. On failure the process exits with status 1 and prints
a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .experiments import drop_degenerate, estimate_targets, measure_sample, sigma_grid, sweep
from .formula import parse_formula, print_formula
from .formula_gen import FormulaGenConfig, sample_corpus
from .kernel import KernelSample, gram, write_gram
from .regression import (
    evaluate_mse,
    fit,
    make_regressor,
    predict_many,
    read_training_set,
    split,
    write_training_set,
)
from .seeding import derive_seed
from .ssa import SSAConfig
from .trajectories import (
    Mu0Config,
    read_batch_csv,
    read_trajectory_dir,
    write_batch_csv,
    write_trajectory_csv,
)

METRIC_FIELDS = ["method", "sigma", "lambda", "C", "epsilon", "k", "mse_train", "mse_test"]


# ------------------------------------------------------------------ helpers


def _write_json(path: Path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for r in rows:
            w.writerow([_fmt(r.get(k)) for k in METRIC_FIELDS])


def read_corpus(path) -> list:
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(parse_formula(line))
    return out


def write_corpus(path, formulas) -> None:
    with open(path, "w") as fh:
        for f in formulas:
            fh.write(print_formula(f) + "\n")


def _mu0(args) -> Mu0Config:
    return Mu0Config(a=args.a, b=args.b, h=args.h, sigma_start=args.sigma_start,
                     sigma_tv=args.sigma_tv, q=args.q)


def _ssa(args) -> SSAConfig:
    n_steps = int(round((args.b - args.a) / args.h))
    return SSAConfig(t0=args.a, h=args.h, n_steps=n_steps, t_end=args.t_end)


def _measure(args, attr: str = "measure") -> str:
    measure = getattr(args, attr)
    if measure.startswith("model:") or measure == "mu0":
        return measure
    # bare model names and file:<path> are accepted as shorthand
    return "model:" + measure


def _sample(args, measure: str, count: int, seed: int) -> KernelSample:
    return measure_sample(measure, count, seed, _mu0(args), _ssa(args), args.normalize)


def _base_sidecar(args, command: str) -> dict:
    return {
        "command": command,
        "version": __version__,
        "master_seed": args.seed,
        "args": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config", "out_dir")},
    }


# ------------------------------------------------------------- subcommands


def cmd_sample_traj(args) -> None:
    out = Path(args.out_dir)
    seed = derive_seed(args.seed, "trajectories")
    sample = _sample(args, _measure(args), args.count, seed)
    trajs = sample.trajectories()
    files = []
    if args.layout == "single":
        write_batch_csv(out / "trajectories.csv", trajs)
        files.append("trajectories.csv")
    else:
        width = max(4, len(str(len(trajs) - 1)))
        for i, xi in enumerate(trajs):
            name = f"traj_{i:0{width}d}.csv"
            write_trajectory_csv(out / name, xi)
            files.append(name)
    meta = _base_sidecar(args, "sample-traj")
    meta.update(seed=seed, files=files, sample=sample.source, fingerprint=sample.fingerprint)
    _write_json(out / "sample-traj.json", meta)


def cmd_sample_formulas(args) -> None:
    out = Path(args.out_dir)
    seed = derive_seed(args.seed, "formulas")
    cfg = FormulaGenConfig(max_atoms=args.max_atoms, threshold_lo=args.threshold_lo,
                           threshold_hi=args.threshold_hi, seed=seed)
    corpus = sample_corpus(cfg, args.count)
    write_corpus(out / "formulas.txt", corpus)
    meta = _base_sidecar(args, "sample-formulas")
    meta.update(seed=seed, formula_gen=asdict(cfg), file="formulas.txt")
    _write_json(out / "formulas.json", meta)


def _kernel_sample(args, measure_attr="measure", samples_attr="samples") -> tuple[KernelSample, int]:
    if getattr(args, "traj_source", None):
        src = Path(args.traj_source)
        trajs = read_trajectory_dir(src) if src.is_dir() else read_batch_csv(src)
        return KernelSample.from_trajectories(trajs, {"measure": "files", "path": str(src)}), 0
    seed = derive_seed(args.seed, "kernel")
    return _sample(args, _measure(args, measure_attr), getattr(args, samples_attr), seed), seed


def cmd_gram(args) -> None:
    out = Path(args.out_dir)
    corpus = read_corpus(args.corpus)
    sample, seed = _kernel_sample(args)
    g = gram(corpus, sample, args.kind, args.sigma)
    eig = g.eigvalsh()
    meta = _base_sidecar(args, "gram")
    meta.update(seed=seed, min_eigenvalue=float(eig.min()), max_eigenvalue=float(eig.max()))
    write_gram(g, out / "gram.csv", out / "gram.json", meta)


def _formulas_arg(args) -> list:
    if args.formula:
        return [parse_formula(t) for t in args.formula]
    if args.corpus:
        return read_corpus(args.corpus)
    raise ValueError("give --corpus or at least one --formula")


def cmd_estimate(args) -> None:
    out = Path(args.out_dir)
    formulas = _formulas_arg(args)
    seed = derive_seed(args.seed, "targets")
    sample = _sample(args, _measure(args), args.samples, seed)
    data = estimate_targets(formulas, sample, args.target, args.t_index)
    write_training_set(data, out / "targets.csv")
    meta = _base_sidecar(args, "estimate")
    meta.update(seed=seed, sample=sample.source, fingerprint=sample.fingerprint, target=args.target,
                t_index=args.t_index)
    _write_json(out / "targets.json", meta)


def _model_dict(reg, args, sample: KernelSample, seed: int) -> dict:
    return {
        "method": reg.method,
        "hyper": reg.hyper(),
        "state": reg.state(),
        "target_kind": reg.target_kind,
        "formulas": [print_formula(f) for f in reg.formulas],
        "targets": [float(v) for v in reg.targets],
        "kernel": {
            "measure": _measure(args, "kernel_measure"),
            "samples": args.kernel_samples,
            "seed": seed,
            "mu0": asdict(_mu0(args)),
            "ssa": asdict(_ssa(args)),
            "normalize": args.normalize,
            "fingerprint": sample.fingerprint,
        },
    }


def _hyper(args) -> dict:
    return {"sigma": args.sigma, "ridge": args.ridge, "C": args.C, "epsilon": args.epsilon, "k": args.k}


def cmd_fit(args) -> None:
    out = Path(args.out_dir)
    train = read_training_set(args.train)
    sample, seed = _kernel_sample(args, "kernel_measure", "kernel_samples")
    kept, dropped = drop_degenerate(train.formulas, sample)
    if dropped:
        raise ValueError(f"degenerate training formulae at indices {dropped}")
    g = gram(train.formulas, sample, "normalized")
    reg = fit(args.method, g, train.targets, train.kind, **_hyper(args))
    model = _model_dict(reg, args, sample, seed)
    model.update(_base_sidecar(args, "fit"))
    _write_json(out / "model.json", model)
    train_mse = evaluate_mse(reg, train, sample)
    _write_rows(out / "fit-metrics.csv", [{**_metric_hyper(reg), "mse_train": train_mse, "mse_test": None}])


def _metric_hyper(reg) -> dict:
    h = reg.hyper()
    return {"method": reg.method, "sigma": h.get("sigma"), "lambda": h.get("lambda"), "C": h.get("C"),
            "epsilon": h.get("epsilon"), "k": h.get("k")}


def load_model(path):
    """Rebuild a fitted regressor and its kernel sample from a model file."""
    with open(path) as fh:
        model = json.load(fh)
    kern = model["kernel"]
    sample = measure_sample(kern["measure"], kern["samples"], kern["seed"], Mu0Config(**kern["mu0"]),
                            SSAConfig(**kern["ssa"]), kern["normalize"])
    if sample.fingerprint != kern["fingerprint"]:
        raise ValueError("rebuilt kernel sample does not match the model fingerprint")
    h = model["hyper"]
    reg = make_regressor(model["method"], sigma=h.get("sigma", 0.5), ridge=h.get("lambda", 1e-6),
                         C=h.get("C", 10.0), epsilon=h.get("epsilon", 0.01), k=h.get("k", 5))
    formulas = [parse_formula(t) for t in model["formulas"]]
    reg.formulas = formulas
    reg.targets = np.array(model["targets"])
    reg.target_kind = model["target_kind"]
    reg.fingerprint = kern["fingerprint"]
    state = model["state"]
    if model["method"] == "krr":
        reg.alpha = np.array(state["alpha"])
        reg.jitter = state["jitter"]
    elif model["method"] == "svr":
        reg.coef = np.array(state["coef"])
        reg.bias = state["bias"]
    return reg, sample


def cmd_eval(args) -> None:
    out = Path(args.out_dir)
    reg, sample = load_model(args.model)
    test = read_training_set(args.test)
    pred = predict_many(reg, test.formulas, sample)
    with open(out / "predictions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "formula", "target", "prediction"])
        for i, (f, y, p) in enumerate(zip(test.formulas, test.targets, pred)):
            w.writerow([i, print_formula(f), repr(float(y)), repr(float(p))])
    test_mse = float(np.mean((pred - test.targets) ** 2))
    _write_rows(out / "metrics.csv", [{**_metric_hyper(reg), "mse_train": None, "mse_test": test_mse}])
    meta = _base_sidecar(args, "eval")
    meta.update(fingerprint=sample.fingerprint)
    _write_json(out / "metrics.json", meta)


def cmd_sweep(args) -> None:
    out = Path(args.out_dir)
    if args.data:
        data = read_training_set(args.data)
        train, test = split(data, args.train_fraction, derive_seed(args.seed, "split"))
    elif args.train and args.test:
        train, test = read_training_set(args.train), read_training_set(args.test)
    else:
        raise ValueError("give --data, or both --train and --test")
    sample, seed = _kernel_sample(args, "kernel_measure", "kernel_samples")
    for part in (train, test):
        _, dropped = drop_degenerate(part.formulas, sample)
        if dropped:
            raise ValueError(f"degenerate formulae at indices {dropped}")
    sigmas = args.sigmas if args.sigmas else sigma_grid(args.sigma_lo, args.sigma_hi, args.sigma_n)
    rows = sweep(train, test, sample, [float(s) for s in sigmas], args.methods, args.ridge, args.C,
                 args.epsilon, args.k)
    _write_rows(out / "sweep.csv", rows)
    meta = _base_sidecar(args, "sweep")
    meta.update(seed=seed, sample=sample.source, fingerprint=sample.fingerprint,
                n_train=len(train), n_test=len(test))
    _write_json(out / "sweep.json", meta)


# ------------------------------------------------------------------ parser


class _ModelAlias(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, "model:" + values)


def _add_measure_opts(p, prefix: str = "") -> None:
    dash = f"--{prefix}-" if prefix else "--"
    dest = f"{prefix}_" if prefix else ""
    p.add_argument(f"{dash}measure", dest=f"{dest}measure", default="mu0",
                   help="mu0, model:<immigration|isomerization|polymerase> or model:file:<path>")
    if not prefix:
        p.add_argument("--model", dest="measure", action=_ModelAlias, help="shorthand for --measure model:<MODEL>")


def _add_grid_opts(p) -> None:
    g = p.add_argument_group("trajectory measure")
    g.add_argument("--a", type=float, default=0.0, help="grid start")
    g.add_argument("--b", type=float, default=20.0, help="grid end")
    g.add_argument("--h", type=float, default=1.0, help="grid step")
    g.add_argument("--sigma-start", type=float, default=1.0, help="mu0 start-point std")
    g.add_argument("--sigma-tv", type=float, default=1.0, help="mu0 total-variation std")
    g.add_argument("--q", type=float, default=0.1, help="mu0 sign-flip probability")
    g.add_argument("--t-end", type=float, default=None, help="SSA stop time (default: grid end)")
    g.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                   help="z-normalize SSA batches")


def _add_hyper_opts(p) -> None:
    g = p.add_argument_group("regression")
    g.add_argument("--sigma", type=float, default=0.5, help="Gaussian bandwidth")
    g.add_argument("--ridge", type=float, default=1e-6, help="KRR ridge")
    g.add_argument("--C", type=float, default=10.0, help="SVR box constraint")
    g.add_argument("--epsilon", type=float, default=0.01, help="SVR tube width")
    g.add_argument("--k", type=int, default=5, help="KNN neighbours")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stlkernel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--out-dir", default=".", help="output directory")
    common.add_argument("--config", default=None, help="flat key-value or JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-traj", parents=[common], help="sample trajectories to CSV")
    _add_measure_opts(p)
    _add_grid_opts(p)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--layout", choices=["dir", "single"], default="dir")
    p.set_defaults(func=cmd_sample_traj)

    p = sub.add_parser("sample-formulas", parents=[common], help="sample a formula corpus")
    p.add_argument("--count", type=int, default=400)
    p.add_argument("--max-atoms", type=int, default=6)
    p.add_argument("--threshold-lo", type=float, default=-7.0)
    p.add_argument("--threshold-hi", type=float, default=7.0)
    p.set_defaults(func=cmd_sample_formulas)

    p = sub.add_parser("gram", parents=[common], help="Gram matrix of a corpus")
    p.add_argument("--corpus", required=True)
    _add_measure_opts(p)
    _add_grid_opts(p)
    p.add_argument("--samples", type=int, default=1000, help="kernel trajectories M")
    p.add_argument("--traj-source", default=None, help="trajectory directory or batch CSV instead of sampling")
    p.add_argument("--kind", choices=["raw", "normalized", "gaussian"], default="normalized")
    p.add_argument("--sigma", type=float, default=None)
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("estimate", parents=[common], help="Monte-Carlo targets for formulae")
    p.add_argument("--corpus", default=None)
    p.add_argument("--formula", action="append", default=None, help="formula text (repeatable)")
    _add_measure_opts(p)
    _add_grid_opts(p)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--target", choices=["robustness", "satprob"], default="robustness")
    p.add_argument("--t-index", type=int, default=0)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("fit", parents=[common], help="fit a regressor on a targets file")
    p.add_argument("--train", required=True, help="targets CSV from 'estimate'")
    p.add_argument("--method", choices=["nw", "knn", "krr", "svr"], default="svr")
    _add_hyper_opts(p)
    _add_measure_opts(p, "kernel")
    _add_grid_opts(p)
    p.add_argument("--kernel-samples", type=int, default=1000)
    p.set_defaults(func=cmd_fit, traj_source=None)

    p = sub.add_parser("eval", parents=[common], help="evaluate a fitted model on a targets file")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="MSE over bandwidths for all methods")
    p.add_argument("--data", default=None, help="targets CSV to split")
    p.add_argument("--train-fraction", type=float, default=0.75)
    p.add_argument("--train", default=None)
    p.add_argument("--test", default=None)
    p.add_argument("--methods", nargs="+", choices=["nw", "knn", "krr", "svr"], default=["nw", "knn", "krr", "svr"])
    p.add_argument("--sigmas", nargs="+", type=float, default=None)
    p.add_argument("--sigma-lo", type=float, default=0.05)
    p.add_argument("--sigma-hi", type=float, default=5.0)
    p.add_argument("--sigma-n", type=int, default=25)
    _add_hyper_opts(p)
    _add_measure_opts(p, "kernel")
    _add_grid_opts(p)
    p.add_argument("--kernel-samples", type=int, default=1000)
    p.set_defaults(func=cmd_sweep, traj_source=None)
    return parser


def _coerce(action: argparse.Action, value):
    if not isinstance(value, str):
        return value
    if isinstance(action, argparse.BooleanOptionalAction):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if action.nargs in ("+", "*"):
        items = value.replace(",", " ").split()
        return [action.type(v) if action.type else v for v in items]
    return action.type(value) if action.type else value


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    conf = load_config(args.config)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    actions: dict = {}
    for a in subparser._actions:
        actions.setdefault(a.dest, a)  # --model aliases --measure; the canonical flag comes first
    unknown = set(conf) - set(actions) - {"seed", "out_dir"}
    if unknown:
        raise ValueError(f"unknown config keys for {args.command}: {sorted(unknown)}")
    subparser.set_defaults(**{k: _coerce(actions[k], v) for k, v in conf.items()})
    # explicit command-line flags still win over the file
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        args.func(args)
    except Exception as exc:  # reported as machine-readable JSON
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
