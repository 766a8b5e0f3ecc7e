"""Command-line interface.

Subcommands:
  estimate    one Shapley-effect run (exact-sampling or given-data mode)
  experiment  replicated estimator comparison with risk summary vs the oracle
  oracle      print the closed-form effects of a linear-Gaussian model
  ratio       explained-variance diagnostic Var(E(Y|X))/Var(Y) from a CSV

Exit status: 0 on success, 2 on configuration/usage errors, 3 on runtime or
protocol errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from math import factorial

from .dataio import load_csv
from .errors import ConfigurationError, ProcedureError, ShapEffectsError
from .experiment import (
    EXACT_MATRIX,
    GIVEN_DATA_MATRIX,
    run_experiment,
)
from .extmodel import ExternalModel
from .gaussian import load_gaussian_config
from .givendata import explained_variance_ratio
from .procedures import (
    EstimatorKind,
    ExactBackend,
    GivenDataBackend,
    Procedure,
    Variant,
    run_exact_permutation_procedure,
    run_random_permutation_procedure,
    run_subset_procedure,
)
from .util import rng_stream

_DEFAULT_GIVEN_DATA_N = 10000


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapeffects",
        description="Shapley effects for models with dependent inputs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="one Shapley-effect estimation run")
    _common_flags(est)
    est.add_argument("--procedure", choices=[p.value for p in Procedure], default="subset")
    est.add_argument("--estimator", choices=[e.value for e in EstimatorKind], default="mc")
    est.add_argument("--variant", choices=[v.value for v in Variant],
                     help="given-data variant (mix re-evaluates the model, knn reuses outputs)")
    est.add_argument("--ntot", type=int, help="total evaluation budget")
    est.add_argument("--m", type=int, help="permutation count (random-perm procedure)")

    exp = sub.add_parser("experiment", help="replicated comparison with risk summary")
    _common_flags(exp)
    exp.add_argument("--ntot", type=int, required=True)
    exp.add_argument("--replications", type=int, default=100)

    orc = sub.add_parser("oracle", help="closed-form effects of a linear-Gaussian model")
    orc.add_argument("--gaussian-config", required=True)
    orc.add_argument("--out", help="write the effects as JSON")

    rat = sub.add_parser("ratio", help="explained-variance diagnostic from a CSV")
    rat.add_argument("--data", required=True)
    rat.add_argument("--output-col", required=True)
    rat.add_argument("--categorical", default="", help="comma-separated categorical column names")
    rat.add_argument("--ni", type=int, default=3)
    rat.add_argument("--seed", type=int, default=0)
    rat.add_argument("--no-standardize", action="store_true")
    rat.add_argument("--out")
    return parser


def _common_flags(sub):
    sub.add_argument("--mode", choices=["exact", "given-data"], default="exact")
    sub.add_argument("--ni", type=int, default=3, help="inner sample size for double MC")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--data", help="CSV of observed inputs (given-data mode)")
    sub.add_argument("--output-col", help="name of the output column in --data")
    sub.add_argument("--categorical", default="", help="comma-separated categorical column names")
    sub.add_argument("--model-cmd", help="external model command (line protocol)")
    sub.add_argument("--gaussian-config", help="TOML file defining a linear-Gaussian model")
    sub.add_argument("--out", help="output path (JSON report; experiment adds .csv)")
    sub.add_argument("--no-standardize", action="store_true",
                     help="disable per-column scaling in neighbour distances")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "experiment":
            return _cmd_experiment(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        if args.command == "ratio":
            return _cmd_ratio(args)
        raise ConfigurationError(f"unknown command {args.command!r}")
    except (ConfigurationError, ProcedureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ShapEffectsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def _load_sample(args):
    if not args.data:
        raise ConfigurationError("given-data mode needs --data")
    categorical = [c for c in args.categorical.split(",") if c]
    return load_csv(
        args.data,
        output_col=args.output_col,
        categorical=categorical,
        standardize=not args.no_standardize,
    )


def _build_backend(args, external_stack):
    estimator = EstimatorKind(args.estimator)
    if args.mode == "exact":
        if not args.gaussian_config:
            raise ConfigurationError(
                "exact mode needs --gaussian-config (a model with conditional samplers)"
            )
        model = load_gaussian_config(args.gaussian_config)
        return ExactBackend(model, estimator, n_inner=args.ni)

    sample = _load_sample(args)
    if args.variant is None:
        raise ConfigurationError("given-data mode needs --variant mix|knn")
    variant = Variant(args.variant)
    model = None
    if variant is Variant.MIX:
        if args.model_cmd:
            model = ExternalModel(args.model_cmd, p=sample.p)
            external_stack.append(model)
        elif args.gaussian_config:
            model = load_gaussian_config(args.gaussian_config)
        else:
            raise ConfigurationError(
                "the mix variant evaluates the model at new points; "
                "provide --model-cmd or --gaussian-config"
            )
    try:
        return GivenDataBackend(sample, estimator, variant, model=model, n_inner=args.ni)
    except ProcedureError as exc:
        raise ConfigurationError(str(exc)) from exc


def _cmd_estimate(args) -> int:
    external_stack = []
    try:
        backend = _build_backend(args, external_stack)
        procedure = Procedure(args.procedure)
        if procedure is Procedure.SUBSET:
            if not args.ntot:
                raise ConfigurationError("the subset procedure needs --ntot")
            report = run_subset_procedure(backend, args.ntot, seed=args.seed, keep_table=False)
        elif procedure is Procedure.RANDOM_PERMUTATION:
            m = args.m
            if m is None:
                if not args.ntot:
                    raise ConfigurationError("random-perm needs --m or --ntot")
                m = args.ntot // (backend.cost_unit * (backend.p - 1))
                if m < 1:
                    raise ConfigurationError(
                        f"--ntot {args.ntot} cannot fund one permutation "
                        f"(cost {backend.cost_unit * (backend.p - 1)} each)"
                    )
            report = run_random_permutation_procedure(backend, m, seed=args.seed)
        else:
            n_o = 1
            if args.ntot:
                n_o = max(
                    1, args.ntot // (backend.cost_unit * factorial(backend.p) * (backend.p - 1))
                )
            report = run_exact_permutation_procedure(backend, n_o=n_o, seed=args.seed)
    finally:
        for model in external_stack:
            model.close()

    _print_report(report)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.out}")
    return 0


def _print_report(report) -> None:
    print(f"procedure: {report.procedure}"
          + (f"  estimator: {report.estimator}" if report.estimator else "")
          + (f"  variant: {report.variant}" if report.variant else ""))
    for i, eta in enumerate(report.effects, start=1):
        print(f"  eta_{i}: {eta: .6f}")
    print(f"  sum: {report.sum_effects: .6f}")
    print(f"requested cost: {report.requested_cost}   realized cost: {report.realized_cost}   "
          f"model evaluations: {report.model_evaluations}")
    for warning in report.warnings:
        print(f"warning: {warning}")


def _cmd_experiment(args) -> int:
    if not args.gaussian_config:
        raise ConfigurationError("experiment needs --gaussian-config (the oracle fixture)")
    model = load_gaussian_config(args.gaussian_config)
    if args.mode == "exact":
        specs = EXACT_MATRIX
        sample_size = None
    else:
        specs = GIVEN_DATA_MATRIX
        sample_size = _DEFAULT_GIVEN_DATA_N
    result = run_experiment(
        model, specs, args.ntot, args.replications,
        seed=args.seed, sample_size=sample_size, n_inner=args.ni,
    )
    print(f"oracle effects: {[round(float(v), 6) for v in result.risks.oracle]}")
    print("summed quadratic risks:")
    for label, risk in result.risks.per_estimator.items():
        print(f"  {label}: {risk:.6e}")
    if args.out:
        result.write_csv(args.out + ".csv")
        result.write_json(args.out + ".json")
        print(f"wrote {args.out}.csv and {args.out}.json")
    return 0


def _cmd_oracle(args) -> int:
    model = load_gaussian_config(args.gaussian_config)
    effects = model.theoretical_shapley()
    for i, eta in enumerate(effects, start=1):
        print(f"eta_{i}: {eta: .6f}")
    print(f"sum: {float(effects.sum()): .6f}")
    if args.out:
        payload = {
            "schema_version": 1,
            "effects": [float(v) for v in effects],
            "p": model.p,
            "var_y": model.var_y,
        }
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_ratio(args) -> int:
    categorical = [c for c in args.categorical.split(",") if c]
    sample = load_csv(
        args.data,
        output_col=args.output_col,
        categorical=categorical,
        standardize=not args.no_standardize,
    )
    ratio = explained_variance_ratio(
        sample, n_anchor=min(1000, sample.n), n_inner=args.ni, rng=rng_stream(args.seed, "ratio")
    )
    print(f"explained variance ratio Var(E(Y|X))/Var(Y): {ratio:.4f}")
    if ratio < 0.9:
        print("note: well below 1; the outputs are not a deterministic function of these inputs")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"schema_version": 1, "explained_variance_ratio": ratio}, fh, indent=2)
            fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
