"""Command line front end.

Eight subcommands cover the workflow: dataset stats, two-step training,
model evaluation, trade-off sweeps, baselines, provably optimal thresholds
on small inputs, and the two synthetic studies.  Every run is driven by a
single --seed; results print as sorted JSON and, when --out is given, land
in that directory as JSON/CSV plus a rendered figure next to each table.

Exit codes: 0 success, 1 usage error or size-guard refusal, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import report
from .core import (CostMatrix, DataError, FairnessNotion, GuardError,
                   ThresholdModel)
from .dataio import load_csv, split_train_test
from .metrics import group_stats, pairwise_dp_viol, pairwise_eo_viol
from .pipeline import (TradeoffConfig, constant_median_baseline,
                       evaluate_model, fit_pom, frontier_rows, mixture_eval,
                       sweep, train_two_step)
from .reduction import FairClassifierConfig
from .simulate import (FinitePopulation, convergence_experiment,
                       enumerate_fair_threshold_fractions)
from .thresholds import ThresholdObjectiveConfig, exact_dp

__all__ = ["RunConfig", "UsageError", "build_parser", "main"]

_NOTIONS = {"dp": FairnessNotion.PAIRWISE_DP, "eo": FairnessNotion.PAIRWISE_EO}
_COSTS = {"absolute": CostMatrix.absolute, "binary": CostMatrix.binary,
          "asymmetric": CostMatrix.asymmetric}


class UsageError(Exception):
    """Bad flag combination or malformed flag value."""


def _float_list(text: str, flag: str) -> tuple[float, ...]:
    try:
        values = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated numbers, "
                         f"got {text!r}") from None
    if not values:
        raise UsageError(f"{flag} got an empty list")
    return values


def _int_list(text: str, flag: str) -> tuple[int, ...]:
    values = _float_list(text, flag)
    if any(v != int(v) for v in values):
        raise UsageError(f"{flag} expects integers, got {text!r}")
    return tuple(int(v) for v in values)


@dataclass(frozen=True)
class RunConfig:
    """Everything a subcommand needs, resolved from flags.

    The cost matrix is a factory because its size is the number of classes,
    which is only known once the label column has been rank-mapped.
    """

    data: str | None
    test_data: str | None
    split_seed: int | None
    test_fraction: float
    label_col: str | None
    attr_col: str | None
    attr_median_split: str | None
    feature_cols: tuple[str, ...] | None
    notion: FairnessNotion
    cost_name: str
    mu_grid: tuple[float, ...]
    refine: bool
    refine_gap: float
    refine_budget: int
    lambda_prime: float | None
    restarts: int
    pair_cap: int
    grid_size: int
    reg_strength: float | None
    max_iterations: int
    out: Path | None
    seed: int

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        grid = tuple(i / 10 for i in range(10))
        if getattr(args, "grid", None) is not None:
            grid = _float_list(args.grid, "--grid")
        elif getattr(args, "mu_lambda", None) is not None:
            grid = (args.mu_lambda,)
        features = None
        if getattr(args, "features", None) is not None:
            features = tuple(t.strip() for t in args.features.split(",")
                             if t.strip())
            if not features:
                raise UsageError("--features got an empty list")
        out = Path(args.out) if getattr(args, "out", None) else None
        return cls(
            data=getattr(args, "data", None),
            test_data=getattr(args, "test_data", None),
            split_seed=getattr(args, "split_seed", None),
            test_fraction=getattr(args, "test_fraction", 0.25),
            label_col=getattr(args, "label_col", None),
            attr_col=getattr(args, "attr_col", None),
            attr_median_split=getattr(args, "attr_median_split", None),
            feature_cols=features,
            notion=_NOTIONS[args.notion],
            cost_name=args.cost,
            mu_grid=grid,
            refine=getattr(args, "refine", False),
            refine_gap=getattr(args, "refine_gap", 0.2),
            refine_budget=getattr(args, "refine_budget", 5),
            lambda_prime=getattr(args, "lambda_prime", None),
            restarts=getattr(args, "restarts", 10),
            pair_cap=getattr(args, "pair_cap", 600_000),
            grid_size=getattr(args, "grid_size", 100),
            reg_strength=getattr(args, "reg_strength", None),
            max_iterations=getattr(args, "max_iterations", 2500),
            out=out,
            seed=args.seed,
        )

    def load(self):
        """Train/test datasets per the split flags; test may be None."""
        if (self.attr_col is None) == (self.attr_median_split is None):
            raise UsageError("pass exactly one of --attr-col / "
                             "--attr-median-split")
        if self.data is None:
            raise UsageError("--data is required")
        full = load_csv(self.data, label_col=self.label_col,
                        attr_col=self.attr_col,
                        attr_median_split=self.attr_median_split,
                        feature_cols=list(self.feature_cols)
                        if self.feature_cols else None)
        if self.test_data is not None:
            test = load_csv(self.test_data, label_col=self.label_col,
                            attr_col=self.attr_col,
                            attr_median_split=self.attr_median_split,
                            feature_cols=list(self.feature_cols)
                            if self.feature_cols else None)
            return full, test
        if self.split_seed is not None:
            return split_train_test(full, self.test_fraction, self.split_seed)
        return full, None

    def cost(self, num_classes: int) -> CostMatrix:
        return _COSTS[self.cost_name](num_classes)

    def classifier(self) -> FairClassifierConfig:
        return FairClassifierConfig(mu=0.0, grid_size=self.grid_size,
                                    reg_strength=self.reg_strength,
                                    max_iterations=self.max_iterations,
                                    pair_cap=self.pair_cap, seed=self.seed)

    def tradeoff(self, num_classes: int) -> TradeoffConfig:
        return TradeoffConfig(mu_lambda_grid=self.mu_grid,
                              adaptive_refine=self.refine,
                              refine_gap=self.refine_gap,
                              refine_budget=self.refine_budget,
                              lambda_prime=self.lambda_prime,
                              cost_matrix=self.cost(num_classes),
                              classifier=self.classifier(),
                              restarts=self.restarts, seed=self.seed)

    def outdir(self) -> Path | None:
        if self.out is None:
            return None
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out


def _finish(payload: dict, out: Path | None, name: str) -> int:
    if out is not None:
        report.write_json(out / f"{name}.json", payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _pairwise_report(notion, dataset, preds):
    if notion is FairnessNotion.PAIRWISE_DP:
        return pairwise_dp_viol(dataset.attrs, preds, dataset.num_classes,
                                dataset.num_groups)
    return pairwise_eo_viol(dataset.attrs, dataset.labels, preds,
                            dataset.num_classes, dataset.num_groups)


def cmd_stats(args) -> int:
    config = RunConfig.from_args(args)
    dataset, _ = config.load()
    payload = {
        "n": dataset.n,
        "num_classes": dataset.num_classes,
        "num_features": dataset.dim,
        "groups": list(dataset.attribute_names),
        "stats": group_stats(dataset).to_json_dict(),
    }
    return _finish(payload, config.outdir(), "stats")


def cmd_train(args) -> int:
    config = RunConfig.from_args(args)
    train, test = config.load()
    model, point = train_two_step(train, config.notion, args.mu_lambda,
                                  config=config.tradeoff(train.num_classes),
                                  seed=config.seed, test=test)
    out = config.outdir()
    if out is not None:
        model.save(out / "model.json")
        report.frontier_csv(out / "frontier.csv", [point])
        report.frontier_figure(out / "frontier.png", [point],
                               notion_label=config.notion.value)
    payload = {"model": model.to_json_dict(),
               "frontier": frontier_rows([point])}
    return _finish(payload, out, "train")


def cmd_evaluate(args) -> int:
    config = RunConfig.from_args(args)
    dataset, _ = config.load()
    model = ThresholdModel.load(args.model)
    model_classes = len(model.thresholds.theta) + 1
    cost_matrix = config.cost(max(dataset.num_classes, model_classes))
    cost, violation = evaluate_model(model, dataset, config.notion,
                                     cost_matrix)
    preds = model.predictions(dataset.features)
    payload = {
        "n": dataset.n,
        "notion": config.notion.value,
        "cost": cost,
        "violation": violation,
        "report": _pairwise_report(config.notion, dataset, preds)
        .to_json_dict(),
    }
    return _finish(payload, config.outdir(), "evaluate")


def cmd_sweep(args) -> int:
    config = RunConfig.from_args(args)
    train, test = config.load()
    points = sweep(train, test, config.notion,
                   config.tradeoff(train.num_classes))
    out = config.outdir()
    if out is not None:
        report.frontier_csv(out / "frontier.csv", points)
        report.frontier_figure(out / "frontier.png", points,
                               notion_label=config.notion.value)
    return _finish({"frontier": frontier_rows(points)}, out, "sweep")


def cmd_baseline(args) -> int:
    config = RunConfig.from_args(args)
    train, test = config.load()
    eval_split = test if test is not None else train
    cost_matrix = config.cost(train.num_classes)

    pom_model, pom_report = fit_pom(train)
    median_model = constant_median_baseline(train)
    base = ThresholdModel.load(args.model) if args.model else pom_model
    points = mixture_eval(base, train, eval_split,
                          p_grid=_float_list(args.p_grid, "--p-grid"),
                          trials=args.trials, cost_matrix=cost_matrix,
                          notion=config.notion, seed=config.seed)

    def summary(model):
        cost, violation = evaluate_model(model, eval_split, config.notion,
                                         cost_matrix)
        return {"cost": cost, "violation": violation}

    payload = {
        "split": "test" if test is not None else "train",
        "pom": summary(pom_model) | {
            "log_likelihood": pom_report.log_likelihood,
            "converged": pom_report.converged},
        "median": summary(median_model),
        "mixture": [{"p": p.p, "cost": p.cost, "violation": p.violation}
                    for p in points],
    }
    out = config.outdir()
    if out is not None:
        pom_model.save(out / "pom_model.json")
        report.mixture_csv(out / "mixture.csv", points)
        report.mixture_figure(out / "mixture.png", points,
                              notion_label=config.notion.value)
    return _finish(payload, out, "baseline")


def cmd_dp_exact(args) -> int:
    config = RunConfig.from_args(args)
    dataset, _ = config.load()
    model = ThresholdModel.load(args.model)
    scores = model.scores(dataset.features)
    objective_config = ThresholdObjectiveConfig(
        lam=args.lam, cost_matrix=config.cost(dataset.num_classes),
        notion=config.notion)
    solution = exact_dp(scores, dataset.labels, dataset.attrs,
                        objective_config)
    refitted = ThresholdModel(
        scorer=model.scorer, thresholds=solution.thresholds,
        feature_means=model.feature_means, feature_stds=model.feature_stds,
        notion=config.notion,
        metadata=dict(model.metadata) | {"thresholds": "exact",
                                         "lambda": args.lam})
    payload = {
        "lambda": args.lam,
        "notion": config.notion.value,
        "thresholds": [float(t) for t in solution.thresholds.theta],
        "objective": solution.objective,
        "cost": solution.cost,
        "violation": solution.violation,
    }
    out = config.outdir()
    if out is not None:
        refitted.save(out / "model.json")
    return _finish(payload, out, "dp_exact")


def cmd_simulate(args) -> int:
    config = RunConfig.from_args(args)
    attrs = _int_list(args.attrs, "--attrs")
    labels = _int_list(args.labels, "--labels") if args.labels else None
    result = enumerate_fair_threshold_fractions(len(attrs), args.k, attrs,
                                                labels=labels,
                                                notion=config.notion)
    out = config.outdir()
    if out is not None:
        report.simulation_csv(out / "simulation.csv", result)
        report.simulation_figure(out / "simulation.png", result)
    payload = {
        "notion": config.notion.value,
        "n": result.n,
        "k": result.k,
        "num_placements": result.num_placements,
        "num_arrangements": len(result.rows),
        "total_sequences": int(sum(r.multiplicity for r in result.rows)),
        "spearman": result.spearman,
    }
    return _finish(payload, out, "simulation_summary")


def cmd_convergence(args) -> int:
    config = RunConfig.from_args(args)
    dataset, _ = config.load()
    population = FinitePopulation.from_dataset(dataset)
    if args.model:
        model = ThresholdModel.load(args.model)
    else:
        model, _ = fit_pom(dataset)
    result = convergence_experiment(population, model,
                                    _int_list(args.n_grid, "--n-grid"),
                                    repetitions=args.repetitions,
                                    delta=args.delta, seed=config.seed,
                                    notion=config.notion)
    out = config.outdir()
    if out is not None:
        report.convergence_csv(out / "convergence.csv", result)
        report.convergence_figure(out / "convergence.png", result)
    payload = {
        "notion": config.notion.value,
        "population_violation": result.population_violation,
        "repetitions": result.repetitions,
        "delta": result.delta,
        "rows": result.to_rows(),
    }
    return _finish(payload, out, "convergence_summary")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--notion", choices=sorted(_NOTIONS), default="dp",
                        help="pairwise fairness criterion")
    common.add_argument("--cost", choices=sorted(_COSTS), default="absolute",
                        help="per-class cost matrix")
    common.add_argument("--seed", type=int, default=0,
                        help="seed for every random choice in the run")
    common.add_argument("--out", default=None,
                        help="directory for result files; omit to only print")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", required=True, help="training CSV path")
    data.add_argument("--label-col", required=True,
                      help="column holding the ordinal label")
    data.add_argument("--attr-col", default=None,
                      help="column holding the group attribute")
    data.add_argument("--attr-median-split", default=None,
                      help="numeric column; at or above its median is group 1")
    data.add_argument("--features", default=None,
                      help="comma-separated feature columns "
                           "(default: all remaining)")

    split = argparse.ArgumentParser(add_help=False)
    split.add_argument("--test-data", default=None,
                       help="separate held-out CSV")
    split.add_argument("--split-seed", type=int, default=None,
                       help="split --data into train/test with this seed")
    split.add_argument("--test-fraction", type=float, default=0.25,
                       help="held-out fraction for --split-seed")

    knobs = argparse.ArgumentParser(add_help=False)
    knobs.add_argument("--restarts", type=int, default=10,
                       help="threshold search restarts")
    knobs.add_argument("--pair-cap", type=int, default=600_000,
                       help="maximum sampled label-discordant pairs")
    knobs.add_argument("--grid-size", type=int, default=100,
                       help="multiplier grid points for the scorer stage")
    knobs.add_argument("--reg-strength", type=float, default=None,
                       help="fixed ridge strength (default: cross-validated)")
    knobs.add_argument("--max-iterations", type=int, default=2500,
                       help="scorer stage iteration cap")
    knobs.add_argument("--lambda-prime", type=float, default=None,
                       help="fixed threshold penalty in [0,1); default "
                            "couples it to the scorer knob")

    parser = argparse.ArgumentParser(
        prog="fairord",
        description="Fair ordinal regression: training, evaluation, and "
                    "synthetic studies.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[common, data],
                       help="group masses and cross-group label statistics")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("train", parents=[common, data, split, knobs],
                       help="train one model at a fixed trade-off value")
    p.add_argument("--mu-lambda", type=float, required=True,
                   help="shared fairness knob in [0,1)")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("evaluate", parents=[common, data],
                       help="score a saved model JSON on a dataset")
    p.add_argument("--model", required=True, help="model JSON path")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common, data, split, knobs],
                       help="trace the cost/fairness frontier over a grid")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--grid", default=None,
                       help="comma-separated mu values "
                            "(default 0,0.1,...,0.9)")
    group.add_argument("--mu-lambda", type=float, default=None,
                       help="single grid value")
    p.add_argument("--refine", action="store_true",
                   help="bisect the largest violation jump")
    p.add_argument("--refine-gap", type=float, default=0.2,
                   help="jump size that triggers refinement")
    p.add_argument("--refine-budget", type=int, default=5,
                   help="maximum inserted grid points")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("baseline", parents=[common, data, split],
                       help="ordered-logit and constant-median baselines "
                            "plus the randomized median mixture")
    p.add_argument("--model", default=None,
                   help="mix this model JSON instead of the ordered logit")
    p.add_argument("--p-grid", default=",".join(str(i / 10)
                                                for i in range(11)),
                   help="comma-separated median probabilities")
    p.add_argument("--trials", type=int, default=100,
                   help="Monte Carlo draws per interior p")
    p.set_defaults(handler=cmd_baseline)

    p = sub.add_parser("dp-exact", parents=[common, data],
                       help="provably optimal thresholds for a saved "
                            "scorer (small inputs only)")
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument("--lam", type=float, default=0.0,
                   help="violation penalty weight")
    p.set_defaults(handler=cmd_dp_exact)

    p = sub.add_parser("simulate", parents=[common],
                       help="exhaustive fair-threshold study on one "
                            "attribute pattern")
    p.add_argument("--k", type=int, required=True, help="number of classes")
    p.add_argument("--attrs", required=True,
                   help="comma-separated group ids by rank position")
    p.add_argument("--labels", default=None,
                   help="comma-separated labels by rank position (eo only)")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("convergence", parents=[common, data],
                       help="sampling deviation of the violation from its "
                            "population value")
    p.add_argument("--model", default=None,
                   help="model JSON path (default: fit the ordered logit)")
    p.add_argument("--n-grid", default="100,400,1600",
                   help="comma-separated sample sizes")
    p.add_argument("--repetitions", type=int, default=200,
                   help="draws per sample size")
    p.add_argument("--delta", type=float, default=0.05,
                   help="reported quantile is 1-delta")
    p.set_defaults(handler=cmd_convergence)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except GuardError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
