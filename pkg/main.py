import argparse
import sys

from dotenv import load_dotenv

from src.analyzer.evaluator import Policy, evaluate
from src.analyzer.sweeps import (
    ABLATION_VARIANTS,
    DEFAULT_ALPHAS,
    DEFAULT_FRACTIONS,
    build_router,
    run_ablation,
    split_dataset,
    sweep_alpha,
    sweep_fraction,
)
from src.dataset.builder import build_dataset, label_records
from src.dataset.records import ContextMode
from src.dataset.synth import synthesize
from src.router.encoders import encoder_from_spec
from src.router.model import ParadigmChoice, decide, forward, load_model, save_model
from src.router.trainer import train
from src.utils.config import RunConfig, apply_overrides, load_run_config
from src.utils.errors import DataError, NumericalError, UsageError, ValidationError
from src.utils.prompt_renderer import render_prompt
from src.utils.record_io import iter_raw_entries, read_jsonl, write_jsonl, write_lines
from src.utils.report_generator import (
    generate_markdown_report,
    generate_table_report,
    report_to_json,
    save_report,
    save_sweep_csv,
    sweep_summary,
    sweep_to_json,
)

load_dotenv()

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

DEFAULTS = RunConfig()
ALL_POLICIES = ("retrieval", "generation", "router", "oracle")


class CliParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def add_common_args(parser):
    parser.add_argument(
        "--config",
        help="TOML config file (default: $GEOROUTER_CONFIG, else built-in defaults)",
    )
    parser.add_argument(
        "--seed",
        type=int,
        help=f"Seed for every random draw of this command (default: {DEFAULTS.train.seed})",
    )
    parser.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        help="Print detailed progress information (default: off)",
    )


def add_dispo_args(parser):
    parser.add_argument(
        "--alpha",
        type=float,
        help=f"Soft-label steepness (default: {DEFAULTS.dispo.alpha})",
    )
    parser.add_argument(
        "--epsilon",
        type=float,
        help=f"Stability constant added to distances (default: {DEFAULTS.dispo.epsilon})",
    )


def add_train_args(parser):
    add_dispo_args(parser)
    train_defaults = DEFAULTS.train
    parser.add_argument(
        "--learning-rate",
        type=float,
        help=f"AdamW learning rate (default: {train_defaults.learning_rate})",
    )
    parser.add_argument(
        "--batch-size",
        type=int,
        help=f"Minibatch size (default: {train_defaults.batch_size})",
    )
    parser.add_argument(
        "--epochs", type=int, help=f"Training epochs (default: {train_defaults.epochs})"
    )
    parser.add_argument(
        "--weight-decay",
        type=float,
        help=f"Decoupled weight decay (default: {train_defaults.weight_decay})",
    )
    parser.add_argument(
        "--data-fraction",
        type=float,
        help=f"Proportion of the training data to use (default: {train_defaults.data_fraction})",
    )
    parser.add_argument(
        "--hard-labels",
        action="store_true",
        default=None,
        help="Train against binary labels instead of soft labels (default: off)",
    )
    model_defaults = DEFAULTS.model
    parser.add_argument(
        "--model-kind",
        choices=["linear", "mlp"],
        help=f"Routing head (default: {model_defaults.kind})",
    )
    parser.add_argument(
        "--hidden", type=int, help=f"MLP hidden width (default: {model_defaults.hidden})"
    )
    parser.add_argument(
        "--encoder",
        choices=["auto", "embedding", "context", "concat"],
        help=f"Feature encoder (default: {model_defaults.encoder})",
    )
    parser.add_argument(
        "--context-mode",
        choices=[m.value for m in ContextMode],
        help=f"Context visible to the context encoder (default: {model_defaults.context_mode})",
    )


def add_threshold_args(parser):
    parser.add_argument(
        "--thresholds",
        type=_float_list,
        help="Comma-separated distance thresholds in km (default: "
        + ",".join(f"{t:g}" for t in DEFAULTS.thresholds)
        + ")",
    )


def create_parser():
    parser = CliParser(
        prog="georouter",
        description="GeoRouter - route geolocalization queries between retrieval and generation",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    build = subparsers.add_parser("build", help="Label raw paired predictions")
    build.add_argument("input", help="Raw JSONL file of paired predictions")
    build.add_argument("output", help="Labeled dataset JSONL file to write")
    add_common_args(build)
    add_dispo_args(build)

    synth = subparsers.add_parser("synth", help="Generate a synthetic dataset")
    synth.add_argument("output", help="Dataset JSONL file to write")
    synth_defaults = DEFAULTS.synth
    synth.add_argument("--n", type=int, help=f"Number of records (default: {synth_defaults.n})")
    synth.add_argument(
        "--dim", type=int, help=f"Embedding dimension (default: {synth_defaults.dim})"
    )
    synth.add_argument(
        "--signal-strength",
        type=float,
        help=f"Strength of the planted routing signal (default: {synth_defaults.signal_strength})",
    )
    synth.add_argument(
        "--near-tie-fraction",
        type=float,
        help=f"Fraction of near-tie records (default: {synth_defaults.near_tie_fraction})",
    )
    synth.add_argument(
        "--error-sigma",
        type=float,
        help=f"Log-normal shape of prediction errors (default: {synth_defaults.error_sigma})",
    )
    synth.add_argument(
        "--num-candidates",
        type=int,
        help=f"Retrieved candidates per record (default: {synth_defaults.num_candidates})",
    )
    add_common_args(synth)

    train_cmd = subparsers.add_parser("train", help="Train a router")
    train_cmd.add_argument("input", help="Dataset JSONL file with ground truth")
    train_cmd.add_argument("model", help="Model file to write")
    train_cmd.add_argument(
        "--holdout",
        help="Train on a seeded 80%% split and write the other 20%% here (default: off)",
    )
    add_common_args(train_cmd)
    add_train_args(train_cmd)

    route = subparsers.add_parser("route", help="Route every record of a dataset")
    route.add_argument("input", help="Dataset JSONL file")
    route.add_argument("model", help="Trained model file")
    route.add_argument("output", help="JSONL file of per-record choices and scores")
    route.add_argument(
        "--prompts",
        help="Also write the rendered routing prompt of every record here (default: none)",
    )
    add_common_args(route)

    eval_cmd = subparsers.add_parser("eval", help="Evaluate routing policies")
    eval_cmd.add_argument("input", help="Dataset JSONL file with ground truth")
    eval_cmd.add_argument("--model", help="Trained model file (needed for the router policy)")
    eval_cmd.add_argument(
        "--policies",
        help="Comma-separated subset of retrieval,generation,router,oracle "
        "(default: all, router only when --model is given)",
    )
    eval_cmd.add_argument("--output", "-o", help="JSON report path (default: none)")
    eval_cmd.add_argument("--table", help="Plain-text table report path (default: none)")
    eval_cmd.add_argument("--markdown", help="Markdown report path (default: none)")
    add_common_args(eval_cmd)
    add_threshold_args(eval_cmd)

    sweep = subparsers.add_parser("sweep", help="Alpha sweep, data-fraction study or ablation")
    sweep.add_argument("input", help="Dataset JSONL file with ground truth")
    sweep.add_argument(
        "--kind",
        choices=["alpha", "fraction", "ablation"],
        default="alpha",
        help="What to vary (default: alpha)",
    )
    sweep.add_argument(
        "--values",
        help="Comma-separated values (default: "
        + ",".join(f"{a:g}" for a in DEFAULT_ALPHAS)
        + " for alpha, "
        + ",".join(f"{f:g}" for f in DEFAULT_FRACTIONS)
        + " for fraction, all variants for ablation)",
    )
    sweep.add_argument("--output", "-o", help="CSV of (value, threshold, accuracy) (default: none)")
    sweep.add_argument("--json", help="JSON file of the full reports (default: none)")
    add_common_args(sweep)
    add_train_args(sweep)
    add_threshold_args(sweep)
    return parser


def resolve_config(args):
    """Defaults, then the config file, then any flag that was given."""
    run_config = load_run_config(args.config)
    seed = args.seed
    hard = True if getattr(args, "hard_labels", None) else None
    overrides = {
        "dispo": {
            "alpha": getattr(args, "alpha", None),
            "epsilon": getattr(args, "epsilon", None),
            "hard_label_mode": hard,
        },
        "train": {
            "seed": seed,
            "learning_rate": getattr(args, "learning_rate", None),
            "batch_size": getattr(args, "batch_size", None),
            "epochs": getattr(args, "epochs", None),
            "weight_decay": getattr(args, "weight_decay", None),
            "data_fraction": getattr(args, "data_fraction", None),
        },
        "synth": {
            "seed": seed,
            "n": getattr(args, "n", None),
            "dim": getattr(args, "dim", None),
            "signal_strength": getattr(args, "signal_strength", None),
            "near_tie_fraction": getattr(args, "near_tie_fraction", None),
            "error_sigma": getattr(args, "error_sigma", None),
            "num_candidates": getattr(args, "num_candidates", None),
        },
        "model": {
            "kind": getattr(args, "model_kind", None),
            "hidden": getattr(args, "hidden", None),
            "encoder": getattr(args, "encoder", None),
            "context_mode": getattr(args, "context_mode", None),
        },
        "eval": {"thresholds": getattr(args, "thresholds", None)},
    }
    return apply_overrides(run_config, overrides)


def cmd_build(args, run_config):
    print(f"Building dataset from {args.input}...")
    entries = iter_raw_entries(args.input, strict=False)
    instances, summary = build_dataset(
        entries, run_config.dispo.epsilon, run_config.dispo.alpha, verbose=args.verbose
    )
    write_jsonl(
        args.output,
        [inst.record for inst in instances],
        [inst.target for inst in instances],
    )
    print(f"{summary.kept} instances, {summary.skipped} skipped")
    if summary.skipped:
        if not args.verbose:
            for message in summary.diagnostics:
                print(message)
        print(f"skipped: {summary.skipped}")
    print(f"Label balance (generation better): {summary.label_balance:.4f}")
    print(f"Dataset saved to {args.output}")
    return EXIT_OK


def cmd_synth(args, run_config):
    records = synthesize(run_config.synth, verbose=args.verbose)
    write_jsonl(args.output, records)
    print(f"{len(records)} synthetic records saved to {args.output}")
    return EXIT_OK


def cmd_train(args, run_config):
    records = read_jsonl(args.input)
    train_cfg = run_config.train
    if args.holdout:
        records, heldout = split_dataset(records, 0.8, train_cfg.seed)
        write_jsonl(args.holdout, heldout)
        print(f"Held out {len(heldout)} records to {args.holdout}")

    encoder, init = build_router(records, run_config.model, train_cfg.seed)
    instances = label_records(records, run_config.dispo.epsilon, run_config.dispo.alpha)
    label = "hard labels" if run_config.dispo.hard_label_mode else "soft labels"
    print(f"Training {init.kind.value} router on {len(instances)} instances ({label})...")
    result = train(instances, train_cfg, run_config.dispo, init, encoder, verbose=args.verbose)
    for epoch, value in enumerate(result.epoch_losses, 1):
        print(f"epoch {epoch}: mean loss {value:.6f}")
    save_model(result.model, args.model)
    print(f"Model saved to {args.model}")
    return EXIT_OK


def cmd_route(args, run_config):
    records = read_jsonl(args.input)
    model = load_model(args.model)
    encoder = encoder_from_spec(model.encoder_spec)
    if not records:
        raise DataError("no records to route", path=args.input)
    scores, _ = forward(model, encoder.encode_many(records))
    rows = []
    generation = 0
    for record, r in zip(records, scores):
        choice = decide(float(r))
        is_generation = choice == ParadigmChoice.GENERATION
        chosen = record.pred_generation if is_generation else record.pred_retrieval
        generation += is_generation
        rows.append(
            {
                "id": record.id,
                "score": float(r),
                "choice": choice.value,
                "prediction": chosen.to_pair(),
            }
        )
    write_lines(args.output, rows)
    print(f"Routed {len(rows)} records ({generation} to generation), saved to {args.output}")
    if args.prompts:
        mode = ContextMode(model.encoder_spec.get("mode", ContextMode.FULL.value))
        write_lines(
            args.prompts, ({"id": r.id, "prompt": render_prompt(r, mode)} for r in records)
        )
        print(f"Prompts saved to {args.prompts}")
    return EXIT_OK


def _parse_policies(text, model_path):
    if text:
        names = [p.strip() for p in text.split(",") if p.strip()]
    else:
        names = [p for p in ALL_POLICIES if p != "router" or model_path]
    policies = []
    for name in names:
        if name not in ALL_POLICIES:
            raise UsageError(f"unknown policy {name!r}")
        if name == "router":
            if not model_path:
                raise UsageError("the router policy needs --model")
            policies.append(Policy.router(load_model(model_path)))
        elif name == "retrieval":
            policies.append(Policy.pure_retrieval())
        elif name == "generation":
            policies.append(Policy.pure_generation())
        else:
            policies.append(Policy.oracle())
    if not policies:
        raise UsageError("no policies selected")
    return policies


def cmd_eval(args, run_config):
    records = read_jsonl(args.input)
    policies = _parse_policies(args.policies, args.model)
    report = evaluate(records, policies, run_config.thresholds)
    table = generate_table_report(report)
    print(table)
    if args.output:
        save_report(report_to_json(report), args.output)
        print(f"JSON report saved to {args.output}")
    if args.table:
        save_report(table, args.table)
    if args.markdown:
        save_report(generate_markdown_report(report), args.markdown)
    return EXIT_OK


def cmd_sweep(args, run_config):
    records = read_jsonl(args.input)
    common = {
        "cfg": run_config.train,
        "ts": run_config.thresholds,
        "dispo": run_config.dispo,
        "settings": run_config.model,
        "verbose": args.verbose,
    }
    if args.kind == "ablation":
        variants = args.values.split(",") if args.values else list(ABLATION_VARIANTS)
        rows = run_ablation(records, [v.strip() for v in variants], **common)
    else:
        values = DEFAULT_ALPHAS if args.kind == "alpha" else DEFAULT_FRACTIONS
        if args.values:
            try:
                values = _float_list(args.values)
            except argparse.ArgumentTypeError as e:
                raise UsageError(str(e))
        sweep = sweep_alpha if args.kind == "alpha" else sweep_fraction
        rows = sweep(records, values, **common)

    value_name = {"alpha": "alpha", "fraction": "fraction", "ablation": "variant"}[args.kind]
    print(sweep_summary(rows, value_name), end="")
    if args.output:
        save_sweep_csv(rows, args.output, value_name)
        print(f"CSV saved to {args.output}")
    if args.json:
        save_report(sweep_to_json(rows, value_name), args.json)
    return EXIT_OK


COMMANDS = {
    "build": cmd_build,
    "synth": cmd_synth,
    "train": cmd_train,
    "route": cmd_route,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}


def main(argv=None):
    parser = create_parser()
    args = parser.parse_args(argv)
    try:
        run_config = resolve_config(args)
        return COMMANDS[args.command](args, run_config)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, ValidationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
