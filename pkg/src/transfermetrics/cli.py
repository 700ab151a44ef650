"""Command-line entry point: ``transfermetrics <subcommand> ...``."""

import argparse
import json
import sys
from pathlib import Path


from .data import CheckpointManifest, FeatureSet, SubsampleSpec, load_labels, load_tensor
from .exceptions import NumericalError, ValidationError
from .harness import (
    MetricConfig,
    SyntheticSpec,
    dump_report,
    evaluate_ranking,
    format_evaluation_table,
    generate_synthetic_benchmark,
    load_report,
    run_metrics,
    std_ratio_csv,
)
from .harness.checks import ORACLE_CHECKS
from .metrics import (
    MetricResult,
    h_score,
    leep_score,
    linear_metric,
    linear_valid_metric,
    logme_score,
    nce_score,
    nleep_score,
    pactran_dirichlet,
    pactran_gamma,
    pactran_gaussian,
)
from .metrics.base import _jsonable

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2

COMPUTE_METRICS = (
    "leep",
    "nce",
    "nleep",
    "hscore",
    "logme",
    "linear",
    "linear_valid",
    "pt_dir",
    "pt_gam",
    "pt_gauss",
)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the validation code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _print_json(obj):
    print(json.dumps(_jsonable(obj), indent=2))


def _compute(args):
    features = load_tensor(args.features)
    labels = load_labels(args.labels)
    fs = FeatureSet(features, labels, args.num_classes)
    n, d_eff = fs.n, fs.d + 1
    probs = load_tensor(args.source_probs) if args.source_probs else None
    name = args.metric
    if name in ("leep", "nce", "pt_dir", "pt_gam") and probs is None:
        raise ValidationError(f"metric {name} needs --source-probs")
    beta = args.beta if args.beta is not None else 10.0 * n
    sigma0_sq = args.sigma0 if args.sigma0 is not None else 100.0 / d_eff
    k = fs.num_classes
    if name == "leep":
        res = leep_score(probs, fs.labels, k)
    elif name == "nce":
        res = nce_score(probs, fs.labels, k)
    elif name == "nleep":
        res = nleep_score(fs, seed=args.seed)
    elif name == "hscore":
        res = h_score(fs)
    elif name == "logme":
        res = logme_score(fs)
    elif name == "linear":
        res = linear_metric(fs, beta=beta)
    elif name == "linear_valid":
        grid = [args.beta] if args.beta is not None else None
        res = linear_valid_metric(fs, beta_grid=grid, seed=args.seed)
    elif name == "pt_dir":
        score, state = pactran_dirichlet(probs, fs.labels, k)
        res = MetricResult(
            "pt_dir",
            score,
            {"iterations": state.iterations, "converged": state.converged, "elbo_trace": state.elbo_trace},
        )
    elif name == "pt_gam":
        score, state = pactran_gamma(probs, fs.labels, k)
        res = MetricResult(
            "pt_gam",
            score,
            {"iterations": state.iterations, "converged": state.converged, "elbo_trace": state.elbo_trace},
        )
    else:
        score, r = pactran_gaussian(fs.features, fs.labels, k, beta, sigma0_sq)
        res = MetricResult(
            "pt_gauss",
            score,
            {
                "rer": r.rer,
                "fr": r.fr,
                "trace_hessian": r.trace_hessian,
                "sigma_ratio": r.sigma_ratio,
                "hparams": r.hparams,
                "converged": r.converged,
            },
        )
    _print_json(res.to_dict())
    return EXIT_OK


def _rank(args):
    manifest = CheckpointManifest.load(args.manifest)
    doc = _read_json(args.config) if args.config else {}
    sub = dict(doc.get("subsample", {}))
    if args.samples_per_class is not None:
        sub["samples_per_class"] = args.samples_per_class
    if args.splits is not None:
        sub["num_splits"] = args.splits
    if args.seed is not None:
        doc["seed"] = args.seed
        sub["seed"] = args.seed
    if "samples_per_class" not in sub:
        raise ValidationError("samples per class missing: pass --samples-per-class or set subsample in config")
    spec = SubsampleSpec(**sub)
    config = MetricConfig.from_dict(doc)
    if args.workers is not None:
        config.workers = args.workers
    report = run_metrics(manifest, spec, config, timestamp=not args.no_timestamp)
    out = Path(args.out)
    dump_report(report, out)
    out.with_suffix(".std_ratio.csv").write_text(std_ratio_csv(report))
    print(f"wrote {out}")
    return EXIT_OK


def _evaluate(args):
    report = load_report(args.report)
    manifest = CheckpointManifest.load(args.manifest, check_files=False)
    evaluation = evaluate_ranking(report, manifest)
    _print_json(evaluation)
    print(format_evaluation_table(evaluation))
    return EXIT_OK


def _synth(args):
    doc = _read_json(args.spec) if args.spec else {}
    if args.seed is not None:
        doc["seed"] = args.seed
    spec = SyntheticSpec.from_dict(doc)
    manifest, errors = generate_synthetic_benchmark(spec, args.out)
    _print_json({"manifest": str(Path(args.out) / "manifest.json"), "test_errors": errors})
    return EXIT_OK


def _oracle(args):
    check = ORACLE_CHECKS[args.kind]
    kwargs = {"seed": args.seed if args.seed is not None else 0}
    if args.instances is not None:
        kwargs["num_instances"] = args.instances
    records = check(**kwargs)
    failed = [r for r in records if not r.ok]
    _print_json(
        {
            "kind": args.kind,
            "instances": len(records),
            "violations": [r._asdict() for r in failed],
            "min_slack": min(r.slack for r in records) if records else None,
        }
    )
    return EXIT_NUMERICAL if failed else EXIT_OK


def build_parser():
    parser = _Parser(prog="transfermetrics", description="Transferability metrics for checkpoint ranking.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compute", help="score one checkpoint with one metric")
    p.add_argument("--metric", required=True, choices=COMPUTE_METRICS)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--source-probs")
    p.add_argument("--num-classes", type=int)
    p.add_argument("--beta", type=float, help="regularization strength (default 10 N)")
    p.add_argument("--sigma0", type=float, help="prior variance sigma0^2 (default 100 / (D + 1))")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_compute)

    p = sub.add_parser("rank", help="run every configured metric over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--samples-per-class", type=int)
    p.add_argument("--splits", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--no-timestamp", action="store_true")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_rank)

    p = sub.add_parser("evaluate", help="Kendall tau of a report against test errors")
    p.add_argument("--report", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_evaluate)

    p = sub.add_parser("synth", help="write a synthetic checkpoint family")
    p.add_argument("--spec")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_synth)

    p = sub.add_parser("oracle", help="run a seeded oracle check")
    p.add_argument("--kind", required=True, choices=sorted(ORACLE_CHECKS))
    p.add_argument("--instances", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_oracle)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
