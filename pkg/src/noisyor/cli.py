"""Command-line front end.

Subcommands cover the whole workflow: `gen` draws a random model, `sample`
simulates a dataset under a battery of experiments, `learn` fits a model with
one of the three algorithms, `study` runs a preset experiment sweep and
renders its figures, `report` re-renders figures from a saved summary, and
`rerun` replays any previous command from its manifest.

Every command writes a RunManifest JSON listing its outputs; replaying the
manifest reproduces those outputs byte for byte because all randomness flows
from the --seed flag.  Exit codes: 0 success, 2 usage, 3 bad data, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

from . import __version__
from .data import (
    default_battery,
    read_dataset_csv,
    read_experiment_specs,
    write_dataset_csv,
    write_experiment_manifest,
)
from .ec import run_ec
from .em import EmConfig, run_em
from .errors import DataError, NoisyOrError, NumericalError
from .evaluate import (
    StudyConfig,
    accuracy_config,
    robustness_config,
    run_study,
    scalability_config,
    write_results_csv,
)
from .generate import (
    GenConfig,
    InteractiveModel,
    derive_rng,
    interactive_from,
    random_model,
    sample_dataset,
)
from .identify import run_id
from .model import Model
from .report import render_figures

_PRESETS = {
    "accuracy": accuracy_config,
    "scalability": scalability_config,
    "robustness": robustness_config,
}


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise DataError(f"config {path} must hold a JSON object")
    return obj


def _opt(args, config, key, default):
    """Flag value if given, else config-file value, else the default."""
    value = getattr(args, key)
    if value is not None:
        return value
    return config.get(key, default)


def _write_manifest(path, args, argv, resolved, seed, outputs, started):
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config_file": getattr(args, "config", None),
        "config": resolved,
        "seed": seed,
        "version": __version__,
        "outputs": [str(p) for p in outputs],
        "wall_clock_seconds": round(time.perf_counter() - started, 3),
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _sibling(out, suffix):
    root, _ = os.path.splitext(out)
    return root + suffix


def _manifest_path(out):
    return _sibling(out, ".manifest.json")


def _load_model_file(path):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    if obj.get("interactions"):
        return InteractiveModel.from_json(obj)
    return Model.from_json(obj)


# ---- commands -----------------------------------------------------------------


def cmd_gen(args, argv):
    started = time.perf_counter()
    config = _load_config(args.config)
    seed = _opt(args, config, "seed", 0)
    gen = GenConfig(
        n_observed=_opt(args, config, "n", None) or 0,
        n_latent=_opt(args, config, "latent", 0),
        max_parents=_opt(args, config, "max_parents", 2),
        link_range=(
            _opt(args, config, "link_min", 0.1),
            _opt(args, config, "link_max", 0.9),
        ),
        negative_fraction=_opt(args, config, "negative_fraction", 0.5),
        dirichlet_alpha=_opt(args, config, "dirichlet_alpha", 1.0),
        confounded=_opt(args, config, "confounded", True),
        seed=seed,
    )
    model = random_model(gen)
    model.save(args.out)
    outputs = [args.out]
    interaction = _opt(args, config, "interaction", 0.0)
    resolved = {
        "n": gen.n_observed,
        "latent": gen.n_latent,
        "max_parents": gen.max_parents,
        "link_min": gen.link_range[0],
        "link_max": gen.link_range[1],
        "negative_fraction": gen.negative_fraction,
        "dirichlet_alpha": gen.dirichlet_alpha,
        "confounded": gen.confounded,
        "interaction": interaction,
    }
    if interaction > 0.0:
        twin = interactive_from(model, interaction, derive_rng(seed, 1))
        ipath = args.interactive_out or _sibling(args.out, ".interactive.json")
        twin.save(ipath)
        outputs.append(ipath)
    _write_manifest(_manifest_path(args.out), args, argv, resolved, seed, outputs, started)
    return 0


def cmd_sample(args, argv):
    started = time.perf_counter()
    config = _load_config(args.config)
    seed = _opt(args, config, "seed", 0)
    model = _load_model_file(args.model)
    if args.experiments:
        specs = read_experiment_specs(args.experiments, model.names)
    else:
        specs = default_battery(model.n, _opt(args, config, "intervention_prob", 0.5))
    per = _opt(args, config, "per_experiment", None)
    total = _opt(args, config, "total", None)
    if (per is None) == (total is None):
        raise DataError("exactly one of --per-experiment and --total is required")
    if per is None:
        per = int(total) // len(specs)
    if per < 1:
        raise DataError("sample count must give at least one draw per experiment")
    dataset = sample_dataset(model, specs, per, seed)
    write_dataset_csv(dataset, args.out)
    outputs = [args.out]
    if args.experiments_out:
        write_experiment_manifest(dataset, args.experiments_out)
        outputs.append(args.experiments_out)
    resolved = {"model": args.model, "experiments": args.experiments, "per_experiment": per}
    _write_manifest(_manifest_path(args.out), args, argv, resolved, seed, outputs, started)
    return 0


def cmd_learn(args, argv):
    started = time.perf_counter()
    config = _load_config(args.config)
    seed = _opt(args, config, "seed", 0)
    dataset = read_dataset_csv(args.data)
    alpha = _opt(args, config, "alpha", 0.01)
    if args.algo == "id":
        learned = run_id(
            dataset,
            alpha=alpha,
            negativity_tolerance=_opt(args, config, "negativity_tolerance", 0.05),
        )
    elif args.algo == "ec":
        learned = run_ec(
            dataset,
            alpha=alpha,
            min_stratum=_opt(args, config, "min_stratum", 5.0),
            max_blocking_sets=_opt(args, config, "max_blocking_sets", 32),
            quick_disturbance=bool(_opt(args, config, "quick_disturbance", False)),
        )
    else:
        em_cfg = EmConfig(
            tol=_opt(args, config, "tol", 1e-6),
            max_iters=_opt(args, config, "max_iters", 500),
            restarts=_opt(args, config, "restarts", 3),
            init=_opt(args, config, "init", "auto"),
            map_prior=bool(_opt(args, config, "map", False)),
            map_scale=_opt(args, config, "map_scale", 0.01),
            prune_threshold=_opt(args, config, "prune_threshold", 0.05),
            seed=seed,
        )
        learned = run_em(dataset, em_cfg)
    diag_path = args.diagnostics or _sibling(args.out, ".diagnostics.json")
    learned.save(args.out, diagnostics_path=diag_path)
    outputs = [args.out, diag_path]
    if args.algo == "em":
        trace_path = _sibling(args.out, ".trace.csv")
        _write_trace_csv(learned.diagnostics.get("trace", []), trace_path)
        outputs.append(trace_path)
    resolved = {"data": args.data, "algo": args.algo, "alpha": alpha}
    _write_manifest(_manifest_path(args.out), args, argv, resolved, seed, outputs, started)
    return 0


def _write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loglik", "max_param_delta"])
        for row in trace:
            writer.writerow(
                [
                    row["iteration"],
                    repr(float(row["loglik"])),
                    "" if row["max_param_delta"] is None else repr(float(row["max_param_delta"])),
                ]
            )


def _study_from_file(config, args):
    merged = dict(config)
    for key in ("replicates", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    for key in ("sizes", "samples", "algorithms", "x_grid", "y_grid"):
        if key in merged:
            merged[key] = tuple(merged[key])
    try:
        return StudyConfig(**merged)
    except TypeError as exc:
        raise DataError(f"bad study config: {exc}") from exc


def _int_list(text):
    return tuple(int(tok) for tok in text.split(",") if tok)


def _float_list(text):
    return tuple(float(tok) for tok in text.split(",") if tok)


def cmd_study(args, argv):
    started = time.perf_counter()
    config = _load_config(args.config)
    if "kind" in config:
        study = _study_from_file(config, args)
    else:
        if args.preset is None:
            raise DataError("a --preset or a config file with a 'kind' entry is required")
        overrides = {}
        for key in ("replicates", "seed", "samples", "sizes", "x_grid", "y_grid"):
            value = getattr(args, key)
            if value is not None:
                overrides[key] = value
        try:
            study = _PRESETS[args.preset](**overrides)
        except TypeError as exc:
            raise DataError(f"flag does not apply to the {args.preset} preset: {exc}") from exc
    os.makedirs(args.outdir, exist_ok=True)
    rows, summary = run_study(study, parallel=args.parallel or 1)
    results_path = os.path.join(args.outdir, "results.csv")
    summary_path = os.path.join(args.outdir, "summary.json")
    write_results_csv(rows, results_path)
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    outputs = [results_path, summary_path]
    if not args.no_figures:
        outputs.extend(render_figures(summary, args.outdir))
    resolved = {"study": study.kind, "replicates": study.replicates}
    _write_manifest(
        os.path.join(args.outdir, "manifest.json"),
        args,
        argv,
        resolved,
        study.seed,
        outputs,
        started,
    )
    return 0


def cmd_report(args, argv):
    started = time.perf_counter()
    try:
        with open(args.summary) as fh:
            summary = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read summary {args.summary}: {exc}") from exc
    outdir = args.outdir or os.path.dirname(os.path.abspath(args.summary))
    outputs = render_figures(summary, outdir)
    _write_manifest(
        os.path.join(outdir, "report.manifest.json"),
        args,
        argv,
        {"summary": args.summary},
        summary.get("seed", 0),
        outputs,
        started,
    )
    return 0


def cmd_rerun(args, argv):
    try:
        with open(args.manifest) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {args.manifest}: {exc}") from exc
    saved = manifest.get("argv")
    if not saved:
        raise DataError(f"{args.manifest} lists no argv to replay")
    if saved[0] == "rerun":
        raise DataError("refusing to replay a rerun manifest")
    return main(saved)


# ---- parser -------------------------------------------------------------------


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    parser.add_argument("--config", default=None, help="JSON config file; flags override it")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="noisyor",
        description="Generate, sample, and learn binary noisy-OR causal models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="draw a random model and save it as JSON")
    p.add_argument("--n", type=int, default=None, help="number of observed variables")
    p.add_argument("--latent", type=int, default=None, help="number of latent prefix variables")
    p.add_argument("--max-parents", dest="max_parents", type=int, default=None)
    p.add_argument("--link-min", dest="link_min", type=float, default=None)
    p.add_argument("--link-max", dest="link_max", type=float, default=None)
    p.add_argument("--negative-fraction", dest="negative_fraction", type=float, default=None)
    p.add_argument("--dirichlet-alpha", dest="dirichlet_alpha", type=float, default=None)
    p.add_argument(
        "--confounded",
        dest="confounded",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="joint Dirichlet disturbance (default) vs independent leaks",
    )
    p.add_argument(
        "--interaction",
        type=float,
        default=None,
        help="also write an interactive variant with pair effects drawn on [0, Y]",
    )
    p.add_argument("--interactive-out", dest="interactive_out", default=None)
    p.add_argument("-o", "--out", required=True, help="model JSON path")
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sample", help="simulate a dataset from a saved model")
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument(
        "--experiments",
        default=None,
        help="experiment manifest JSON; default is passive plus every do(X_i)",
    )
    p.add_argument("--per-experiment", dest="per_experiment", type=int, default=None)
    p.add_argument("--total", type=int, default=None, help="total samples, split evenly")
    p.add_argument("--intervention-prob", dest="intervention_prob", type=float, default=None)
    p.add_argument("--experiments-out", dest="experiments_out", default=None)
    p.add_argument("-o", "--out", required=True, help="dataset CSV path")
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("learn", help="fit a model to a dataset CSV")
    p.add_argument("--data", required=True, help="dataset CSV path")
    p.add_argument("--algo", required=True, choices=("id", "ec", "em"))
    p.add_argument("--alpha", type=float, default=None, help="independence test level")
    p.add_argument(
        "--negativity-tolerance", dest="negativity_tolerance", type=float, default=None
    )
    p.add_argument("--min-stratum", dest="min_stratum", type=float, default=None)
    p.add_argument("--max-blocking-sets", dest="max_blocking_sets", type=int, default=None)
    p.add_argument(
        "--quick-disturbance",
        dest="quick_disturbance",
        action=argparse.BooleanOptionalAction,
        default=None,
    )
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--init", choices=("auto", "ec", "random"), default=None)
    p.add_argument("--map", dest="map", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--map-scale", dest="map_scale", type=float, default=None)
    p.add_argument("--prune-threshold", dest="prune_threshold", type=float, default=None)
    p.add_argument("--diagnostics", default=None, help="diagnostics JSON path")
    p.add_argument("-o", "--out", required=True, help="learned model JSON path")
    _add_common(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("study", help="run a study preset and render its figures")
    p.add_argument("--preset", choices=sorted(_PRESETS), default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--samples", type=_int_list, default=None, help="comma-separated sizes")
    p.add_argument("--sizes", type=_int_list, default=None, help="comma-separated model sizes")
    p.add_argument("--x-grid", dest="x_grid", type=_float_list, default=None)
    p.add_argument("--y-grid", dest="y_grid", type=_float_list, default=None)
    p.add_argument("--parallel", type=int, default=None, help="worker processes")
    p.add_argument("--no-figures", dest="no_figures", action="store_true")
    p.add_argument("-o", "--outdir", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("report", help="render figures from a saved study summary")
    p.add_argument("--summary", required=True, help="summary JSON path")
    p.add_argument("-o", "--outdir", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("rerun", help="replay a command from its manifest")
    p.add_argument("manifest", help="manifest JSON path")
    p.set_defaults(func=cmd_rerun)

    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except DataError as exc:
        print(f"noisyor: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"noisyor: {exc}", file=sys.stderr)
        return 4
    except NoisyOrError as exc:
        print(f"noisyor: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
