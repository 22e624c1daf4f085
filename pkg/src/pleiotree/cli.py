"""Command-line surface: simulate, fit, evaluate.

Exit codes: 0 success, 1 usage/configuration error, 2 the fit hit an
iteration cap without converging (reports are still written), 3 data or
format error.
"""

import argparse
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import em, fileio, sim
from .errors import ConfigError, DataError, NumericError
from .model import StateSpace
from .tree import TreeConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2
EXIT_DATA = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pleiotree",
        description=(
            "Joint mixture modeling of multi-trait GWAS p-values with an "
            "annotation regression tree prior and FDR-controlled SNP "
            "prioritization."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a simulated replicate")
    p_sim.add_argument("--m", type=int, default=10000, help="SNP count")
    p_sim.add_argument("--k", type=int, default=25, help="annotation count")
    p_sim.add_argument("--u", type=float, default=0.10,
                       help="fraction of SNPs annotated in each signal annotation")
    p_sim.add_argument("--v", type=float, default=0.50,
                       help="overlap fraction between paired signal annotations")
    p_sim.add_argument("--alpha1", type=float, default=0.4)
    p_sim.add_argument("--alpha2", type=float, default=0.3)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out-dir", required=True)

    p_fit = sub.add_parser("fit", help="fit the model and prioritize SNPs")
    p_fit.add_argument("--gwas", required=True)
    p_fit.add_argument("--annot", required=True)
    p_fit.add_argument("--annot-threshold", type=float, default=None,
                       help="binarize annotation scores at this cutoff")
    p_fit.add_argument("--cp", type=float, default=0.01)
    p_fit.add_argument("--min-leaf", type=int, default=None)
    p_fit.add_argument("--max-depth", type=int, default=10)
    p_fit.add_argument("--fdr-level", type=float, action="append", default=None,
                       help="global FDR level (repeatable; default 0.05)")
    p_fit.add_argument("--lfdr-level", type=float, default=0.20)
    p_fit.add_argument("--baseline", action="store_true",
                       help="also fit an annotation-blind reference model")
    p_fit.add_argument("--out-dir", required=True)

    p_eval = sub.add_parser("evaluate",
                            help="score fit outputs against simulation truth")
    p_eval.add_argument("--fit-dir", action="append", required=True)
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--lfdr-level", type=float, default=0.20)
    p_eval.add_argument("--out", required=True)
    return parser


def cmd_simulate(args) -> int:
    config = sim.SimConfig(
        m=args.m, k=args.k, u=args.u, v=args.v,
        alpha_true=(args.alpha1, args.alpha2), seed=args.seed,
    )
    gwas, annotations, truth = sim.simulate(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fileio.write_gwas(gwas, out_dir / "gwas.tsv")
    fileio.write_annotations(annotations, out_dir / "annotations.tsv")
    fileio.write_truth(truth, gwas.snp_ids, out_dir / "truth.tsv")
    fileio.write_sim_config(config, out_dir / "sim_config.json")

    space = StateSpace(2)
    state_counts = np.bincount(truth.states, minlength=space.size)
    for label, count in zip(space.labels, state_counts):
        print(f"state {label}: {count} SNPs")
    a = annotations.values
    for pair in range(3):
        overlap = int((a[:, 2 * pair] * a[:, 2 * pair + 1]).sum())
        print(f"|A{2 * pair + 1} & A{2 * pair + 2}| = {overlap}")
    print(f"wrote gwas.tsv, annotations.tsv, truth.tsv to {out_dir}")
    return EXIT_OK


def cmd_fit(args) -> int:
    gwas = fileio.load_gwas(args.gwas)
    annotations = fileio.load_annotations(args.annot, args.annot_threshold)
    fileio.check_alignment(gwas, annotations)
    tree_config = TreeConfig(cp=args.cp, min_leaf=args.min_leaf,
                             max_depth=args.max_depth)
    config = em.EmConfig(tree=tree_config)
    fit = em.fit(gwas, annotations, config)
    baseline = em.fit_baseline(gwas, config) if args.baseline else None
    levels = args.fdr_level if args.fdr_level else [0.05]
    summary = fileio.write_fit_report(
        fit, args.out_dir, lfdr_levels=(args.lfdr_level,),
        global_fdr_levels=tuple(levels), baseline=baseline,
    )
    alpha = ", ".join(
        f"{name}={value:.4f}" for name, value in summary["alpha"].items()
    )
    print(f"alpha: {alpha}")
    print(f"selected annotations: {summary['selected_annotations'] or '(none)'}")
    for level, per_target in summary["counts"]["global_fdr"].items():
        pretty = ", ".join(f"{k}={v}" for k, v in per_target.items())
        print(f"declared at global FDR {level}: {pretty}")
    if not fit.converged:
        print("warning: iteration cap reached before convergence",
              file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _replicate_row(fit_dir, truth, alpha_true, level) -> dict:
    summary, per_snp = fileio.load_fit_outputs(fit_dir)
    trait_names = summary["trait_names"]
    named_targets = sim.sim_targets(len(trait_names), trait_names)
    fdr_by_target = {}
    truth_by_target = {}
    for name, target in named_targets:
        col = f"fdr_{name}"
        if col not in per_snp.columns:
            raise DataError(f"{fit_dir} is missing column {col}")
        fdr_by_target[name] = per_snp[col].to_numpy(dtype=float)
        truth_by_target[name] = truth.positives(target)
    alpha_hat = [summary["alpha"][name] for name in trait_names]
    if alpha_true is None:
        alpha_true = [float("nan")] * len(trait_names)
    report = sim.evaluate_from_fdr(
        fdr_by_target, truth_by_target, summary["selected_annotations"],
        alpha_hat, truth, alpha_true, level,
    )
    row = {"fit_dir": str(fit_dir)}
    row.update(report.as_row())
    for name, target in named_targets:
        col = f"fdr_{name}_baseline"
        if col in per_snp.columns:
            baseline_fdr = per_snp[col].to_numpy(dtype=float)
            pos = truth_by_target[name]
            row[f"auc_baseline_{name}"] = sim.auc_score(baseline_fdr, pos)
            declared = baseline_fdr <= level
            n_pos = max(1, int(pos.sum()))
            row[f"power_baseline_{name}"] = float((declared & pos).sum()) / n_pos
    return row


def cmd_evaluate(args) -> int:
    truth_ids, truth = fileio.load_truth(args.truth)
    sim_config_path = Path(args.truth).parent / "sim_config.json"
    alpha_true = None
    if sim_config_path.exists():
        alpha_true = list(fileio.load_sim_config(sim_config_path).alpha_true)
    rows = []
    for fit_dir in args.fit_dir:
        _, per_snp = fileio.load_fit_outputs(fit_dir)
        if list(per_snp["snp_id"]) != list(truth_ids):
            raise DataError(f"{fit_dir} SNP ids do not match the truth file")
        rows.append(_replicate_row(fit_dir, truth, alpha_true, args.lfdr_level))
    table = pd.DataFrame(rows)
    numeric = table.drop(columns=["fit_dir"])
    aggregates = pd.DataFrame(
        [
            {"fit_dir": "mean", **numeric.mean(numeric_only=True).to_dict()},
            {"fit_dir": "sd", **numeric.std(numeric_only=True, ddof=1).to_dict()},
        ]
    )
    out = pd.concat([table, aggregates], ignore_index=True)
    out.to_csv(args.out, sep="\t", index=False, float_format=fileio.FLOAT_FORMAT,
               lineterminator="\n")
    print(f"wrote {len(rows)} replicate rows plus aggregates to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    handlers = {
        "simulate": cmd_simulate,
        "fit": cmd_fit,
        "evaluate": cmd_evaluate,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
