"""TSV/JSON interchange: loaders with validation, fit report writers.

The single interchange format is tab-separated UTF-8 with a header row and
LF line endings. Floats are printed with %.17g so round-trips are lossless
for doubles.
"""

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .em import FitResult
from .errors import DataError
from .fdr import control_global_fdr, declare_at_lfdr, default_targets, local_fdr
from .model import AnnotationPanel, PValuePanel, StateSpace, clamp_pvalues
from .sim import SimConfig, SimTruth

FLOAT_FORMAT = "%.17g"


def _read_table(path, what: str, dtypes: dict | None = None) -> pd.DataFrame:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as handle:
            header = handle.readline()
    except OSError as exc:
        raise DataError(f"cannot read {what} file {path}: {exc}") from exc
    fields = header.rstrip("\n").split("\t")
    if not fields or fields[0] != "snp_id" or len(fields) < 2:
        raise DataError(
            f"{what} file {path} must start with a header line "
            "'snp_id<TAB>name...'"
        )
    try:
        df = pd.read_csv(path, sep="\t", header=0,
                         dtype=dtypes or {"snp_id": str},
                         float_precision="round_trip")
    except (ValueError, pd.errors.ParserError) as exc:
        raise DataError(f"malformed {what} file {path}: {exc}") from exc
    dupes = df["snp_id"][df["snp_id"].duplicated()]
    if not dupes.empty:
        raise DataError(
            f"duplicate snp_id '{dupes.iloc[0]}' in {path} "
            f"(line {int(dupes.index[0]) + 2})"
        )
    return df


def _numeric_values(df: pd.DataFrame, path, what: str) -> np.ndarray:
    try:
        return df.iloc[:, 1:].to_numpy(dtype=float)
    except (TypeError, ValueError) as exc:
        raise DataError(f"non-numeric value in {what} file {path}: {exc}") from exc


def load_gwas(path) -> PValuePanel:
    """Load a p-value panel; values are clamped into [1e-30, 1]."""
    df = _read_table(path, "GWAS")
    values = _numeric_values(df, path, "GWAS")
    bad = ~((values >= 0.0) & (values <= 1.0))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise DataError(
            f"p-value {values[row, col]!r} out of [0, 1] in {path} "
            f"(line {row + 2}, column {df.columns[col + 1]})"
        )
    return PValuePanel(
        list(df["snp_id"]), list(df.columns[1:]), clamp_pvalues(values)
    )


def write_gwas(panel: PValuePanel, path) -> None:
    df = pd.DataFrame(panel.values, columns=panel.trait_names)
    df.insert(0, "snp_id", panel.snp_ids)
    df.to_csv(path, sep="\t", index=False, float_format=FLOAT_FORMAT,
              lineterminator="\n")


def load_annotations(path, threshold: float | None = None) -> AnnotationPanel:
    """Load annotations; continuous scores are binarized at `threshold`."""
    df = _read_table(path, "annotation")
    values = _numeric_values(df, path, "annotation")
    if threshold is not None:
        values = (values >= threshold).astype(float)
    else:
        binary = (values == 0.0) | (values == 1.0)
        if not binary.all():
            row, col = np.argwhere(~binary)[0]
            raise DataError(
                f"non-binary annotation value {values[row, col]!r} in {path} "
                f"(line {row + 2}, column {df.columns[col + 1]}); "
                "pass a threshold to binarize scores"
            )
    return AnnotationPanel(list(df["snp_id"]), list(df.columns[1:]), values)


def write_annotations(panel: AnnotationPanel, path) -> None:
    df = pd.DataFrame(panel.values.astype(int), columns=panel.annotation_names)
    df.insert(0, "snp_id", panel.snp_ids)
    df.to_csv(path, sep="\t", index=False, lineterminator="\n")


def check_alignment(gwas: PValuePanel, annotations: AnnotationPanel) -> None:
    if list(gwas.snp_ids) != list(annotations.snp_ids):
        raise DataError(
            "GWAS and annotation files must list the same SNPs in the same order"
        )


def write_truth(truth: SimTruth, snp_ids, path) -> None:
    space = StateSpace(2)
    df = pd.DataFrame(
        {
            "snp_id": snp_ids,
            "true_state": [space.labels[s] for s in truth.states],
            "in_L1": truth.l1_mask.astype(int),
            "in_L2": truth.l2_mask.astype(int),
            "in_L3": truth.l3_mask.astype(int),
        }
    )
    df.to_csv(path, sep="\t", index=False, lineterminator="\n")


def load_truth(path) -> tuple[list, SimTruth]:
    df = _read_table(path, "truth", {"snp_id": str, "true_state": str})
    space = StateSpace(2)
    label_to_index = {label: i for i, label in enumerate(space.labels)}
    try:
        states = np.array(
            [label_to_index[str(s)] for s in df["true_state"]], dtype=int
        )
    except KeyError as exc:
        raise DataError(f"unknown true_state label {exc} in {path}") from exc
    truth = SimTruth(
        states=states,
        l1_mask=df["in_L1"].to_numpy(dtype=bool),
        l2_mask=df["in_L2"].to_numpy(dtype=bool),
        l3_mask=df["in_L3"].to_numpy(dtype=bool),
    )
    return list(df["snp_id"]), truth


def write_sim_config(config: SimConfig, path) -> None:
    payload = {
        "m": config.m,
        "k": config.k,
        "u": config.u,
        "v": config.v,
        "alpha_true": list(config.alpha_true),
        "noise_density": list(config.noise_density),
        "seed": config.seed,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_sim_config(path) -> SimConfig:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return SimConfig(
        m=payload["m"],
        k=payload["k"],
        u=payload["u"],
        v=payload["v"],
        alpha_true=tuple(payload["alpha_true"]),
        noise_density=tuple(payload["noise_density"]),
        seed=payload["seed"],
    )


def _fdr_table(fit: FitResult) -> dict[str, np.ndarray]:
    targets = default_targets(len(fit.trait_names))
    return {
        target.label(fit.trait_names): local_fdr(fit.posteriors, target)
        for target in targets
    }


def write_fit_report(fit: FitResult, out_dir,
                     lfdr_levels=(0.20,), global_fdr_levels=(0.05,),
                     baseline: FitResult | None = None) -> dict:
    """Write summary.json, snp_results.tsv, loglik_trace.tsv, and tree.txt.

    Returns the summary payload. The summary row mirrors the count-per-target
    shape used for reporting: marginal counts per trait plus the joint count
    at each requested level, and the selected annotation combination.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    space = StateSpace(len(fit.trait_names))
    fdr_values = _fdr_table(fit)

    per_snp = pd.DataFrame({"snp_id": fit.snp_ids})
    for i, label in enumerate(space.labels):
        per_snp[f"post_{label}"] = fit.posteriors[:, i]
    for name, values in fdr_values.items():
        per_snp[f"fdr_{name}"] = values
    counts: dict = {"lfdr": {}, "global_fdr": {}}
    for level in lfdr_levels:
        counts["lfdr"][str(level)] = {}
        for name, values in fdr_values.items():
            declared = declare_at_lfdr(values, level)
            per_snp[f"declared_lfdr_{level}_{name}"] = declared.astype(int)
            counts["lfdr"][str(level)][name] = int(declared.sum())
    for level in global_fdr_levels:
        counts["global_fdr"][str(level)] = {}
        for name, values in fdr_values.items():
            declared = control_global_fdr(values, level)
            per_snp[f"declared_gfdr_{level}_{name}"] = declared.astype(int)
            counts["global_fdr"][str(level)][name] = int(declared.sum())
    if baseline is not None:
        for name, values in _fdr_table(baseline).items():
            per_snp[f"fdr_{name}_baseline"] = values
    per_snp.to_csv(out_dir / "snp_results.tsv", sep="\t", index=False,
                   float_format=FLOAT_FORMAT, lineterminator="\n")

    trace_rows = []
    for it, ll in enumerate(fit.stage1.loglik_trace):
        trace_rows.append({"stage": 1, "iteration": it, "loglik": ll})
    for it, ll in enumerate(fit.stage2_loglik_trace):
        trace_rows.append({"stage": 2, "iteration": it, "loglik": ll})
    pd.DataFrame(trace_rows).to_csv(out_dir / "loglik_trace.tsv", sep="\t",
                                    index=False, float_format=FLOAT_FORMAT,
                                    lineterminator="\n")

    summary = {
        "n_snps": len(fit.snp_ids),
        "trait_names": fit.trait_names,
        "alpha": {name: float(a) for name, a in zip(fit.trait_names, fit.alpha)},
        "stage1": {
            "converged": fit.stage1.converged,
            "n_iter": fit.stage1.n_iter,
            "rank_deficient": fit.stage1.rank_deficient,
            "alpha_stuck": fit.stage1.alpha_stuck,
            "max_loglik_decrease": fit.stage1.max_loglik_decrease,
        },
        "stage2": {
            "converged": fit.stage2_converged,
            "n_accepted": fit.n_accepted,
            "n_rejected": fit.n_rejected,
        },
        "final_loglik": fit.loglik,
        "selected_annotations": fit.tree.selected_annotations(),
        "n_leaves": fit.tree.n_leaves,
        "tree": fit.tree.to_dict(),
        "counts": counts,
    }
    if baseline is not None:
        summary["baseline"] = {
            "alpha": {
                name: float(a)
                for name, a in zip(baseline.trait_names, baseline.alpha)
            },
            "converged": baseline.converged,
            "final_loglik": baseline.loglik,
        }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )
    (out_dir / "tree.txt").write_text(fit.tree.to_text() + "\n", encoding="utf-8")
    return summary


def load_fit_outputs(fit_dir) -> tuple[dict, pd.DataFrame]:
    """Read back a fit directory written by write_fit_report."""
    fit_dir = Path(fit_dir)
    try:
        summary = json.loads((fit_dir / "summary.json").read_text(encoding="utf-8"))
        per_snp = pd.read_csv(fit_dir / "snp_results.tsv", sep="\t",
                              dtype={"snp_id": str},
                              float_precision="round_trip")
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read fit outputs from {fit_dir}: {exc}") from exc
    return summary, per_snp
