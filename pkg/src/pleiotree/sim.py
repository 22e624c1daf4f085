"""Seeded two-trait simulation design and ground-truth evaluation.

Six signal annotations come in overlapping pairs: SNPs in A1 and A2 are
non-null for trait 1, SNPs in A3 and A4 for trait 2, and SNPs in A5 and A6
for both. The pair overlap fraction v is |A_j and partner| / |A_j|, and the
three intersection sets are mutually disjoint so every SNP has a single
unambiguous true state. Remaining annotations are noise with density drawn
uniformly from a configured range. Non-null p-values are Beta(alpha, 1)
via the inverse-power transform of a uniform draw.

Three independent RNG streams (signal annotations, noise annotations,
p-values) are spawned from the seed so each sub-draw is reproducible on
its own.
"""

from dataclasses import dataclass, field
from math import ceil

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, ShapeError
from .fdr import FdrTarget, declare_at_lfdr, local_fdr
from .model import AnnotationPanel, PValuePanel, StateSpace, clamp_pvalues

TRUE_ANNOTATION_COUNT = 6


@dataclass
class SimConfig:
    m: int = 10000
    k: int = 25
    u: float = 0.10
    v: float = 0.50
    alpha_true: tuple[float, float] = (0.4, 0.3)
    noise_density: tuple[float, float] = (0.1, 0.3)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.u < 1.0:
            raise ConfigError(f"u must be in (0, 1), got {self.u}")
        if not 0.0 <= self.v <= 1.0:
            raise ConfigError(f"v must be in [0, 1], got {self.v}")
        if self.k < TRUE_ANNOTATION_COUNT:
            raise ConfigError(
                f"{TRUE_ANNOTATION_COUNT} true annotations require K >= "
                f"{TRUE_ANNOTATION_COUNT}, got {self.k}"
            )
        if not all(0.0 < a < 1.0 for a in self.alpha_true):
            raise ConfigError("alpha_true entries must be in (0, 1)")
        n_block = ceil(self.u * self.m)
        n_shared = round(self.v * n_block)
        if 3 * n_block + 3 * (n_block - n_shared) > self.m:
            raise ConfigError(
                "annotated blocks exceed the SNP count; lower u or raise m"
            )


@dataclass
class SimTruth:
    states: np.ndarray  # state index per SNP in canonical order
    l1_mask: np.ndarray  # A1 and A2: non-null for trait 1 only
    l2_mask: np.ndarray  # A3 and A4: non-null for trait 2 only
    l3_mask: np.ndarray  # A5 and A6: non-null for both traits
    true_annotations: list[str] = field(
        default_factory=lambda: [f"A{k + 1}" for k in range(TRUE_ANNOTATION_COUNT)]
    )

    def positives(self, target: FdrTarget) -> np.ndarray:
        """True non-null mask for an fdr target."""
        space = StateSpace(2)
        bits = space.bits[self.states]
        if target.kind == "marginal":
            return bits[:, target.traits[0]] == 1
        return (bits[:, list(target.traits)] == 1).all(axis=1)


def simulate(config: SimConfig) -> tuple[PValuePanel, AnnotationPanel, SimTruth]:
    """Generate one replicate of the simulation design."""
    rng_signal, rng_noise, rng_pvals = [
        np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(3)
    ]
    m, k = config.m, config.k
    n_block = ceil(config.u * m)
    n_shared = round(config.v * n_block)

    annot = np.zeros((m, k), dtype=float)
    perm = rng_signal.permutation(m)
    bases = [perm[0:n_block], perm[n_block:2 * n_block], perm[2 * n_block:3 * n_block]]
    pos = 3 * n_block
    shared_sets = []
    for pair, base in enumerate(bases):
        shared = base[:n_shared]
        fresh = perm[pos:pos + (n_block - n_shared)]
        pos += n_block - n_shared
        partner = np.concatenate([shared, fresh])
        annot[base, 2 * pair] = 1.0
        annot[partner, 2 * pair + 1] = 1.0
        shared_sets.append(shared)

    for col in range(TRUE_ANNOTATION_COUNT, k):
        density = rng_noise.uniform(*config.noise_density)
        hits = rng_noise.choice(m, size=round(density * m), replace=False)
        annot[hits, col] = 1.0

    l1_mask = np.zeros(m, dtype=bool)
    l2_mask = np.zeros(m, dtype=bool)
    l3_mask = np.zeros(m, dtype=bool)
    l1_mask[shared_sets[0]] = True
    l2_mask[shared_sets[1]] = True
    l3_mask[shared_sets[2]] = True
    states = np.zeros(m, dtype=int)
    states[l1_mask] = 1  # non-null trait 1
    states[l2_mask] = 2  # non-null trait 2
    states[l3_mask] = 3  # non-null both

    # U(0, 1] base draws; U^(1/alpha) ~ Beta(alpha, 1) for non-null entries.
    pvals = 1.0 - rng_pvals.random((m, 2))
    nonnull_1 = l1_mask | l3_mask
    nonnull_2 = l2_mask | l3_mask
    pvals[nonnull_1, 0] **= 1.0 / config.alpha_true[0]
    pvals[nonnull_2, 1] **= 1.0 / config.alpha_true[1]
    pvals = clamp_pvalues(pvals)

    snp_ids = [f"snp_{i + 1:06d}" for i in range(m)]
    gwas = PValuePanel(snp_ids, ["P1", "P2"], pvals)
    annotations = AnnotationPanel(
        snp_ids, [f"A{j + 1}" for j in range(k)], annot
    )
    return gwas, annotations, SimTruth(states, l1_mask, l2_mask, l3_mask)


def auc_score(fdr_values, positives) -> float:
    """AUC for ranking by ascending local fdr; ties share average rank.

    Equivalent to the trapezoidal area under the ROC curve with tied scores
    grouped (the Mann-Whitney statistic). Returns nan when either class is
    empty.
    """
    fdr_values = np.asarray(fdr_values, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    if fdr_values.shape != positives.shape:
        raise ShapeError("fdr values and truth mask disagree in length")
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(-fdr_values)  # lower fdr = stronger evidence
    rank_sum = float(ranks[positives].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class MetricsReport:
    """Ground-truth evaluation of one fitted replicate."""

    auc: dict[str, float]
    power: dict[str, float]
    realized_fdp: dict[str, float]
    alpha_error: list[float]
    exact_recovery: bool
    noise_proportion: float
    true_proportion: float
    n_selected: int
    lfdr_level: float

    def as_row(self) -> dict:
        row: dict = {}
        for name, value in sorted(self.auc.items()):
            row[f"auc_{name}"] = value
        for name, value in sorted(self.power.items()):
            row[f"power_{name}"] = value
        for name, value in sorted(self.realized_fdp.items()):
            row[f"fdp_{name}"] = value
        for d, err in enumerate(self.alpha_error):
            row[f"alpha_error_P{d + 1}"] = err
        row["exact_recovery"] = int(self.exact_recovery)
        row["noise_proportion"] = self.noise_proportion
        row["true_proportion"] = self.true_proportion
        row["n_selected"] = self.n_selected
        row["lfdr_level"] = self.lfdr_level
        return row


def evaluate_from_fdr(fdr_by_target: dict[str, np.ndarray],
                      truth_by_target: dict[str, np.ndarray],
                      selected_annotations, alpha_hat, truth: SimTruth,
                      alpha_true, level: float = 0.20) -> MetricsReport:
    """Evaluation metrics from precomputed local fdr vectors per target."""
    auc: dict[str, float] = {}
    power: dict[str, float] = {}
    fdp: dict[str, float] = {}
    for name, fdr_values in fdr_by_target.items():
        pos = truth_by_target[name]
        auc[name] = auc_score(fdr_values, pos)
        declared = declare_at_lfdr(fdr_values, level)
        n_pos = int(pos.sum())
        if n_pos == 0:
            power[name] = float("nan")
        else:
            power[name] = float((declared & pos).sum()) / n_pos
        fdp[name] = float((declared & ~pos).sum()) / max(1, int(declared.sum()))

    selected = list(selected_annotations)
    true_set = set(truth.true_annotations)
    n_sel = len(selected)
    n_true_sel = sum(1 for name in selected if name in true_set)
    exact = set(selected) == true_set
    noise_prop = (n_sel - n_true_sel) / n_sel if n_sel else float("nan")
    true_prop = n_true_sel / n_sel if n_sel else float("nan")

    alpha_hat = np.asarray(alpha_hat, dtype=float)
    alpha_true = np.asarray(alpha_true, dtype=float)
    return MetricsReport(
        auc=auc,
        power=power,
        realized_fdp=fdp,
        alpha_error=[float(e) for e in alpha_hat - alpha_true],
        exact_recovery=exact,
        noise_proportion=noise_prop,
        true_proportion=true_prop,
        n_selected=n_sel,
        lfdr_level=level,
    )


def sim_targets(d: int, trait_names: list[str] | None = None):
    """Targets and labels used throughout the simulation study."""
    trait_names = trait_names or [f"P{i + 1}" for i in range(d)]
    targets = [FdrTarget.marginal(i) for i in range(d)]
    if d >= 2:
        targets.append(FdrTarget.joint(range(d)))
    return [(t.label(trait_names), t) for t in targets]


def evaluate(posteriors, selected_annotations, alpha_hat, truth: SimTruth,
             alpha_true, level: float = 0.20,
             trait_names: list[str] | None = None) -> MetricsReport:
    """Compute the per-replicate evaluation metrics against ground truth."""
    z = np.asarray(posteriors, dtype=float)
    d = int(round(np.log2(z.shape[1])))
    fdr_by_target = {}
    truth_by_target = {}
    for name, target in sim_targets(d, trait_names):
        fdr_by_target[name] = local_fdr(z, target)
        truth_by_target[name] = truth.positives(target)
    return evaluate_from_fdr(
        fdr_by_target, truth_by_target, selected_annotations, alpha_hat,
        truth, alpha_true, level
    )
