"""Multivariate regression tree on binary annotation predictors.

Vector-valued CART: the impurity at a node is the sum over all response
columns of squared deviations from the node mean. Each binary annotation
yields exactly one candidate split (0 vs 1); the split maximizing the
impurity reduction is chosen, with exact ties broken toward the lowest
annotation index so growth is deterministic. A fully grown tree is pruned
by removing internal nodes whose improvement falls below cp times the
root deviance.
"""

from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .errors import ConfigError, ShapeError
from .model import AnnotationPanel

# Improvements at or below this are treated as zero (floating-point noise
# from the sum-of-squares shortcut on constant responses).
_IMPROVEMENT_EPS = 1e-10


@dataclass
class TreeConfig:
    """Growth and pruning knobs.

    cp is the fraction of the root deviance a split must improve to survive
    pruning; min_leaf defaults to max(20, 0.1% of the training rows).
    """

    cp: float = 0.01
    min_leaf: int | None = None
    max_depth: int = 10

    def __post_init__(self):
        if not 0.0 <= self.cp < 1.0:
            raise ConfigError(f"cp must be in [0, 1), got {self.cp}")
        if self.min_leaf is not None and self.min_leaf < 1:
            raise ConfigError("min_leaf must be >= 1")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")

    def resolve_min_leaf(self, n_rows: int) -> int:
        if self.min_leaf is not None:
            return int(self.min_leaf)
        return max(20, ceil(0.001 * n_rows))


@dataclass
class Node:
    """Tree node; a leaf iff annotation is None."""

    n: int
    deviance: float
    mean: np.ndarray
    annotation: int | None = None
    improvement: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.annotation is None


class AnnotationTree:
    """Immutable fitted tree; leaves carry row-stochastic mean vectors."""

    def __init__(self, root: Node, annotation_names: list[str]):
        self.root = root
        self.annotation_names = list(annotation_names)

    @property
    def root_deviance(self) -> float:
        return self.root.deviance

    @property
    def n_leaves(self) -> int:
        count = 0
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                count += 1
            else:
                stack.extend([node.left, node.right])
        return count

    def predict(self, annotations) -> np.ndarray:
        """Route each row to its leaf and return the leaf means, (M, S)."""
        a = _annotation_values(annotations)
        out = np.empty((a.shape[0], self.root.mean.size), dtype=float)
        stack = [(self.root, np.arange(a.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if node.is_leaf:
                out[idx] = node.mean
                continue
            if node.annotation >= a.shape[1]:
                raise ShapeError(
                    f"tree splits on annotation column {node.annotation} "
                    f"but input has only {a.shape[1]} columns"
                )
            go_right = a[idx, node.annotation] > 0.5
            stack.append((node.left, idx[~go_right]))
            stack.append((node.right, idx[go_right]))
        return out

    def selected_annotations(self) -> list[str]:
        """Distinct annotation names used by any split, breadth-first order."""
        seen: list[str] = []
        queue = [self.root]
        while queue:
            node = queue.pop(0)
            if node.is_leaf:
                continue
            name = self.annotation_names[node.annotation]
            if name not in seen:
                seen.append(name)
            queue.extend([node.left, node.right])
        return seen

    def to_dict(self) -> dict:
        def encode(node: Node) -> dict:
            if node.is_leaf:
                return {
                    "type": "leaf",
                    "n": node.n,
                    "deviance": node.deviance,
                    "mean": [float(v) for v in node.mean],
                }
            return {
                "type": "split",
                "annotation": self.annotation_names[node.annotation],
                "n": node.n,
                "deviance": node.deviance,
                "improvement": node.improvement,
                "left": encode(node.left),
                "right": encode(node.right),
            }

        return encode(self.root)

    def to_text(self) -> str:
        lines: list[str] = []

        def walk(node: Node, prefix: str, label: str):
            if node.is_leaf:
                mean = ", ".join(f"{v:.4f}" for v in node.mean)
                lines.append(f"{prefix}{label}leaf n={node.n} mean=({mean})")
                return
            name = self.annotation_names[node.annotation]
            lines.append(
                f"{prefix}{label}split {name} n={node.n} "
                f"improvement={node.improvement:.6g}"
            )
            walk(node.left, prefix + "  ", f"{name}=0: ")
            walk(node.right, prefix + "  ", f"{name}=1: ")

        walk(self.root, "", "")
        return "\n".join(lines)


def _annotation_values(annotations) -> np.ndarray:
    if isinstance(annotations, AnnotationPanel):
        return annotations.values
    a = np.asarray(annotations, dtype=float)
    if a.ndim != 2:
        raise ShapeError("annotation matrix must be 2-dimensional")
    return a


def _annotation_names(annotations, n_cols: int) -> list[str]:
    if isinstance(annotations, AnnotationPanel):
        return list(annotations.annotation_names)
    return [f"A{k + 1}" for k in range(n_cols)]


def _node_stats(z: np.ndarray) -> tuple[np.ndarray, float]:
    mean = z.mean(axis=0)
    deviance = float(((z - mean) ** 2).sum())
    return mean, deviance


def _best_split(a: np.ndarray, z: np.ndarray, used: frozenset,
                min_leaf: int) -> tuple[int, float] | None:
    """Best (annotation, improvement) at a node, or None if no valid split.

    Uses the identity SSE = sum z^2 - n ||mean||^2 so all K candidates are
    scored with one matrix product.
    """
    n = a.shape[0]
    n1 = a.sum(axis=0)
    n0 = n - n1
    total = z.sum(axis=0)
    s1 = a.T @ z
    s0 = total[None, :] - s1
    valid = (n1 >= min_leaf) & (n0 >= min_leaf)
    for k in used:
        if k < valid.size:
            valid[k] = False
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        child_term = (s1 ** 2).sum(axis=1) / n1 + (s0 ** 2).sum(axis=1) / n0
    parent_term = float((total ** 2).sum()) / n
    improvement = np.where(valid, child_term - parent_term, -np.inf)
    best = int(np.argmax(improvement))  # argmax keeps the lowest index on ties
    best_imp = float(improvement[best])
    if best_imp <= _IMPROVEMENT_EPS:
        return None
    return best, best_imp


def grow(annotations, responses, config: TreeConfig | None = None) -> AnnotationTree:
    """Grow the full tree: split while any candidate reduces impurity.

    Stops at max_depth, when a child would fall below min_leaf, or when no
    split improves; an annotation never reappears on its own path. Pruning
    by cp is a separate pass (`prune`).
    """
    config = config or TreeConfig()
    a = _annotation_values(annotations)
    z = np.asarray(responses, dtype=float)
    if z.ndim != 2 or z.shape[0] != a.shape[0]:
        raise ShapeError("annotations and responses disagree on row count")
    min_leaf = config.resolve_min_leaf(a.shape[0])

    def build(rows: np.ndarray, depth: int, used: frozenset) -> Node:
        z_sub = z[rows]
        mean, deviance = _node_stats(z_sub)
        node = Node(n=rows.size, deviance=deviance, mean=mean)
        if depth >= config.max_depth or rows.size < 2 * min_leaf:
            return node
        if deviance <= _IMPROVEMENT_EPS:
            return node
        found = _best_split(a[rows], z_sub, used, min_leaf)
        if found is None:
            return node
        k, improvement = found
        go_right = a[rows, k] > 0.5
        node.annotation = k
        node.improvement = improvement
        child_used = used | {k}
        node.left = build(rows[~go_right], depth + 1, child_used)
        node.right = build(rows[go_right], depth + 1, child_used)
        return node

    root = build(np.arange(a.shape[0]), 0, frozenset())
    return AnnotationTree(root, _annotation_names(annotations, a.shape[1]))


def prune(tree: AnnotationTree, cp: float) -> AnnotationTree:
    """Collapse every internal node with improvement < cp * root deviance."""
    if not 0.0 <= cp < 1.0:
        raise ConfigError(f"cp must be in [0, 1), got {cp}")
    threshold = cp * tree.root_deviance

    def copy(node: Node) -> Node:
        if node.is_leaf or node.improvement < threshold:
            return Node(n=node.n, deviance=node.deviance, mean=node.mean.copy())
        return Node(
            n=node.n,
            deviance=node.deviance,
            mean=node.mean.copy(),
            annotation=node.annotation,
            improvement=node.improvement,
            left=copy(node.left),
            right=copy(node.right),
        )

    return AnnotationTree(copy(tree.root), tree.annotation_names)


def single_leaf_tree(responses, annotation_names: list[str]) -> AnnotationTree:
    """Intercept-only tree: one leaf holding the column means."""
    z = np.asarray(responses, dtype=float)
    mean, deviance = _node_stats(z)
    return AnnotationTree(
        Node(n=z.shape[0], deviance=deviance, mean=mean), list(annotation_names)
    )
