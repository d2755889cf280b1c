"""Quadratic weighted kappa and its per-prompt / per-trait aggregation.

Kappa is computed per (prompt, trait, fold) cell over that prompt's own
category range; prompts are never pooled. Summary values average cells
trait-wise and prompt-wise per fold, then across folds; the reported SD
is the population standard deviation of the five fold-level means.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .codec import EvalPair
from .corpus import PromptSpec
from .traits import Trait

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CategoryRange:
    min: int
    max: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError(f"kappa needs at least 2 categories, got range {self.min}..{self.max}")

    @property
    def count(self) -> int:
        return self.max - self.min + 1


def qwk(gold, pred, category_range: CategoryRange) -> float | None:
    """Quadratic weighted kappa, 1 - sum(w*O) / sum(w*E), at 64-bit.

    O is the observed count matrix, E the chance matrix (outer product of
    the marginal histograms over n), w[i, j] = (i-j)^2 / (C-1)^2.
    Returns None (undefined) when both raters are constant and equal.
    """
    gold = np.asarray(gold, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if gold.shape != pred.shape or gold.ndim != 1:
        raise ValueError("gold and pred must be equal-length 1-d sequences")
    if gold.size == 0:
        raise ValueError("kappa of empty input is undefined")
    lo, hi = category_range.min, category_range.max
    for name, values in (("gold", gold), ("pred", pred)):
        if values.min() < lo or values.max() > hi:
            raise ValueError(f"{name} value outside category range {lo}..{hi}")

    c = category_range.count
    n = gold.size
    observed = np.zeros((c, c), dtype=np.float64)
    np.add.at(observed, (gold - lo, pred - lo), 1.0)
    hist_gold = np.bincount(gold - lo, minlength=c).astype(np.float64)
    hist_pred = np.bincount(pred - lo, minlength=c).astype(np.float64)
    expected = np.outer(hist_gold, hist_pred) / n

    idx = np.arange(c, dtype=np.float64)
    weights = np.subtract.outer(idx, idx) ** 2 / (c - 1) ** 2

    denom = float((weights * expected).sum())
    if denom == 0.0:
        return None
    return 1.0 - float((weights * observed).sum()) / denom


@dataclass(frozen=True)
class QwkCell:
    prompt_id: int | None
    trait: Trait
    fold: int
    value: float | None  # None = undefined (constant and equal raters)
    n_pairs: int


def qwk_cellwise(pairs: list[EvalPair], fold: int,
                 specs: dict[int | None, PromptSpec]) -> list[QwkCell]:
    """One kappa cell per (prompt, trait) present in the pairs."""
    groups: dict[tuple[int | None, Trait], list[EvalPair]] = {}
    for pair in pairs:
        groups.setdefault((pair.prompt_id, pair.trait), []).append(pair)

    cells = []
    for (prompt_id, trait) in sorted(groups, key=lambda k: ((k[0] is None, k[0]), k[1].surface)):
        members = groups[(prompt_id, trait)]
        lo, hi = specs[prompt_id].category_range(trait)
        value = qwk([p.gold for p in members], [p.pred for p in members],
                    CategoryRange(lo, hi))
        cells.append(QwkCell(prompt_id, trait, fold, value, len(members)))
    return cells


@dataclass
class QwkReport:
    """Cells plus trait-wise and prompt-wise summaries with AVG and SD."""

    cells: list[QwkCell]
    trait_means: dict[Trait, float] = field(default_factory=dict)
    prompt_means: dict[int | None, float] = field(default_factory=dict)
    fold_trait_avgs: dict[int, float] = field(default_factory=dict)
    fold_prompt_avgs: dict[int, float] = field(default_factory=dict)
    trait_avg: float | None = None
    trait_sd: float | None = None
    prompt_avg: float | None = None
    prompt_sd: float | None = None
    n_undefined: int = 0


def _mean(values: list[float]) -> float:
    return float(np.mean(np.asarray(values, dtype=np.float64)))


def aggregate(cells: list[QwkCell]) -> QwkReport:
    """Fold-aware averaging of kappa cells.

    Per fold: trait means over the prompts rating that trait, prompt means
    over that prompt's traits. AVG is the mean over folds of the per-fold
    grand mean; SD is the population SD of those fold-level grand means.
    Undefined cells are excluded from every average, with a warning.
    """
    report = QwkReport(cells=list(cells))
    defined = [c for c in cells if c.value is not None]
    report.n_undefined = len(cells) - len(defined)
    if report.n_undefined:
        log.warning("excluding %d undefined kappa cells from averages", report.n_undefined)
    if not defined:
        return report

    folds = sorted({c.fold for c in defined})
    traits = sorted({c.trait for c in defined}, key=lambda t: t.surface)
    prompts = sorted({c.prompt_id for c in defined}, key=lambda p: (p is None, p))

    trait_fold: dict[tuple[Trait, int], float] = {}
    prompt_fold: dict[tuple[int | None, int], float] = {}
    for fold in folds:
        fold_cells = [c for c in defined if c.fold == fold]
        for trait in traits:
            values = [c.value for c in fold_cells if c.trait == trait]
            if values:
                trait_fold[(trait, fold)] = _mean(values)
        for prompt_id in prompts:
            values = [c.value for c in fold_cells if c.prompt_id == prompt_id]
            if values:
                prompt_fold[(prompt_id, fold)] = _mean(values)

    for trait in traits:
        values = [trait_fold[(trait, f)] for f in folds if (trait, f) in trait_fold]
        report.trait_means[trait] = _mean(values)
    for prompt_id in prompts:
        values = [prompt_fold[(prompt_id, f)] for f in folds if (prompt_id, f) in prompt_fold]
        report.prompt_means[prompt_id] = _mean(values)

    for fold in folds:
        t_values = [trait_fold[(t, fold)] for t in traits if (t, fold) in trait_fold]
        if t_values:
            report.fold_trait_avgs[fold] = _mean(t_values)
        p_values = [prompt_fold[(p, fold)] for p in prompts if (p, fold) in prompt_fold]
        if p_values:
            report.fold_prompt_avgs[fold] = _mean(p_values)

    if report.fold_trait_avgs:
        fold_means = np.asarray(list(report.fold_trait_avgs.values()), dtype=np.float64)
        report.trait_avg = float(fold_means.mean())
        report.trait_sd = float(fold_means.std())  # population SD over fold means
    if report.fold_prompt_avgs:
        fold_means = np.asarray(list(report.fold_prompt_avgs.values()), dtype=np.float64)
        report.prompt_avg = float(fold_means.mean())
        report.prompt_sd = float(fold_means.std())
    return report
