"""AUC machinery, the cross-validation pipeline, permutation importance,
reliability curves, and the experimental-variability ceiling.

Per-target AUCs that are undefined (single-class fold) are skipped, never
coerced to 0.5; aggregate rows report how many targets were skipped.
Aggregation order is: mean over targets within a seed, then mean over
seeds.  A fold audit records which folds every trained artifact consumed
and asserts the test fold was never touched before final scoring.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import blend as blend_mod
from . import dataset, featurize, gbm, gcn, mlp
from .dataset import AssayTable, TRAIN, VALID, TEST

log = logging.getLogger(__name__)


class UndefinedAUCError(ValueError):
    """Single-class input: AUC is undefined (distinct from 0.5)."""


def roc_auc(labels: np.ndarray, scores: np.ndarray) -> float:
    """Mann-Whitney AUC with average ranks for tied scores."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    keep = labels >= 0
    labels, scores = labels[keep], scores[keep]
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError(
            f"AUC undefined: {n_pos} positives, {n_neg} negatives")
    sx = np.sort(scores)
    lo = np.searchsorted(sx, scores, side="left")
    hi = np.searchsorted(sx, scores, side="right")
    ranks = (lo + hi + 1) / 2.0
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc_or_none(labels, scores) -> float | None:
    try:
        return roc_auc(labels, scores)
    except UndefinedAUCError:
        return None


def mean_auc(aucs: list[float | None]) -> tuple[float | None, int]:
    """Unweighted mean over defined AUCs; returns (mean, skipped count)."""
    defined = [a for a in aucs if a is not None]
    skipped = len(aucs) - len(defined)
    if not defined:
        return None, skipped
    return float(np.mean(defined)), skipped


def per_target_aucs(labels: np.ndarray, scores: np.ndarray) -> list[float | None]:
    return [roc_auc_or_none(labels[:, t], scores[:, t])
            for t in range(labels.shape[1])]


def _score_matrix(labels: np.ndarray, scores: np.ndarray) -> float | None:
    if labels.ndim == 1:
        return roc_auc_or_none(labels, scores)
    return mean_auc(per_target_aucs(labels, scores))[0]


# ---------------------------------------------------------------------------
# permutation importance


def permutation_importance(
    predict,
    X: np.ndarray,
    labels: np.ndarray,
    feature: int,
    k: int = 0,
    folds: int = 5,
    seed: int = 0,
    corr_data: np.ndarray | None = None,
) -> tuple[float, list[float]]:
    """AUC degradation from jointly shuffling a feature and its k most
    correlated companions (absolute Pearson on ``corr_data``, which should
    be training-fold data).  One seeded permutation per fold; degradation
    is baseline AUC minus shuffled AUC, averaged over folds.
    """
    X = np.asarray(X, dtype=float)
    if k >= X.shape[1]:
        raise ValueError(f"k={k} must be below the feature count {X.shape[1]}")
    if k < 0 or folds < 1:
        raise ValueError("k must be >= 0 and folds >= 1")
    corr = np.asarray(corr_data if corr_data is not None else X, dtype=float)
    cols = [feature]
    if k > 0:
        f_col = corr[:, feature]
        scores = np.zeros(corr.shape[1])
        for j in range(corr.shape[1]):
            if j == feature:
                continue
            a, b = f_col, corr[:, j]
            if a.std() == 0 or b.std() == 0:
                continue
            scores[j] = abs(np.corrcoef(a, b)[0, 1])
        cols += list(np.argsort(-scores, kind="stable")[:k])
    baseline = _score_matrix(labels, predict(X))
    if baseline is None:
        raise UndefinedAUCError("baseline AUC undefined")
    degradations = []
    for fold in range(folds):
        rng = np.random.default_rng((seed, fold))
        perm = rng.permutation(len(X))
        Xp = X.copy()
        Xp[:, cols] = X[perm][:, cols]
        shuffled = _score_matrix(labels, predict(Xp))
        degradations.append(baseline - shuffled if shuffled is not None
                            else 0.0)
    return float(np.mean(degradations)), degradations


# ---------------------------------------------------------------------------
# reliability and complexity curves


def reliability_curve(
    labels: np.ndarray,
    scores: np.ndarray,
    distances: np.ndarray,
    thresholds: list[float],
) -> list[dict]:
    """Per distance threshold: mean per-target AUC over test molecules at
    distance >= threshold, with retained counts; undefined targets skipped."""
    rows = []
    distances = np.asarray(distances, dtype=float)
    for tau in thresholds:
        keep = distances >= tau
        if keep.sum() == 0:
            rows.append({"threshold": tau, "mean_auc": None, "count": 0,
                         "targets_skipped": labels.shape[1]})
            continue
        mean, skipped = mean_auc(per_target_aucs(labels[keep], scores[keep]))
        rows.append({"threshold": tau, "mean_auc": mean,
                     "count": int(keep.sum()), "targets_skipped": skipped})
    return rows


def complexity_curve(
    labels: np.ndarray,
    scores: np.ndarray,
    popcounts: np.ndarray,
    n_buckets: int = 5,
) -> list[dict]:
    """AUC bucketed by fingerprint popcount quantiles."""
    popcounts = np.asarray(popcounts, dtype=float)
    edges = np.quantile(popcounts, np.linspace(0, 1, n_buckets + 1))
    rows = []
    for i in range(n_buckets):
        lo, hi = edges[i], edges[i + 1]
        if i == n_buckets - 1:
            keep = (popcounts >= lo) & (popcounts <= hi)
        else:
            keep = (popcounts >= lo) & (popcounts < hi)
        if keep.sum() == 0:
            rows.append({"lo": float(lo), "hi": float(hi), "mean_auc": None,
                         "count": 0, "targets_skipped": labels.shape[1]})
            continue
        mean, skipped = mean_auc(per_target_aucs(labels[keep], scores[keep]))
        rows.append({"lo": float(lo), "hi": float(hi), "mean_auc": mean,
                     "count": int(keep.sum()), "targets_skipped": skipped})
    return rows


# ---------------------------------------------------------------------------
# experimental-variability ceiling


def variability_auc(
    repeats: dict[str, list[list[int]]],
    trials: int = 10_000,
    seed: int = 0,
) -> tuple[dict[str, float], float]:
    """Monte Carlo estimate of the AUC of one pseudo-experiment predicting
    another.

    Homogeneous repeated measurements keep their value in both
    pseudo-experiments; contradictory ones draw an independent fair coin
    for each.  Trials whose label side is single-class are skipped.
    Returns (per-target expected AUC, mean over targets).
    """
    rng = np.random.default_rng(seed)
    per_target: dict[str, float] = {}
    for target, pair_lists in repeats.items():
        pairs = [p for p in pair_lists if len(p) >= 2]
        if not pairs:
            continue
        homogeneous = np.array([len(set(p)) == 1 for p in pairs])
        values = np.array([p[0] for p in pairs], dtype=float)
        n = len(pairs)
        total = 0.0
        defined = 0
        for _ in range(trials):
            a = np.where(homogeneous, values, rng.integers(0, 2, n))
            b = np.where(homogeneous, values, rng.integers(0, 2, n))
            auc = roc_auc_or_none(b.astype(int), a)
            if auc is not None:
                total += auc
                defined += 1
        if defined:
            per_target[target] = total / defined
    if not per_target:
        raise ValueError("no molecule/target pairs with repeated measurements")
    return per_target, float(np.mean(list(per_target.values())))


# ---------------------------------------------------------------------------
# fold audit


class LeakageError(RuntimeError):
    pass


@dataclass
class FoldAudit:
    """Records which folds each trained artifact consumed."""
    consumed: dict[str, set[int]] = field(default_factory=dict)

    def record(self, artifact: str, folds: set[int]) -> None:
        self.consumed.setdefault(artifact, set()).update(folds)

    def assert_untouched(self, fold: int) -> None:
        offenders = [a for a, f in self.consumed.items() if fold in f]
        if offenders:
            raise LeakageError(
                f"fold {dataset.FOLD_NAMES[fold]} consumed by: {offenders}")


# ---------------------------------------------------------------------------
# cross-validation pipeline


@dataclass
class MemberRecipe:
    name: str
    model: str     # gbm | mlp | gcn
    features: str  # pld | fingerprint | ngram | graph
    config: object | None = None


@dataclass
class ReportEntry:
    strategy: str
    seed: int
    model: str
    target: str
    fold: str
    auc: float | None


@dataclass
class EvalReport:
    entries: list[ReportEntry]
    targets: list[str]
    member_names: list[str]
    correlation: np.ndarray | None = None
    audits: list[FoldAudit] = field(default_factory=list)

    def models(self) -> list[str]:
        seen: list[str] = []
        for e in self.entries:
            if e.model not in seen:
                seen.append(e.model)
        return seen

    def strategies(self) -> list[str]:
        seen: list[str] = []
        for e in self.entries:
            if e.strategy not in seen:
                seen.append(e.strategy)
        return seen

    def seed_means(self, model: str, strategy: str) -> list[float]:
        """Mean over targets within each seed (undefined targets skipped)."""
        seeds = sorted({e.seed for e in self.entries
                        if e.model == model and e.strategy == strategy})
        out = []
        for seed in seeds:
            aucs = [e.auc for e in self.entries
                    if e.model == model and e.strategy == strategy
                    and e.seed == seed]
            mean, _ = mean_auc(aucs)
            if mean is not None:
                out.append(mean)
        return out

    def summary(self) -> dict[tuple[str, str], tuple[float | None, float | None]]:
        """(model, strategy) -> (mean over seeds of per-seed target means,
        standard deviation over seeds)."""
        out = {}
        for model in self.models():
            for strategy in self.strategies():
                means = self.seed_means(model, strategy)
                if means:
                    out[(model, strategy)] = (
                        float(np.mean(means)),
                        float(np.std(means)) if len(means) > 1 else None,
                    )
                else:
                    out[(model, strategy)] = (None, None)
        return out


def _fmt(value: float | None) -> str:
    return "NA" if value is None else f"{value:.6f}"


def report_to_text(report: EvalReport) -> str:
    """Documented tabular text: one row per target x model x seed x fold,
    then a summary block with models as rows and split strategies as
    columns."""
    lines = ["# eval-report v1"]
    lines.append("target\tmodel\tseed\tfold\tstrategy\tauc")
    for e in report.entries:
        lines.append(f"{e.target}\t{e.model}\t{e.seed}\t{e.fold}"
                     f"\t{e.strategy}\t{_fmt(e.auc)}")
    lines.append("")
    lines.append("# summary: mean AUC over targets per seed, then over seeds")
    strategies = report.strategies()
    lines.append("Model\t" + "\t".join(strategies))
    summary = report.summary()
    for model in report.models():
        cells = [_fmt(summary[(model, s)][0]) if (model, s) in summary
                 else "NA" for s in strategies]
        lines.append(model + "\t" + "\t".join(cells))
    if report.correlation is not None:
        lines.append("")
        lines.append("# member correlation (Pearson, averaged over targets)")
        lines.append("member\t" + "\t".join(report.member_names))
        for i, name in enumerate(report.member_names):
            row = "\t".join(_fmt(float(v)) if np.isfinite(v) else "NA"
                            for v in report.correlation[i])
            lines.append(f"{name}\t{row}")
    return "\n".join(lines) + "\n"


@dataclass
class FeatureBundle:
    """Frozen featurization state built from the training fold only."""
    registry: featurize.DescriptorRegistry
    fp_spec: featurize.FingerprintSpec
    vocab: featurize.NGramVocabulary
    pld: np.ndarray
    fingerprint: np.ndarray
    ngram: np.ndarray


def build_features(
    table: AssayTable,
    train_rows: np.ndarray,
    registry: featurize.DescriptorRegistry | None = None,
    fp_spec: featurize.FingerprintSpec | None = None,
    n_max: int = 4,
    min_count: int = 5,
) -> FeatureBundle:
    registry = registry or featurize.default_registry()
    fp_spec = fp_spec or featurize.default_fingerprint_spec()
    vocab = featurize.build_ngram_vocabulary(
        [table.smiles[i] for i in train_rows], n_max=n_max, min_count=min_count)
    pld = np.vstack([featurize.compute_pld(g, registry) for g in table.graphs])
    fingerprint = np.vstack([featurize.compute_fingerprint(g, fp_spec)
                             for g in table.graphs]).astype(float)
    ngram = np.vstack([featurize.smiles_ngrams(s, vocab)
                       for s in table.smiles])
    return FeatureBundle(registry, fp_spec, vocab, pld, fingerprint, ngram)


def _feature_matrix(features: FeatureBundle, family: str) -> np.ndarray:
    return {"pld": features.pld, "fingerprint": features.fingerprint,
            "ngram": features.ngram}[family]


def train_member(
    recipe: MemberRecipe,
    table: AssayTable,
    features: FeatureBundle,
    split: dataset.SplitAssignment,
    seed: int,
):
    """Train one member on the training fold with validation early stopping;
    returns a predictor mapping molecule rows -> (n, T) score matrix."""
    train_rows = split.indices(TRAIN)
    valid_rows = split.indices(VALID)
    labels = table.labels
    n_targets = table.n_targets
    if recipe.model == "gbm":
        feats = _feature_matrix(features, recipe.features)
        X, y, _ = gbm.stack_tasks(feats[train_rows], labels[train_rows])
        Xv, yv, _ = gbm.stack_tasks(feats[valid_rows], labels[valid_rows])
        config = recipe.config or gbm.GbmConfig()
        model = gbm.train_gbm(X, y, config, valid=(Xv, yv) if len(yv) else None,
                              task_feature=feats.shape[1])

        def predict(rows: np.ndarray) -> np.ndarray:
            f = feats[rows]
            tasks = np.tile(np.arange(n_targets, dtype=float), len(rows))
            Xp = np.column_stack([np.repeat(f, n_targets, axis=0), tasks])
            return model.predict(Xp).reshape(len(rows), n_targets)

        return predict, model
    if recipe.model == "mlp":
        feats = _feature_matrix(features, recipe.features)
        config = recipe.config or mlp.MlpConfig(seed=seed)
        params = mlp.train_mlp(
            (feats[train_rows], labels[train_rows]),
            (feats[valid_rows], labels[valid_rows]) if len(valid_rows) else None,
            config,
        )

        def predict(rows: np.ndarray) -> np.ndarray:
            return mlp.forward(params, feats[rows])

        return predict, params
    if recipe.model == "gcn":
        config = recipe.config or gcn.GcnConfig(seed=seed)
        graphs = table.graphs
        params = gcn.train_gcn(
            ([graphs[i] for i in train_rows], labels[train_rows]),
            ([graphs[i] for i in valid_rows], labels[valid_rows])
            if len(valid_rows) else None,
            config,
        )

        def predict(rows: np.ndarray) -> np.ndarray:
            return gcn.gcn_batch(params, [graphs[i] for i in rows])

        return predict, params
    raise ValueError(f"unknown model kind {recipe.model!r}")


_SPLITTERS = {
    "index": lambda table, fractions, seed: dataset.split_index(table, fractions),
    "random": dataset.split_random,
    "scaffold": dataset.split_scaffold,
}


def run_cv(
    table: AssayTable,
    recipes: list[MemberRecipe],
    strategy: str = "random",
    seeds: tuple[int, ...] = (0,),
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    with_blend: bool = True,
    registry: featurize.DescriptorRegistry | None = None,
    fp_spec: featurize.FingerprintSpec | None = None,
    blend_config: gbm.GbmConfig | None = None,
) -> EvalReport:
    """Full cross-validation: split, featurize on train, train members with
    early stopping on valid, blend on valid predictions, score on test."""
    if strategy not in _SPLITTERS:
        raise ValueError(f"unknown split strategy {strategy!r}")
    if strategy == "index":
        seeds = seeds[:1]  # only one unique index split exists
    member_names = [r.name for r in recipes]
    entries: list[ReportEntry] = []
    audits: list[FoldAudit] = []
    correlations: list[np.ndarray] = []
    for seed in seeds:
        audit = FoldAudit()
        split = _SPLITTERS[strategy](table, fractions, seed)
        train_rows = split.indices(TRAIN)
        valid_rows = split.indices(VALID)
        test_rows = split.indices(TEST)
        features = build_features(table, train_rows, registry, fp_spec)
        audit.record("ngram_vocabulary", {TRAIN})
        valid_scores = np.empty((len(valid_rows), table.n_targets, len(recipes)))
        test_scores = np.empty((len(test_rows), table.n_targets, len(recipes)))
        for m, recipe in enumerate(recipes):
            predict, _ = train_member(recipe, table, features, split, seed)
            audit.record(f"member:{recipe.name}", {TRAIN, VALID})
            valid_scores[:, :, m] = predict(valid_rows)
            test_scores[:, :, m] = predict(test_rows)
            for t, target in enumerate(table.targets):
                entries.append(ReportEntry(
                    strategy, seed, recipe.name, target, "test",
                    roc_auc_or_none(table.labels[test_rows, t],
                                    test_scores[:, t, m]),
                ))
        avg = blend_mod.prediction_average(test_scores)
        for t, target in enumerate(table.targets):
            entries.append(ReportEntry(
                strategy, seed, "pred_avg", target, "test",
                roc_auc_or_none(table.labels[test_rows, t], avg[:, t]),
            ))
        if with_blend:
            blender = blend_mod.train_blend(
                valid_scores, table.labels[valid_rows], member_names,
                config=blend_config, seed=seed)
            audit.record("blend", {VALID})
            blended = blend_mod.predict_blend(blender, test_scores)
            for t, target in enumerate(table.targets):
                entries.append(ReportEntry(
                    strategy, seed, "blend", target, "test",
                    roc_auc_or_none(table.labels[test_rows, t], blended[:, t]),
                ))
        audit.assert_untouched(TEST)
        audits.append(audit)
        correlations.append(
            blend_mod.correlation_matrix(test_scores, table.labels[test_rows]))
    correlation = None
    if correlations:
        with np.errstate(invalid="ignore"):
            correlation = np.nanmean(np.stack(correlations), axis=0)
    return EvalReport(entries, list(table.targets), member_names,
                      correlation, audits)
