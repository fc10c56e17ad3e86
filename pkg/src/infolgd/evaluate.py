"""Stratified cross-validation, metrics and forest diagnostics.

Folds are dealt round-robin within each provenance stratum after a seeded
shuffle, so every fold carries the sample's proxy/true mix.  Every model
family is scored on the same folds; aggregate metrics are the unweighted
mean of the per-fold values, with pooled out-of-fold metrics reported next
to them.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .baselines import (
    FAMILY_ORDER,
    FOREST_FEATURES,
    Family,
    FittedModel,
    ForestModel,
    ModelSpec,
    fit,
)
from .dataset import CONTINUOUS_FEATURES, Dataset, Provenance, _format
from .entropy import joint_mutual_information, mutual_information, r2_ceiling, sturges_bins

FOLD_SHARE_TOL = 0.02
SST_EPS = 1e-12
FULL_FIT_FOLD = -1


class InvariantViolation(RuntimeError):
    """A structural guarantee of the harness did not hold."""


class FoldFitError(RuntimeError):
    def __init__(self, fold: int, family: str, cause: Exception):
        super().__init__(f"fold {fold}: fitting {family} failed: {cause}")
        self.fold = fold


# -- folds -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def proxy_shares(self, data: Dataset) -> np.ndarray:
        return np.array([data.is_proxy[self.test_indices(i)].mean() for i in range(self.k)])

    def validate(self, data: Dataset, tol: float = FOLD_SHARE_TOL) -> None:
        """Raise :class:`InvariantViolation` unless the plan partitions ``data``
        with per-fold proxy shares within ``tol`` of the sample's."""
        a = self.assignments
        if a.shape != (len(data),) or a.min() < 0 or a.max() >= self.k:
            raise InvariantViolation("fold assignment does not cover every record exactly once")
        for stratum in (True, False):
            sizes = np.bincount(a[data.is_proxy == stratum], minlength=self.k)
            if sizes.max() - sizes.min() > 1:
                raise InvariantViolation(f"stratum fold sizes differ by more than one: {sizes}")
        shares = self.proxy_shares(data)
        worst = np.abs(shares - data.mixture_proportion).max()
        if worst > tol + 1e-12:
            raise InvariantViolation(
                f"fold proxy share deviates by {worst:.4f} from {data.mixture_proportion:.4f}"
            )


def stratified_folds(data: Dataset, k: int = 10, seed: int = 0) -> FoldPlan:
    """Shuffle each provenance stratum and deal it round-robin into ``k`` folds.

    The dealing position carries over from the proxy stratum to the true
    stratum so overall fold sizes also differ by at most one.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    rng = np.random.default_rng(seed)
    assignments = np.full(len(data), -1, dtype=np.intp)
    start = 0
    for stratum in (True, False):
        members = np.flatnonzero(data.is_proxy == stratum)
        if members.size == 0:
            continue
        if members.size < k:
            name = Provenance.PROXY.value if stratum else Provenance.TRUE_OUTCOME.value
            raise ValueError(f"stratum {name} has {members.size} records, fewer than k={k}")
        members = rng.permutation(members)
        assignments[members] = (start + np.arange(members.size)) % k
        start = (start + members.size) % k
    return FoldPlan(k, assignments, seed)


# -- metrics ---------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    rmse: float
    r2: float
    mae: float

    @property
    def r2_defined(self) -> bool:
        return math.isfinite(self.r2)

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "r2": self.r2 if self.r2_defined else "undefined",
            "mae": self.mae,
        }


def compute_metrics(y, yhat) -> Metrics:
    """RMSE, R^2 about the mean of ``y``, and MAE.

    With constant ``y`` R^2 is 0 when the predictions equal it exactly and
    ``-inf`` (reported as "undefined") otherwise.
    """
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {yhat.shape}")
    if y.size == 0:
        raise ValueError("empty input")
    resid = y - yhat
    sse = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    if sst > 0:
        r2 = 1.0 - sse / sst
    else:
        r2 = 0.0 if sse == 0 else -math.inf
    return Metrics(math.sqrt(sse / y.size), r2, float(np.abs(resid).mean()))


def _mean_metrics(per_fold: Sequence[Metrics], excluded: Sequence[int]) -> Metrics:
    """Unweighted fold means; flagged folds drop out of R^2 only.

    With every fold flagged (e.g. leave-one-out) the mean R^2 is NaN,
    reported as "undefined".
    """
    kept = [m.r2 for i, m in enumerate(per_fold) if i not in excluded]
    return Metrics(
        float(np.mean([m.rmse for m in per_fold])),
        float(np.mean(kept)) if kept else math.nan,
        float(np.mean([m.mae for m in per_fold])),
    )


# -- cross-validation ------------------------------------------------------


def model_seed(master_seed: int, family: Family, fold: int) -> int:
    """Independent per-(family, fold) seed derived from the master seed."""
    offset = FAMILY_ORDER.index(Family(family))
    ss = np.random.SeedSequence([int(master_seed), offset, fold + 1])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(eq=False)
class CVResult:
    family: Family
    per_fold: list
    mean: Metrics
    pooled: Metrics
    test_indices: list
    oof: np.ndarray
    excluded_folds: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "mean": self.mean.to_dict(),
            "pooled": self.pooled.to_dict(),
            "per_fold": [m.to_dict() for m in self.per_fold],
            "excluded_folds": list(self.excluded_folds),
        }


def cross_validate(spec: ModelSpec, data: Dataset, plan: FoldPlan, seed: int = 0) -> CVResult:
    """Fit on each fold's complement, score on the fold.

    Folds whose held-out labels are constant are flagged and left out of the
    fold-averaged R^2.
    """
    per_fold, tests, excluded = [], [], []
    oof = np.full(len(data), np.nan)
    for i in range(plan.k):
        test = plan.test_indices(i)
        train = data.subset(plan.train_indices(i))
        held = data.subset(test)
        try:
            model = fit(spec, train, seed=model_seed(seed, spec.family, i), fold=i)
        except Exception as exc:
            raise FoldFitError(i, spec.family.value, exc) from exc
        pred = model.predict(held)
        oof[test] = pred
        m = compute_metrics(held.y, pred)
        if np.var(held.y) * held.y.size < SST_EPS:
            warnings.warn(f"fold {i}: held-out labels are constant; excluded from mean R^2")
            excluded.append(i)
        per_fold.append(m)
        tests.append(test)
    return CVResult(
        family=spec.family,
        per_fold=per_fold,
        mean=_mean_metrics(per_fold, excluded),
        pooled=compute_metrics(data.y, oof),
        test_indices=tests,
        oof=oof,
        excluded_folds=excluded,
    )


# -- forest diagnostics ----------------------------------------------------


@dataclass(eq=False)
class ForestDiagnostics:
    split_counts: dict
    split_frequency: dict
    leaf_proxy_fraction: np.ndarray  # one entry per (tree, non-empty leaf)
    leaf_size: np.ndarray
    leaf_has_true: np.ndarray
    prediction_range: tuple
    outcome_range: tuple

    @property
    def range_ratio(self) -> float:
        """Outcome range divided by forest prediction range."""
        pr = self.prediction_range[1] - self.prediction_range[0]
        orr = self.outcome_range[1] - self.outcome_range[0]
        return math.inf if pr == 0 else orr / pr

    def split_share(self, features) -> float:
        if isinstance(features, str):
            features = [features]
        return float(sum(self.split_frequency.get(f, 0.0) for f in features))

    def pure_proxy_leaf_share(self, threshold: float = 0.9) -> float:
        """Fraction of populated leaves whose records are at least ``threshold`` proxy."""
        if self.leaf_proxy_fraction.size == 0:
            return 0.0
        return float((self.leaf_proxy_fraction >= threshold).mean())

    def to_dict(self) -> dict:
        hist, edges = np.histogram(self.leaf_proxy_fraction, bins=10, range=(0.0, 1.0))
        return {
            "split_counts": dict(self.split_counts),
            "split_frequency": dict(self.split_frequency),
            "leaf_proxy_fraction_histogram": {
                "edges": edges.tolist(),
                "counts": hist.tolist(),
            },
            "n_leaves": int(self.leaf_proxy_fraction.size),
            "pure_proxy_leaf_share": self.pure_proxy_leaf_share(),
            "mean_leaf_proxy_fraction": float(self.leaf_proxy_fraction.mean())
            if self.leaf_proxy_fraction.size
            else None,
            "prediction_range": list(self.prediction_range),
            "outcome_range": list(self.outcome_range),
            "range_ratio": self.range_ratio if math.isfinite(self.range_ratio) else "inf",
        }


def forest_diagnostics(model: ForestModel, data: Dataset, predictions=None) -> ForestDiagnostics:
    """Split usage per feature and leaf composition by provenance over ``data``.

    ``prediction_range`` comes from ``predictions`` when given (for example
    out-of-fold predictions for ``data``), otherwise from ``model`` applied
    to ``data``.
    """
    if not isinstance(model, ForestModel):
        raise TypeError("forest_diagnostics needs a fitted forest")
    counts = {}
    for tree in model.trees:
        for j in tree.feature[tree.feature >= 0]:
            name = FOREST_FEATURES[j]
            counts[name] = counts.get(name, 0) + 1
    total = sum(counts.values())
    freq = {name: c / total for name, c in sorted(counts.items())} if total else {}
    if total and abs(sum(freq.values()) - 1.0) > 1e-9:
        raise InvariantViolation("split frequencies do not sum to one")

    X = model.matrix(data)
    proxy = data.is_proxy
    fractions, sizes, has_true = [], [], []
    for tree in model.trees:
        leaves = tree.apply(X)
        n_leaf = np.bincount(leaves, minlength=tree.n_nodes)
        n_proxy = np.bincount(leaves, weights=proxy.astype(float), minlength=tree.n_nodes)
        used = n_leaf > 0
        fractions.append(n_proxy[used] / n_leaf[used])
        sizes.append(n_leaf[used])
        has_true.append(n_proxy[used] < n_leaf[used])
    pred = model.predict(data) if predictions is None else np.asarray(predictions, dtype=float)
    if pred.shape != (len(data),):
        raise ValueError("predictions must have one entry per record")
    return ForestDiagnostics(
        split_counts=dict(sorted(counts.items())),
        split_frequency=freq,
        leaf_proxy_fraction=np.concatenate(fractions),
        leaf_size=np.concatenate(sizes),
        leaf_has_true=np.concatenate(has_true),
        prediction_range=(float(pred.min()), float(pred.max())),
        outcome_range=(float(data.y.min()), float(data.y.max())),
    )


# -- information table -----------------------------------------------------

FEATURE_CATEGORIES = {
    "leverage": ("debt_to_assets", "debt_to_equity"),
    "liquidity": ("current_ratio", "cash_to_assets"),
    "size": ("log_assets", "log_liabilities"),
    "industry": ("industry",),
    "filing_district": ("filing_district",),
    "chapter11": ("chapter11",),
}
# Reference magnitudes (bits, approx R^2) shown next to estimates; never used in fitting.
REFERENCE_MI_BITS = {"leverage": 1.510, "industry": 0.242, "size": 0.086}
REFERENCE_APPROX_R2 = {"leverage": 0.31, "industry": 0.05, "size": 0.02}


def rank_features(data: Dataset) -> list:
    """Per-feature MI with LGD (bits), sorted high to low, with R^2 ceilings."""
    k = sturges_bins(len(data))
    rows = []
    for name in CONTINUOUS_FEATURES + ("industry", "filing_district", "chapter11"):
        est = mutual_information(data.column(name), data.y, k, k)
        rows.append(
            {
                "feature": name,
                "mi_bits": est.value_bits,
                "mi_bits_plugin": est.raw_bits,
                "r2_ceiling": r2_ceiling(est),
            }
        )
    rows.sort(key=lambda r: (-r["mi_bits"], r["feature"]))
    return rows


def information_table(data: Dataset) -> dict:
    """Per-feature MI, per-category sums, and a joint estimate over all features."""
    per_feature = {r["feature"]: r for r in rank_features(data)}
    categories = {}
    for cat, names in FEATURE_CATEGORIES.items():
        bits = sum(per_feature[n]["mi_bits"] for n in names)
        categories[cat] = {
            "mi_bits_sum": bits,
            "r2_ceiling": r2_ceiling(bits),
            "reference_mi_bits": REFERENCE_MI_BITS.get(cat),
            "reference_approx_r2": REFERENCE_APPROX_R2.get(cat),
        }
    total_sum = sum(r["mi_bits"] for r in per_feature.values())
    joint = joint_mutual_information([data.column(n) for n in CONTINUOUS_FEATURES], data.y)
    return {
        "features": [per_feature[k] for k in per_feature],
        "categories": categories,
        "total_sum_bits": total_sum,
        "joint_bits": joint.value_bits,
        "joint_r2_ceiling": r2_ceiling(joint),
    }


# -- comparison ------------------------------------------------------------


def data_digest(data: Dataset) -> str:
    h = hashlib.sha256()
    for r in data.records:
        h.update(
            "|".join(
                _format(getattr(r, name))
                for name in (
                    "firm_id", "total_assets", "total_liabilities", "total_debt", "total_equity",
                    "current_assets", "current_liabilities", "cash", "industry",
                    "filing_district", "chapter11", "is_public", "provenance", "lgd",
                )
            ).encode()
        )
        h.update(b"\n")
    return h.hexdigest()


def config_digest(data: Dataset, specs: Sequence[ModelSpec], k: int, seed: int) -> str:
    payload = {
        "data": data_digest(data),
        "models": [s.to_dict() for s in specs],
        "folds": k,
        "seed": int(seed),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass(eq=False)
class EvalReport:
    results: dict  # family value -> CVResult
    plan: FoldPlan
    config_digest: str
    n: int
    mixture_proportion: float
    fold_proxy_shares: np.ndarray
    information: dict
    variance_shares: Optional[dict] = None
    info_parameters: Optional[dict] = None
    diagnostics: Optional[ForestDiagnostics] = None

    @property
    def families(self) -> list:
        return list(self.results)

    def metric(self, family, name: str = "rmse", kind: str = "mean") -> float:
        return getattr(getattr(self.results[Family(family).value], kind), name)

    def ranking(self, name: str = "rmse") -> list:
        """Families ordered best first by fold-averaged ``name``."""
        sign = 1 if name in ("rmse", "mae") else -1
        return sorted(self.results, key=lambda f: sign * self.metric(f, name))

    def to_dict(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "n": self.n,
            "mixture_proportion": self.mixture_proportion,
            "folds": self.plan.k,
            "seed": self.plan.seed,
            "fold_proxy_shares": self.fold_proxy_shares.tolist(),
            "models": {f: r.to_dict() for f, r in self.results.items()},
            "ranking_rmse": self.ranking("rmse"),
            "information": self.information,
            "variance_shares": self.variance_shares,
            "info_parameters": self.info_parameters,
            "forest_diagnostics": self.diagnostics.to_dict() if self.diagnostics else None,
        }


def run_comparison(
    data: Dataset, specs: Sequence[ModelSpec], k: int = 10, seed: int = 0
) -> EvalReport:
    """Cross-validate every spec on one shared fold plan and collect the tables.

    The info model and the forest are also refitted on the full sample for
    the variance decomposition, the auxiliary coefficients and the forest's
    split and leaf tallies.  The forest's prediction range is taken from its
    out-of-fold predictions.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("need at least one model spec")
    families = [s.family for s in specs]
    if len(set(families)) != len(families):
        raise ValueError("each model family may appear once")
    plan = stratified_folds(data, k, seed)
    plan.validate(data)

    results = {}
    for spec in specs:
        res = cross_validate(spec, data, plan, seed)
        for m in res.per_fold:
            if m.rmse < 0 or m.mae < 0 or m.r2 > 1 + 1e-12:
                raise InvariantViolation(f"{spec.family.value}: metric out of range {m}")
        results[spec.family.value] = res

    report = EvalReport(
        results=results,
        plan=plan,
        config_digest=config_digest(data, specs, k, seed),
        n=len(data),
        mixture_proportion=data.mixture_proportion,
        fold_proxy_shares=plan.proxy_shares(data),
        information=information_table(data),
    )
    for spec in specs:
        if spec.family is Family.INFO:
            from .infomodel import variance_decomposition

            model = fit(spec, data, seed=model_seed(seed, spec.family, FULL_FIT_FOLD))
            report.variance_shares = variance_decomposition(model, data, training=True)
            report.info_parameters = {
                "alpha": model.alpha,
                "beta": model.beta,
                "gamma": model.gamma,
                "intercept": model.intercept,
                "ridge_lambda": model.ridge_lambda,
                "weights": dict(zip(model.features, model.weights.tolist())),
            }
        elif spec.family is Family.FOREST:
            model = fit(spec, data, seed=model_seed(seed, spec.family, FULL_FIT_FOLD))
            report.diagnostics = forest_diagnostics(model, data, results[spec.family.value].oof)
    return report
