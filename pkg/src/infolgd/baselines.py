"""Benchmark LGD models sharing one fit/predict contract.

=================  ======================================================
family             model
=================  ======================================================
``industry``       training mean LGD per industry, global mean fallback
``size``           power law ``alpha * assets ** -beta`` fitted in logs
``linear``         OLS on log-assets, leverage, Chapter 11 and district
``forest``         bagged variance-minimising trees (50 x depth 5, leaf 2)
``info``           entropy-weighted additive model, see :mod:`infolgd.infomodel`
=================  ======================================================

Every fitted model exposes ``predict(data)`` where ``data`` is a
:class:`~infolgd.dataset.Dataset` or a sequence of
:class:`~infolgd.dataset.FeatureVector`; predictions are clipped to [0, 1].
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataset import (
    CONTINUOUS_FEATURES,
    Dataset,
    FeatureVector,
    SchemaError,
)
from .tree import Tree, grow_forest


class Family(str, enum.Enum):
    INDUSTRY = "industry"
    SIZE = "size"
    LINEAR = "linear"
    FOREST = "forest"
    INFO = "info"


FOREST_DEFAULTS = {
    "n_trees": 50,
    "max_depth": 5,
    "min_samples_leaf": 2,
    "bootstrap": True,
    "max_features": None,
}
SIZE_LABEL_FLOOR = 1e-3
LINEAR_RIDGE_FALLBACK = 1e-6

# Family order fixes the seed offsets used during comparisons.
FAMILY_ORDER = (Family.INFO, Family.INDUSTRY, Family.SIZE, Family.LINEAR, Family.FOREST)


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.FOREST:
            unknown = set(self.hyperparameters) - set(FOREST_DEFAULTS)
            if unknown:
                raise ValueError(f"unknown forest hyperparameters: {sorted(unknown)}")
            merged = {**FOREST_DEFAULTS, **self.hyperparameters}
            object.__setattr__(self, "hyperparameters", merged)

    def to_dict(self) -> dict:
        return {"family": self.family.value, "hyperparameters": dict(self.hyperparameters)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(Family(d["family"]), dict(d.get("hyperparameters") or {}))


class FeatureFrame:
    """Column view over a list of :class:`FeatureVector` (the Dataset API subset models use)."""

    def __init__(self, features):
        features = list(features)
        for f in features:
            if not isinstance(f, FeatureVector):
                raise SchemaError(f"expected FeatureVector, got {type(f).__name__}")
        self.features = features
        n = len(features)
        self.X = np.array(
            [[getattr(f, c) for c in CONTINUOUS_FEATURES] for f in features], dtype=float
        ).reshape(n, len(CONTINUOUS_FEATURES))
        self.industry = np.array([f.industry for f in features], dtype=object)
        self.filing_district = np.array([f.filing_district for f in features], dtype=object)
        self.chapter11 = np.array([f.chapter11 for f in features], dtype=bool)
        self.assets = np.exp(self.X[:, CONTINUOUS_FEATURES.index("log_assets")])

    def __len__(self):
        return len(self.features)

    def column(self, name):
        if name in CONTINUOUS_FEATURES:
            return self.X[:, CONTINUOUS_FEATURES.index(name)]
        return getattr(self, name)


def as_frame(data):
    if isinstance(data, (Dataset, FeatureFrame)):
        return data
    if isinstance(data, FeatureVector):
        return FeatureFrame([data])
    return FeatureFrame(data)


def _clip(values) -> np.ndarray:
    return np.clip(np.asarray(values, dtype=float), 0.0, 1.0)


@dataclass(frozen=True)
class TrainingSummary:
    n: int
    feature_names: tuple
    fold: Optional[int] = None

    def to_dict(self):
        return {"n": self.n, "feature_names": list(self.feature_names), "fold": self.fold}

    @classmethod
    def from_dict(cls, d):
        return cls(d["n"], tuple(d["feature_names"]), d.get("fold"))


class FittedModel:
    """Base class: a fitted model with ``predict`` and JSON round-tripping."""

    spec: ModelSpec
    summary: TrainingSummary

    def predict(self, data) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "training_summary": self.summary.to_dict(),
            "parameters": self.parameters(),
        }


def predict(model: FittedModel, x) -> float | np.ndarray:
    """Prediction for one :class:`FeatureVector` (a float) or a batch (an array)."""
    if isinstance(x, FeatureVector):
        return float(model.predict(FeatureFrame([x]))[0])
    return model.predict(x)


# -- industry average ------------------------------------------------------


@dataclass(frozen=True)
class IndustryAverageModel(FittedModel):
    means: dict
    global_mean: float
    summary: TrainingSummary
    spec: ModelSpec = ModelSpec(Family.INDUSTRY)

    def predict(self, data):
        frame = as_frame(data)
        return _clip([self.means.get(ind, self.global_mean) for ind in frame.industry])

    def parameters(self):
        return {"means": dict(sorted(self.means.items())), "global_mean": self.global_mean}


def fit_industry_average(train: Dataset, spec: Optional[ModelSpec] = None, fold=None):
    y = train.y
    means = {}
    for ind in sorted(set(train.industry)):
        means[ind] = float(y[train.industry == ind].mean())
    return IndustryAverageModel(
        means=means,
        global_mean=float(y.mean()),
        summary=TrainingSummary(len(train), ("industry",), fold),
        spec=spec or ModelSpec(Family.INDUSTRY),
    )


# -- size power law --------------------------------------------------------


@dataclass(frozen=True)
class SizePowerLawModel(FittedModel):
    alpha: float
    beta: float
    summary: TrainingSummary
    spec: ModelSpec = ModelSpec(Family.SIZE)

    def predict(self, data):
        frame = as_frame(data)
        log_assets = frame.column("log_assets")
        return _clip(self.alpha * np.exp(-self.beta * log_assets))

    def parameters(self):
        return {"alpha": self.alpha, "beta": self.beta}


def fit_size_power_law(train: Dataset, spec: Optional[ModelSpec] = None, fold=None):
    """Fit ``log LGD = log alpha - beta log assets`` by least squares.

    Labels are floored at 1e-3 before the log.  Constant assets leave the
    slope unidentified: the model degrades to ``beta = 0``,
    ``alpha = mean LGD``.
    """
    log_a = train.column("log_assets")
    y = train.y
    if np.ptp(log_a) == 0:
        alpha, beta = float(y.mean()), 0.0
    else:
        log_y = np.log(np.clip(y, SIZE_LABEL_FLOOR, 1.0))
        A = np.column_stack([np.ones_like(log_a), log_a])
        (intercept, slope), *_ = np.linalg.lstsq(A, log_y, rcond=None)
        alpha, beta = float(math.exp(intercept)), float(-slope)
    return SizePowerLawModel(
        alpha, beta, TrainingSummary(len(train), ("log_assets",), fold), spec or ModelSpec(Family.SIZE)
    )


# -- linear ----------------------------------------------------------------

LINEAR_NUMERIC = ("log_assets", "debt_to_assets")


@dataclass(frozen=True)
class LinearModel(FittedModel):
    coef: np.ndarray  # intercept, log_assets, debt_to_assets, chapter11, districts...
    districts: tuple  # one-hot levels; the reference level is excluded
    reference_district: str
    ridge: float
    summary: TrainingSummary
    spec: ModelSpec = ModelSpec(Family.LINEAR)

    def design(self, data) -> np.ndarray:
        return linear_design(as_frame(data), self.districts)

    def predict(self, data):
        return _clip(self.design(data) @ self.coef)

    def column_names(self) -> list:
        return ["intercept", *LINEAR_NUMERIC, "chapter11"] + [f"district[{d}]" for d in self.districts]

    def parameters(self):
        return {
            "coef": self.coef.tolist(),
            "columns": self.column_names(),
            "districts": list(self.districts),
            "reference_district": self.reference_district,
            "ridge": self.ridge,
        }


def linear_design(frame, districts) -> np.ndarray:
    """Intercept, log-assets, debt/assets, Chapter 11 flag, district dummies."""
    n = len(frame)
    cols = [np.ones(n)]
    cols += [frame.column(c) for c in LINEAR_NUMERIC]
    cols.append(frame.chapter11.astype(float))
    for d in districts:
        cols.append((frame.filing_district == d).astype(float))
    return np.column_stack(cols)


def solve_least_squares(A: np.ndarray, b: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Normal-equations solve with an optional ridge on all but the first column."""
    gram = A.T @ A
    if ridge:
        penalty = np.eye(A.shape[1]) * ridge
        penalty[0, 0] = 0.0
        gram = gram + penalty
    return np.linalg.solve(gram, A.T @ b)


def fit_linear(train: Dataset, spec: Optional[ModelSpec] = None, fold=None):
    """OLS over the four regressor groups, falling back to a tiny ridge if rank deficient."""
    levels = sorted(set(train.filing_district))
    reference, districts = levels[0], tuple(levels[1:])
    A = linear_design(train, districts)
    ridge = 0.0
    if np.linalg.matrix_rank(A) < A.shape[1]:
        warnings.warn("linear design is rank deficient; using ridge fallback lambda=1e-6")
        ridge = LINEAR_RIDGE_FALLBACK
        coef = solve_least_squares(A, train.y, ridge)
    else:
        coef, *_ = np.linalg.lstsq(A, train.y, rcond=None)
    return LinearModel(
        coef=np.asarray(coef, dtype=float),
        districts=districts,
        reference_district=reference,
        ridge=ridge,
        summary=TrainingSummary(
            len(train), (*LINEAR_NUMERIC, "chapter11", "filing_district"), fold
        ),
        spec=spec or ModelSpec(Family.LINEAR),
    )


# -- forest ----------------------------------------------------------------

FOREST_FEATURES = CONTINUOUS_FEATURES + ("industry", "filing_district", "chapter11")
FOREST_CATEGORICAL = np.array([False] * len(CONTINUOUS_FEATURES) + [True, True, False])


def forest_matrix(frame, vocab: dict) -> np.ndarray:
    """Tree input matrix; categoricals become codes, unseen levels code -1."""
    cols = [frame.X]
    for name in ("industry", "filing_district"):
        index = {level: i for i, level in enumerate(vocab[name])}
        cols.append(np.array([index.get(v, -1) for v in frame.column(name)], dtype=float)[:, None])
    cols.append(frame.chapter11.astype(float)[:, None])
    return np.hstack(cols)


@dataclass(frozen=True)
class ForestModel(FittedModel):
    trees: tuple
    vocab: dict
    seed: int
    summary: TrainingSummary
    spec: ModelSpec = ModelSpec(Family.FOREST)

    def matrix(self, data) -> np.ndarray:
        return forest_matrix(as_frame(data), self.vocab)

    def tree_predictions(self, data) -> np.ndarray:
        X = self.matrix(data)
        return np.array([t.predict(X) for t in self.trees])

    def predict(self, data):
        return _clip(self.tree_predictions(data).mean(axis=0))

    def parameters(self):
        return {
            "seed": self.seed,
            "vocab": {k: list(v) for k, v in self.vocab.items()},
            "trees": [t.to_dict() for t in self.trees],
        }


def fit_forest(train: Dataset, spec: Optional[ModelSpec] = None, seed: int = 0, fold=None):
    spec = spec or ModelSpec(Family.FOREST)
    hp = spec.hyperparameters
    vocab = {
        "industry": tuple(sorted(set(train.industry))),
        "filing_district": tuple(sorted(set(train.filing_district))),
    }
    X = forest_matrix(train, vocab)
    n_levels = [0] * len(CONTINUOUS_FEATURES) + [len(vocab["industry"]), len(vocab["filing_district"]), 0]
    trees = grow_forest(
        X,
        train.y,
        FOREST_CATEGORICAL,
        n_levels,
        n_trees=hp["n_trees"],
        max_depth=hp["max_depth"],
        min_samples_leaf=hp["min_samples_leaf"],
        bootstrap=hp["bootstrap"],
        max_features=hp["max_features"],
        seed=seed,
    )
    return ForestModel(
        tuple(trees), vocab, int(seed), TrainingSummary(len(train), FOREST_FEATURES, fold), spec
    )


# -- dispatch and serialisation -------------------------------------------


def fit(spec: ModelSpec, train: Dataset, seed: int = 0, fold=None) -> FittedModel:
    """Fit any family.  ``seed`` is used by the stochastic families only."""
    if spec.family is Family.INDUSTRY:
        return fit_industry_average(train, spec, fold)
    if spec.family is Family.SIZE:
        return fit_size_power_law(train, spec, fold)
    if spec.family is Family.LINEAR:
        return fit_linear(train, spec, fold)
    if spec.family is Family.FOREST:
        return fit_forest(train, spec, seed, fold)
    from .infomodel import fit_info_model

    return fit_info_model(train, spec, seed=seed, fold=fold)


def model_from_dict(d: dict) -> FittedModel:
    spec = ModelSpec.from_dict(d["spec"])
    summary = TrainingSummary.from_dict(d["training_summary"])
    p = d["parameters"]
    if spec.family is Family.INDUSTRY:
        return IndustryAverageModel(dict(p["means"]), p["global_mean"], summary, spec)
    if spec.family is Family.SIZE:
        return SizePowerLawModel(p["alpha"], p["beta"], summary, spec)
    if spec.family is Family.LINEAR:
        return LinearModel(
            np.asarray(p["coef"], dtype=float),
            tuple(p["districts"]),
            p["reference_district"],
            p["ridge"],
            summary,
            spec,
        )
    if spec.family is Family.FOREST:
        return ForestModel(
            tuple(Tree.from_dict(t) for t in p["trees"]),
            {k: tuple(v) for k, v in p["vocab"].items()},
            p["seed"],
            summary,
            spec,
        )
    from .infomodel import InfoModel

    return InfoModel.from_dict(d)
