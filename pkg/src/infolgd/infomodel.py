"""Entropy-weighted additive LGD model.

The prediction for a firm is

    intercept + sum_j w_j f_j(x_j)
              + alpha * H_industry + beta * mi_score + gamma * centrality

clipped to [0, 1], where

* ``f_j`` is a cubic B-spline smooth of continuous feature ``j`` (4 degrees
  of freedom by default, quantile interior knots, linear beyond the
  training range);
* ``w_j = I(X_j; Y) / sum_k I(X_k; Y)`` are information weights from the
  histogram MI estimator, applied to the spline columns before fitting;
* ``H_industry`` is the corrected entropy (bits) of training LGD within the
  firm's industry;
* ``mi_score = sum_j w_j z_j`` is the information-weighted sum of the
  standardised continuous features;
* ``centrality`` is the firm's degree in a graph linking firms that share
  both industry and filing district, divided by ``n - 1``.

All coefficients, including ``alpha``, ``beta`` and ``gamma``, come from a
single ridge solve with an unpenalised intercept.  The ridge strength is
picked by 5-fold cross-validation inside the training data.

How the three auxiliary terms enter is a reconstruction: only their names
and interpretations are fixed by the method, not the estimating equation.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import BSpline

from .baselines import (
    Family,
    FittedModel,
    ModelSpec,
    TrainingSummary,
    as_frame,
)
from .dataset import CONTINUOUS_FEATURES, Dataset
from .entropy import (
    bin_indices,
    entropy_from_counts,
    information_weights,
    mutual_information,
    sturges_bins,
)

INFO_DEFAULTS = {
    "df": 4,
    "features": list(CONTINUOUS_FEATURES),
    "lambda_grid": [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2],
    "inner_folds": 5,
    "ridge_lambda": None,  # fixed lambda; None selects by inner CV
    "sturges_rule": "round",
}
AUX_TERMS = ("industry_entropy", "mi_score", "network_centrality")
VARIANCE_GROUPS = ("mutual_information", "entropy", "industry_baseline", "network")


# -- splines ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SplineBasis:
    """Clamped B-spline basis on ``[lo, hi]`` with linear extension outside."""

    degree: int
    df: int
    knots: np.ndarray  # full clamped knot vector
    lo: float
    hi: float

    @property
    def interior_knots(self) -> np.ndarray:
        return self.knots[self.degree + 1 : len(self.knots) - self.degree - 1]

    def _spline(self):
        return BSpline(self.knots, np.eye(self.df), self.degree, extrapolate=False)

    def __call__(self, x) -> np.ndarray:
        """Basis matrix of shape ``(len(x), df)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.df == 1 or not self.hi > self.lo:
            return np.ones((x.size, self.df)) / self.df
        inside = np.clip(x, self.lo, self.hi)
        spl = self._spline()
        B = spl(inside)
        below, above = x < self.lo, x > self.hi
        if below.any() or above.any():
            slope = spl.derivative()(np.array([self.lo, self.hi]))
            B[below] += (x[below] - self.lo)[:, None] * slope[0]
            B[above] += (x[above] - self.hi)[:, None] * slope[1]
        return B

    def to_dict(self):
        return {
            "degree": self.degree,
            "df": self.df,
            "knots": self.knots.tolist(),
            "lo": self.lo,
            "hi": self.hi,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["degree"], d["df"], np.asarray(d["knots"], dtype=float), d["lo"], d["hi"])


def build_spline_basis(values, df: int = 4, degree: int = 3) -> SplineBasis:
    """Cubic B-spline basis with ``df`` functions over the range of ``values``.

    Interior knots sit at equally spaced quantiles.  With fewer distinct
    values than ``df`` the basis is shrunk (and its degree lowered if needed)
    with a warning.
    """
    values = np.asarray(values, dtype=float)
    n_distinct = np.unique(values).size
    if n_distinct < df:
        warnings.warn(f"only {n_distinct} distinct values; spline df reduced from {df}")
        df = max(n_distinct, 1)
    degree = min(degree, df - 1)
    lo, hi = float(values.min()), float(values.max())
    n_interior = df - degree - 1
    probs = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    interior = np.quantile(values, probs) if n_interior else np.empty(0)
    knots = np.r_[[lo] * (degree + 1), interior, [hi] * (degree + 1)]
    return SplineBasis(degree, df, knots.astype(float), lo, hi)


# -- ridge -----------------------------------------------------------------


def ridge_solve(D: np.ndarray, y: np.ndarray, lam: float) -> tuple:
    """Ridge regression with an unpenalised intercept.

    Returns ``(intercept, coef)``.  ``lam = 0`` gives the minimum-norm
    least-squares solution.
    """
    D = np.asarray(D, dtype=float)
    y = np.asarray(y, dtype=float)
    d_mean, y_mean = D.mean(axis=0), y.mean()
    Dc, yc = D - d_mean, y - y_mean
    if lam == 0:
        coef, *_ = np.linalg.lstsq(Dc, yc, rcond=None)
    else:
        gram = Dc.T @ Dc + lam * np.eye(D.shape[1])
        coef = np.linalg.solve(gram, Dc.T @ yc)
    return float(y_mean - d_mean @ coef), coef


def _solve_with_escalation(D, y, lam, grid):
    candidates = [lam] + sorted(g for g in grid if g > lam)
    for value in candidates:
        try:
            return value, ridge_solve(D, y, value)
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("ridge system singular across the whole lambda grid")


def select_lambda(D, y, grid, n_folds: int, seed: int) -> float:
    """Pick the grid value with lowest mean held-out squared error."""
    n = y.size
    n_folds = min(n_folds, n)
    if n_folds < 2:
        return float(max(grid))
    order = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(order, n_folds)
    best, best_err = None, np.inf
    for lam in sorted(grid):
        err = 0.0
        for test in folds:
            train = np.setdiff1d(order, test)
            try:
                b0, b = ridge_solve(D[train], y[train], lam)
            except np.linalg.LinAlgError:
                err = np.inf
                break
            pred = np.clip(b0 + D[test] @ b, 0.0, 1.0)
            err += float(((y[test] - pred) ** 2).sum())
        # ties go to the larger lambda
        if err <= best_err:
            best, best_err = lam, err
    return float(best)


# -- network ---------------------------------------------------------------


def _cell_key(industry, district) -> str:
    return f"{industry}\x1f{district}"


def network_centrality(data) -> np.ndarray:
    """Normalised degree in the shared-industry-and-district firm graph."""
    frame = as_frame(data)
    n = len(frame)
    if n < 2:
        return np.zeros(n)
    keys = [_cell_key(i, d) for i, d in zip(frame.industry, frame.filing_district)]
    counts = {}
    for k in keys:
        counts[k] = counts.get(k, 0) + 1
    return np.array([(counts[k] - 1) / (n - 1) for k in keys], dtype=float)


# -- model -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InfoModel(FittedModel):
    """Fitted entropy-weighted additive model.

    ``smooths`` holds one ``(SplineBasis, coefficients)`` pair per entry of
    ``features``.  ``cell_counts`` / ``n_train`` reproduce the training
    network so new firms get the centrality they would have had as an extra
    node.
    """

    intercept: float
    features: tuple
    weights: np.ndarray
    smooths: tuple
    alpha: float
    beta: float
    gamma: float
    industry_entropy: dict
    default_entropy: float
    score_center: np.ndarray
    score_scale: np.ndarray
    cell_counts: dict
    n_train: int
    ridge_lambda: float
    mi_bits: np.ndarray = field(default_factory=lambda: np.empty(0))
    summary: TrainingSummary = TrainingSummary(0, ())
    spec: ModelSpec = ModelSpec(Family.INFO)

    # term-level pieces

    def spline_columns(self, frame) -> list:
        return [
            self.weights[j] * basis(frame.column(name))
            for j, (name, (basis, _)) in enumerate(zip(self.features, self.smooths))
        ]

    def entropy_column(self, frame) -> np.ndarray:
        return np.array(
            [self.industry_entropy.get(ind, self.default_entropy) for ind in frame.industry],
            dtype=float,
        )

    def score_column(self, frame) -> np.ndarray:
        Z = np.column_stack([frame.column(f) for f in self.features])
        Z = (Z - self.score_center) / self.score_scale
        return Z @ self.weights

    def centrality_column(self, frame, training: bool = False) -> np.ndarray:
        keys = [_cell_key(i, d) for i, d in zip(frame.industry, frame.filing_district)]
        if training:
            denom = max(self.n_train - 1, 1)
            return np.array([(self.cell_counts.get(k, 1) - 1) / denom for k in keys], dtype=float)
        denom = max(self.n_train, 1)
        return np.array([self.cell_counts.get(k, 0) / denom for k in keys], dtype=float)

    def terms(self, data, training: bool = False) -> dict:
        """Additive contributions per term group, before clipping."""
        frame = as_frame(data)
        n = len(frame)
        spline = np.zeros(n)
        for cols, (_, coef) in zip(self.spline_columns(frame), self.smooths):
            spline += cols @ coef
        return {
            "intercept": np.full(n, self.intercept),
            "splines": spline,
            "entropy": self.alpha * self.entropy_column(frame),
            "mi_score": self.beta * self.score_column(frame),
            "network": self.gamma * self.centrality_column(frame, training),
        }

    def raw_predict(self, data, training: bool = False) -> np.ndarray:
        return sum(self.terms(data, training).values())

    def predict(self, data, training: bool = False):
        return np.clip(self.raw_predict(data, training), 0.0, 1.0)

    # serialisation

    def parameters(self):
        return {
            "intercept": self.intercept,
            "features": list(self.features),
            "weights": self.weights.tolist(),
            "mi_bits": self.mi_bits.tolist(),
            "smooths": [
                {"basis": basis.to_dict(), "coef": np.asarray(coef).tolist()}
                for basis, coef in self.smooths
            ],
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "industry_entropy": dict(sorted(self.industry_entropy.items())),
            "default_entropy": self.default_entropy,
            "score_center": self.score_center.tolist(),
            "score_scale": self.score_scale.tolist(),
            "cell_counts": dict(sorted(self.cell_counts.items())),
            "n_train": self.n_train,
            "ridge_lambda": self.ridge_lambda,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InfoModel":
        p = d["parameters"]
        return cls(
            intercept=p["intercept"],
            features=tuple(p["features"]),
            weights=np.asarray(p["weights"], dtype=float),
            smooths=tuple(
                (SplineBasis.from_dict(s["basis"]), np.asarray(s["coef"], dtype=float))
                for s in p["smooths"]
            ),
            alpha=p["alpha"],
            beta=p["beta"],
            gamma=p["gamma"],
            industry_entropy=dict(p["industry_entropy"]),
            default_entropy=p["default_entropy"],
            score_center=np.asarray(p["score_center"], dtype=float),
            score_scale=np.asarray(p["score_scale"], dtype=float),
            cell_counts=dict(p["cell_counts"]),
            n_train=p["n_train"],
            ridge_lambda=p["ridge_lambda"],
            mi_bits=np.asarray(p["mi_bits"], dtype=float),
            summary=TrainingSummary.from_dict(d["training_summary"]),
            spec=ModelSpec.from_dict(d["spec"]),
        )


def predict_info(model: InfoModel, x) -> float | np.ndarray:
    from .baselines import predict

    return predict(model, x)


def industry_entropies(industry, y, k: int) -> tuple:
    """Corrected label entropy per industry on shared bins over the label range.

    Industries with a single training firm get the pooled entropy.  Returns
    ``(per_industry, fallback)`` where ``fallback`` (for unseen industries)
    is the mean over industries.
    """
    bins = bin_indices(y, k)
    pooled = entropy_from_counts(np.bincount(bins, minlength=k)).value_bits
    out = {}
    for ind in sorted(set(industry)):
        mask = industry == ind
        if mask.sum() < 2:
            out[ind] = pooled
        else:
            out[ind] = entropy_from_counts(np.bincount(bins[mask], minlength=k)).value_bits
    return out, float(np.mean(list(out.values())))


def fit_info_model(
    train: Dataset, spec: Optional[ModelSpec] = None, seed: int = 0, fold=None
) -> InfoModel:
    """Fit the additive model on ``train``.

    MI weights, spline bases, industry entropies and the network are computed
    once from ``train`` and shared by the inner lambda search.
    """
    spec = spec or ModelSpec(Family.INFO)
    hp = {**INFO_DEFAULTS, **spec.hyperparameters}
    unknown = set(spec.hyperparameters) - set(INFO_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown info-model hyperparameters: {sorted(unknown)}")
    features = tuple(hp["features"])
    y = train.y
    n = y.size
    k = sturges_bins(n, hp["sturges_rule"])

    mi = [mutual_information(train.column(f), y, k, k) for f in features]
    mi_bits = np.array([m.value_bits for m in mi])
    weights = information_weights(mi)
    bases = [build_spline_basis(train.column(f), hp["df"]) for f in features]

    ent, default_ent = industry_entropies(train.industry, y, k)
    Z = np.column_stack([train.column(f) for f in features])
    center = Z.mean(axis=0)
    scale = Z.std(axis=0)
    scale[scale == 0] = 1.0
    cells = {}
    for i, d in zip(train.industry, train.filing_district):
        key = _cell_key(i, d)
        cells[key] = cells.get(key, 0) + 1

    # Build the design through a zero-coefficient model so fit and predict
    # share one column construction.
    shell = InfoModel(
        intercept=0.0,
        features=features,
        weights=weights,
        smooths=tuple((b, np.zeros(b.df)) for b in bases),
        alpha=0.0,
        beta=0.0,
        gamma=0.0,
        industry_entropy=ent,
        default_entropy=default_ent,
        score_center=center,
        score_scale=scale,
        cell_counts=cells,
        n_train=n,
        ridge_lambda=0.0,
    )
    D = info_design(shell, train, training=True)

    grid = [float(g) for g in hp["lambda_grid"]]
    if hp["ridge_lambda"] is None:
        lam = select_lambda(D, y, grid, hp["inner_folds"], seed)
    else:
        lam = float(hp["ridge_lambda"])
    lam, (b0, coef) = _solve_with_escalation(D, y, lam, grid)

    smooths, start = [], 0
    for b in bases:
        smooths.append((b, coef[start : start + b.df].copy()))
        start += b.df
    alpha, beta, gamma = (float(c) for c in coef[start : start + 3])
    return InfoModel(
        intercept=b0,
        features=features,
        weights=weights,
        smooths=tuple(smooths),
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        industry_entropy=ent,
        default_entropy=default_ent,
        score_center=center,
        score_scale=scale,
        cell_counts=cells,
        n_train=n,
        ridge_lambda=lam,
        mi_bits=mi_bits,
        summary=TrainingSummary(n, features + AUX_TERMS, fold),
        spec=spec,
    )


def info_design(model: InfoModel, data, training: bool = False) -> np.ndarray:
    """Design matrix: weighted spline columns, then entropy, MI score, centrality."""
    frame = as_frame(data)
    cols = model.spline_columns(frame)
    cols.append(model.entropy_column(frame)[:, None])
    cols.append(model.score_column(frame)[:, None])
    cols.append(model.centrality_column(frame, training)[:, None])
    return np.hstack(cols)


# -- variance decomposition ------------------------------------------------


def variance_shares(terms: dict) -> dict:
    """Empirical variance of each term normalised to sum to one."""
    var = {k: float(np.var(v)) for k, v in terms.items()}
    total = sum(var.values())
    if not total > 0:
        warnings.warn("all term variances are zero; reporting uniform shares")
        return {k: 1.0 / len(var) for k in var}
    return {k: v / total for k, v in var.items()}


def variance_decomposition(model: InfoModel, data, training: bool = False) -> dict:
    """Share of prediction variance per component group.

    Groups: ``mutual_information`` (spline smooths plus the MI-score term),
    ``entropy``, ``industry_baseline`` (the intercept; this model has no
    separate industry main effect) and ``network``.
    """
    t = model.terms(data, training)
    return variance_shares(
        {
            "mutual_information": t["splines"] + t["mi_score"],
            "entropy": t["entropy"],
            "industry_baseline": t["intercept"],
            "network": t["network"],
        }
    )
