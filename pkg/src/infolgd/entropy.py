"""Histogram entropy and mutual information, reported in bits.

Continuous variables are binned into equal-width bins over their observed
range (values on the upper edge go to the last bin); categorical variables
use one bin per category.  Plug-in estimates are corrected with the
Miller-Madow term ``(k_occupied - 1) / (2 n)``, computed in nats and
converted to bits.

Mutual information is estimated as ``H(Y) - H(Y|X)`` where the conditional
entropy is the bin-weighted average of corrected per-slice entropies, with
the result floored at zero.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

LN2 = math.log(2.0)


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class InfoEstimate:
    """An entropy or mutual-information value with its binning metadata.

    ``raw_bits`` is the plug-in value, ``value_bits`` the reported one
    (corrected and floored where applicable).  ``occupied`` is the number of
    non-empty label bins, which is what the Miller-Madow term counts.
    """

    value_bits: float
    raw_bits: float
    bins_y: int
    n: int
    corrected: bool = False
    bins_x: Optional[int] = None
    occupied: Optional[int] = None
    kind: str = "entropy"

    @property
    def value_nats(self) -> float:
        return self.value_bits * LN2


def sturges_bins(n: int, rule: str = "round") -> int:
    """Number of histogram bins for ``n`` samples.

    ``rule="round"`` gives ``round(1 + log2 n)`` (11 for n = 1218);
    ``rule="ceil"`` gives ``1 + ceil(log2 n)`` (12 for n = 1218).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if rule == "round":
        k = math.floor(1.0 + math.log2(n) + 0.5)
    elif rule == "ceil":
        k = 1 + math.ceil(math.log2(n))
    else:
        raise ValueError(f"unknown Sturges rule {rule!r}")
    return max(int(k), 1)


def _as_finite(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("empty input")
    if not np.all(np.isfinite(arr)):
        raise ValueError("input contains non-finite values")
    return arr


def bin_indices(values, k: int, value_range: Optional[tuple] = None) -> np.ndarray:
    """Equal-width bin index in ``0..k-1`` for each value.

    Degenerate ranges (all values equal) put everything in bin 0.  Values
    outside an explicit ``value_range`` are clipped into the edge bins.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    arr = _as_finite(values)
    lo, hi = (arr.min(), arr.max()) if value_range is None else value_range
    width = hi - lo
    if not width > 0:
        return np.zeros(arr.size, dtype=np.intp)
    idx = np.floor((arr - lo) / width * k).astype(np.intp)
    return np.clip(idx, 0, k - 1)


def is_categorical(values) -> bool:
    arr = np.asarray(values)
    return arr.dtype.kind in "OUSb"


def _codes(values) -> tuple:
    """Integer codes and category count for a categorical array."""
    arr = np.asarray(values)
    if arr.dtype.kind == "O":
        arr = arr.astype(str)
    uniq, codes = np.unique(arr, return_inverse=True)
    return codes.ravel(), len(uniq)


def _plugin_bits(counts: np.ndarray) -> float:
    counts = counts[counts > 0]
    n = counts.sum()
    if n == 0 or counts.size <= 1:
        return 0.0
    p = counts / n
    return float(-(p * np.log2(p)).sum())


def _mm_bits(occupied: int, n: int) -> float:
    return (occupied - 1) / (2.0 * n) / LN2


def entropy_from_counts(counts, corrected: bool = True) -> InfoEstimate:
    counts = np.asarray(counts, dtype=float)
    n = int(counts.sum())
    occupied = int((counts > 0).sum())
    raw = _plugin_bits(counts)
    est = InfoEstimate(raw, raw, bins_y=max(counts.size, 1), n=max(n, 1), occupied=max(occupied, 1))
    return miller_madow(est) if corrected else est


def histogram_entropy(values, k: int, value_range: Optional[tuple] = None) -> InfoEstimate:
    """Plug-in entropy (bits) of a ``k``-bin equal-width histogram of ``values``."""
    arr = _as_finite(values)
    counts = np.bincount(bin_indices(arr, k, value_range), minlength=k)
    raw = _plugin_bits(counts)
    return InfoEstimate(
        value_bits=raw,
        raw_bits=raw,
        bins_y=k,
        n=arr.size,
        occupied=int((counts > 0).sum()),
    )


def miller_madow(raw: InfoEstimate) -> InfoEstimate:
    """Add the ``(k_occupied - 1) / (2n)`` bias term to a plug-in entropy."""
    occupied = raw.occupied if raw.occupied is not None else raw.bins_y
    return replace(
        raw,
        value_bits=raw.raw_bits + _mm_bits(occupied, raw.n),
        corrected=True,
    )


def _x_bins(x, kx: int) -> tuple:
    if is_categorical(x):
        return _codes(x)
    return bin_indices(x, kx), kx


def _conditional(xb: np.ndarray, n_xbins: int, yb: np.ndarray, ky: int) -> tuple:
    """(plug-in, corrected) conditional entropy in bits from bin codes."""
    n = yb.size
    joint = np.bincount(xb * ky + yb, minlength=n_xbins * ky).reshape(n_xbins, ky)
    raw = corrected = 0.0
    for row in joint:
        m = row.sum()
        if m == 0:
            continue
        h = _plugin_bits(row)
        raw += m / n * h
        corrected += m / n * (h + _mm_bits(int((row > 0).sum()), int(m)))
    return raw, corrected


def _check_pair(x, y) -> np.ndarray:
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(y) == 0:
        raise ValueError("empty input")
    return _as_finite(y)


def conditional_entropy(x, y, kx: int, ky: int) -> InfoEstimate:
    """``H(Y|X)`` in bits with per-slice Miller-Madow correction.

    ``y`` is binned once over its full range so every slice shares the same
    label bins.  Categorical ``x`` (object, string or bool arrays) uses its
    categories as bins and ignores ``kx``.
    """
    y = _check_pair(x, y)
    xb, n_xbins = _x_bins(x, kx)
    yb = bin_indices(y, ky)
    raw, corrected = _conditional(xb, n_xbins, yb, ky)
    return InfoEstimate(
        value_bits=corrected,
        raw_bits=raw,
        bins_y=ky,
        bins_x=n_xbins,
        n=y.size,
        corrected=True,
        kind="conditional_entropy",
    )


def mutual_information(x, y, kx: Optional[int] = None, ky: Optional[int] = None) -> InfoEstimate:
    """``I(X;Y) = H(Y) - H(Y|X)`` in bits, corrected and floored at 0.

    Bin counts default to Sturges' rule for the sample size.
    """
    y = _check_pair(x, y)
    n = y.size
    kx = sturges_bins(n) if kx is None else kx
    ky = sturges_bins(n) if ky is None else ky
    xb, n_xbins = _x_bins(x, kx)
    yb = bin_indices(y, ky)
    counts_y = np.bincount(yb, minlength=ky)
    hy_raw = _plugin_bits(counts_y)
    hy = hy_raw + _mm_bits(int((counts_y > 0).sum()), n)
    hyx_raw, hyx = _conditional(xb, n_xbins, yb, ky)
    return InfoEstimate(
        value_bits=max(hy - hyx, 0.0),
        raw_bits=hy_raw - hyx_raw,
        bins_y=ky,
        bins_x=n_xbins,
        n=n,
        corrected=True,
        kind="mutual_information",
    )


def joint_mutual_information(
    columns: Sequence, y, ky: Optional[int] = None, bins_per_feature: Optional[int] = None
) -> InfoEstimate:
    """Mutual information between ``y`` and several features taken jointly.

    Each continuous column is cut into ``bins_per_feature`` equal-width bins
    (default: the d-th root of the Sturges count, at least 2) and the tuple
    of bin codes is treated as one categorical variable.  Categorical columns
    keep their own levels.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if not columns:
        raise ValueError("need at least one feature column")
    k = sturges_bins(n)
    if bins_per_feature is None:
        n_cont = sum(not is_categorical(c) for c in columns) or 1
        bins_per_feature = max(2, int(round(k ** (1.0 / n_cont))))
    code = np.zeros(n, dtype=np.int64)
    for col in columns:
        cb, nb = _x_bins(col, bins_per_feature)
        if len(cb) != n:
            raise ValueError("length mismatch")
        code = code * nb + cb
    _, cells = np.unique(code, return_inverse=True)
    est = mutual_information(cells.astype(str), y, ky=k if ky is None else ky)
    return replace(est, kind="joint_mutual_information")


def gaussian_mi(rho: float, n: int = 1) -> InfoEstimate:
    """Mutual information of a bivariate normal with correlation ``rho``."""
    if not abs(rho) < 1:
        raise DomainError(f"|rho| must be < 1, got {rho!r}")
    bits = -0.5 * math.log2(1.0 - rho * rho)
    return InfoEstimate(bits, bits, bins_y=1, n=n, kind="gaussian_mi")


def r2_ceiling(info) -> float:
    """Upper bound ``1 - exp(-2 I)`` on R^2, with ``I`` converted to nats.

    Accepts an :class:`InfoEstimate` or a plain value in bits.
    """
    bits = info.value_bits if isinstance(info, InfoEstimate) else float(info)
    if bits < 0:
        raise ValueError("information must be non-negative")
    return -math.expm1(-2.0 * bits * LN2)


def information_weights(mi) -> np.ndarray:
    """Normalise per-feature information to weights summing to one.

    An all-zero vector falls back to uniform weights with a warning.
    """
    values = np.array(
        [m.value_bits if isinstance(m, InfoEstimate) else float(m) for m in mi], dtype=float
    )
    if values.size == 0:
        raise ValueError("need at least one estimate")
    values = np.maximum(values, 0.0)
    total = values.sum()
    if not total > 0:
        warnings.warn("all mutual information estimates are zero; using uniform weights")
        return np.full(values.size, 1.0 / values.size)
    return values / total
