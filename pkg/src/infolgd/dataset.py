"""Firm records, LGD labels, sample filters and feature derivation.

A bankruptcy case is a :class:`FirmRecord`.  Its LGD label comes from one of
two measurement routes: a documented recovery (``Provenance.TRUE_OUTCOME``,
LGD = 1 - recovered / outstanding) or a balance-sheet proxy
(``Provenance.PROXY``, LGD = 1 - min(assets / liabilities, 1)).  The mix of
the two routes is what the rest of the package is about.

CSV is the interchange format.  :func:`load_dataset` reads one record per row
through a column mapping, :func:`apply_filters` applies the sample selection
(public firm, assets above a threshold, complete financials) and returns a
:class:`Dataset` holding records, derived :class:`FeatureVector` rows and
labels side by side.
"""
from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

DEBT_TO_EQUITY_CAP = 1000.0
CURRENT_RATIO_CAP = 1000.0
DEFAULT_MIN_ASSETS = 100e6

CONTINUOUS_FEATURES = (
    "debt_to_assets",
    "debt_to_equity",
    "current_ratio",
    "cash_to_assets",
    "log_assets",
    "log_liabilities",
)
CATEGORICAL_FEATURES = ("industry", "filing_district", "chapter11")
FEATURE_NAMES = CONTINUOUS_FEATURES + CATEGORICAL_FEATURES

# Balance-sheet inputs the feature set needs; "complete financial data".
REQUIRED_FINANCIALS = (
    "total_assets",
    "total_liabilities",
    "total_debt",
    "total_equity",
    "current_assets",
    "current_liabilities",
    "cash",
)


class InvalidInputError(ValueError):
    """An argument lies outside the domain of a label formula."""


class EmptyDatasetError(ValueError):
    """Filtering or slicing left no records."""


class SchemaError(ValueError):
    """CSV header or feature schema does not match what is expected."""


class RowValidationError(ValueError):
    """A CSV row could not be turned into a valid record."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class DataQualityWarning(UserWarning):
    pass


class Provenance(str, enum.Enum):
    TRUE_OUTCOME = "TrueOutcome"
    PROXY = "Proxy"


def lgd_true(recovered: float, outstanding: float) -> float:
    """LGD of a documented case, ``1 - recovered / outstanding`` in [0, 1].

    A recovery larger than the claim (post-petition interest and similar
    artifacts) is clamped to zero loss with a :class:`DataQualityWarning`.
    """
    if not outstanding > 0:
        raise InvalidInputError(f"outstanding must be positive, got {outstanding!r}")
    if recovered < 0:
        raise InvalidInputError(f"recovered must be non-negative, got {recovered!r}")
    if recovered > outstanding:
        warnings.warn(
            f"recovered {recovered} exceeds outstanding {outstanding}; LGD clamped to 0",
            DataQualityWarning,
            stacklevel=2,
        )
        return 0.0
    return min(max(1.0 - recovered / outstanding, 0.0), 1.0)


def lgd_proxy(assets: float, liabilities: float) -> float:
    """Liquidation proxy ``1 - min(assets / liabilities, 1)``."""
    if not liabilities > 0:
        raise InvalidInputError(f"liabilities must be positive, got {liabilities!r}")
    if assets < 0:
        raise InvalidInputError(f"assets must be non-negative, got {assets!r}")
    return 1.0 - min(assets / liabilities, 1.0)


@dataclass(frozen=True)
class FirmRecord:
    firm_id: str
    total_assets: Optional[float]
    total_liabilities: Optional[float]
    total_debt: Optional[float]
    total_equity: Optional[float]
    current_assets: Optional[float]
    current_liabilities: Optional[float]
    cash: Optional[float]
    industry: str
    filing_district: str
    chapter11: bool
    is_public: bool
    provenance: Provenance
    lgd: float
    recovered: Optional[float] = None
    outstanding: Optional[float] = None

    def __post_init__(self):
        if not (0.0 <= self.lgd <= 1.0):
            raise InvalidInputError(f"{self.firm_id}: lgd {self.lgd!r} outside [0, 1]")
        if self.provenance is Provenance.TRUE_OUTCOME:
            if self.recovered is None or self.outstanding is None:
                raise InvalidInputError(
                    f"{self.firm_id}: TrueOutcome record needs recovered and outstanding"
                )
            if not self.outstanding > 0:
                raise InvalidInputError(f"{self.firm_id}: outstanding must be positive")
        for name in ("total_assets", "total_liabilities"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise InvalidInputError(f"{self.firm_id}: {name} is negative")

    def is_complete(self) -> bool:
        for name in REQUIRED_FINANCIALS:
            value = getattr(self, name)
            if value is None or not math.isfinite(value):
                return False
        # logs of assets and liabilities must exist
        return self.total_assets > 0 and self.total_liabilities > 0


@dataclass(frozen=True)
class FeatureVector:
    debt_to_assets: float
    debt_to_equity: float
    current_ratio: float
    cash_to_assets: float
    log_assets: float
    log_liabilities: float
    industry: str
    filing_district: str
    chapter11: bool

    def continuous(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in CONTINUOUS_FEATURES], dtype=float)


def _capped_ratio(num: float, den: float, cap: float) -> float:
    if den == 0:
        if num == 0:
            return 0.0
        return math.copysign(cap, num)
    return min(max(num / den, -cap), cap)


def build_features(record: FirmRecord) -> FeatureVector:
    """Derive the balance-sheet ratios, natural-log size terms and categoricals.

    Zero equity or zero current liabilities give a ratio capped at
    ``+-1000`` with the sign of the numerator instead of an infinity.
    """
    if not record.is_complete():
        raise SchemaError(f"{record.firm_id}: incomplete financials, run apply_filters first")
    assets = record.total_assets
    return FeatureVector(
        debt_to_assets=record.total_debt / assets,
        debt_to_equity=_capped_ratio(record.total_debt, record.total_equity, DEBT_TO_EQUITY_CAP),
        current_ratio=_capped_ratio(
            record.current_assets, record.current_liabilities, CURRENT_RATIO_CAP
        ),
        cash_to_assets=record.cash / assets,
        log_assets=math.log(assets),
        log_liabilities=math.log(record.total_liabilities),
        industry=record.industry,
        filing_district=record.filing_district,
        chapter11=bool(record.chapter11),
    )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Records with their feature rows and labels, index-aligned.

    Build one with :meth:`from_records`.  Array views used by the models
    (``X``, ``y``, ``is_proxy`` and the categorical columns) are computed
    lazily and cached.
    """

    records: tuple
    features: tuple
    labels: tuple
    mixture_proportion: float

    def __post_init__(self):
        n = len(self.records)
        if n < 1:
            raise EmptyDatasetError("a Dataset needs at least one record")
        if len(self.features) != n or len(self.labels) != n:
            raise ValueError("records, features and labels must have equal length")

    @classmethod
    def from_records(cls, records: Iterable[FirmRecord]) -> "Dataset":
        records = tuple(records)
        if not records:
            raise EmptyDatasetError("no records")
        features = tuple(build_features(r) for r in records)
        labels = tuple(float(r.lgd) for r in records)
        n_proxy = sum(r.provenance is Provenance.PROXY for r in records)
        return cls(records, features, labels, n_proxy / len(records))

    def __len__(self) -> int:
        return len(self.records)

    def subset(self, index: Sequence[int]) -> "Dataset":
        """Rows ``index`` as a new Dataset (features and labels carried over)."""
        index = [int(i) for i in np.asarray(index, dtype=int)]
        if not index:
            raise EmptyDatasetError("empty subset")
        records = tuple(self.records[i] for i in index)
        n_proxy = sum(r.provenance is Provenance.PROXY for r in records)
        return Dataset(
            records,
            tuple(self.features[i] for i in index),
            tuple(self.labels[i] for i in index),
            n_proxy / len(records),
        )

    @cached_property
    def X(self) -> np.ndarray:
        """Continuous feature matrix, columns in ``CONTINUOUS_FEATURES`` order."""
        return np.array(
            [[getattr(f, name) for name in CONTINUOUS_FEATURES] for f in self.features],
            dtype=float,
        ).reshape(len(self), len(CONTINUOUS_FEATURES))

    @cached_property
    def y(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=float)

    @cached_property
    def is_proxy(self) -> np.ndarray:
        return np.array([r.provenance is Provenance.PROXY for r in self.records])

    @cached_property
    def industry(self) -> np.ndarray:
        return np.array([f.industry for f in self.features], dtype=object)

    @cached_property
    def filing_district(self) -> np.ndarray:
        return np.array([f.filing_district for f in self.features], dtype=object)

    @cached_property
    def chapter11(self) -> np.ndarray:
        return np.array([f.chapter11 for f in self.features], dtype=bool)

    @cached_property
    def assets(self) -> np.ndarray:
        return np.exp(self.X[:, CONTINUOUS_FEATURES.index("log_assets")])

    def column(self, name: str) -> np.ndarray:
        if name in CONTINUOUS_FEATURES:
            return self.X[:, CONTINUOUS_FEATURES.index(name)]
        if name in CATEGORICAL_FEATURES:
            return getattr(self, name)
        raise SchemaError(f"unknown feature {name!r}")

    def firm_ids(self) -> list:
        return [r.firm_id for r in self.records]


FILTER_STAGES = ("public", "min_assets", "complete")


def apply_filters(
    raw: Iterable[FirmRecord], min_assets: float = DEFAULT_MIN_ASSETS
) -> tuple:
    """Apply the sample selection in order and return ``(dataset, counts)``.

    ``counts`` maps each stage name in ``FILTER_STAGES`` to the number of
    records surviving through that stage.
    """
    kept = list(raw)
    counts = {}
    kept = [r for r in kept if r.is_public]
    counts["public"] = len(kept)
    kept = [r for r in kept if r.total_assets is not None and r.total_assets > min_assets]
    counts["min_assets"] = len(kept)
    kept = [r for r in kept if r.is_complete()]
    counts["complete"] = len(kept)
    if not kept:
        raise EmptyDatasetError(f"no records survive the filters (stage counts {counts})")
    return Dataset.from_records(kept), counts


# -- CSV ingestion ---------------------------------------------------------

REQUIRED_COLUMNS = (
    "firm_id",
    "total_assets",
    "total_liabilities",
    "total_debt",
    "total_equity",
    "current_assets",
    "current_liabilities",
    "cash",
    "industry",
    "filing_district",
    "chapter11",
    "is_public",
)
OPTIONAL_COLUMNS = ("provenance", "recovered", "outstanding", "lgd")
CSV_COLUMNS = REQUIRED_COLUMNS + OPTIONAL_COLUMNS

_TRUE_STRINGS = {"1", "true", "t", "yes", "y"}
_FALSE_STRINGS = {"0", "false", "f", "no", "n"}


def _parse_float(text: Optional[str], row: int, column: str) -> Optional[float]:
    if text is None or text.strip() == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise RowValidationError(row, f"column {column!r}: cannot parse {text!r} as a number")


def _parse_bool(text: Optional[str], row: int, column: str) -> bool:
    value = (text or "").strip().lower()
    if value in _TRUE_STRINGS:
        return True
    if value in _FALSE_STRINGS:
        return False
    raise RowValidationError(row, f"column {column!r}: cannot parse {text!r} as a boolean")


def _row_to_record(values: Mapping[str, Optional[str]], row: int) -> FirmRecord:
    num = {c: _parse_float(values.get(c), row, c) for c in REQUIRED_FINANCIALS}
    recovered = _parse_float(values.get("recovered"), row, "recovered")
    outstanding = _parse_float(values.get("outstanding"), row, "outstanding")
    lgd = _parse_float(values.get("lgd"), row, "lgd")

    prov_text = (values.get("provenance") or "").strip()
    if prov_text:
        try:
            provenance = Provenance(prov_text)
        except ValueError:
            raise RowValidationError(row, f"unknown provenance {prov_text!r}")
    elif recovered is not None and outstanding is not None:
        provenance = Provenance.TRUE_OUTCOME
    else:
        provenance = Provenance.PROXY

    try:
        if lgd is None:
            if provenance is Provenance.TRUE_OUTCOME:
                if recovered is None or outstanding is None:
                    raise RowValidationError(row, "TrueOutcome row lacks recovered/outstanding")
                lgd = lgd_true(recovered, outstanding)
            else:
                if num["total_assets"] is None or num["total_liabilities"] is None:
                    raise RowValidationError(row, "cannot build proxy LGD without assets and liabilities")
                lgd = lgd_proxy(num["total_assets"], num["total_liabilities"])
        return FirmRecord(
            firm_id=(values.get("firm_id") or "").strip(),
            industry=(values.get("industry") or "").strip(),
            filing_district=(values.get("filing_district") or "").strip(),
            chapter11=_parse_bool(values.get("chapter11"), row, "chapter11"),
            is_public=_parse_bool(values.get("is_public"), row, "is_public"),
            provenance=provenance,
            lgd=lgd,
            recovered=recovered,
            outstanding=outstanding,
            **num,
        )
    except InvalidInputError as exc:
        raise RowValidationError(row, str(exc)) from exc


def load_dataset(path, schema: Optional[Mapping[str, str]] = None) -> list:
    """Read a CSV of firm records.

    Parameters
    ----------
    path : str or Path
        UTF-8 CSV with a header row.
    schema : mapping, optional
        Record field name -> CSV column name.  Unmapped fields use their own
        name.  ``lgd`` and ``provenance`` may be absent from the file, in
        which case labels are rebuilt from the financial columns.

    Returns
    -------
    list of FirmRecord

    Raises
    ------
    FileNotFoundError, SchemaError, RowValidationError
        Row numbers in errors are 1-based data rows (header excluded).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    schema = dict(schema or {})
    unknown = set(schema) - set(CSV_COLUMNS)
    if unknown:
        raise SchemaError(f"schema maps unknown fields: {sorted(unknown)}")
    column_of = {f: schema.get(f, f) for f in CSV_COLUMNS}

    records = []
    seen = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for f in REQUIRED_COLUMNS:
            if column_of[f] not in header:
                raise SchemaError(f"missing required column {column_of[f]!r}")
        present = {f: column_of[f] for f in CSV_COLUMNS if column_of[f] in header}
        for i, raw in enumerate(reader, start=1):
            values = {f: raw.get(col) for f, col in present.items()}
            record = _row_to_record(values, i)
            if not record.firm_id:
                raise RowValidationError(i, "empty firm_id")
            if record.firm_id in seen:
                raise RowValidationError(i, f"duplicate firm_id {record.firm_id!r}")
            seen.add(record.firm_id)
            records.append(record)
    return records


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Provenance):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_dataset(records: Iterable[FirmRecord], path) -> None:
    """Write records as CSV in the default column layout (floats round-trip exactly)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([_format(getattr(r, c)) for c in CSV_COLUMNS])
