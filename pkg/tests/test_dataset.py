import csv
import math
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infolgd.dataset import (
    CSV_COLUMNS,
    DEBT_TO_EQUITY_CAP,
    DataQualityWarning,
    Dataset,
    EmptyDatasetError,
    InvalidInputError,
    Provenance,
    RowValidationError,
    SchemaError,
    apply_filters,
    build_features,
    lgd_proxy,
    lgd_true,
    load_dataset,
    write_dataset,
)

from conftest import make_record


# -- labels ----------------------------------------------------------------


@pytest.mark.parametrize(
    "recovered, outstanding, expected",
    [(100, 100, 0.0), (0, 100, 1.0), (25, 100, 0.75)],
)
def test_lgd_true_examples(recovered, outstanding, expected):
    assert lgd_true(recovered, outstanding) == pytest.approx(expected, abs=1e-15)


def test_lgd_true_over_recovery_clamps_with_warning():
    with pytest.warns(DataQualityWarning):
        assert lgd_true(120, 100) == 0.0


@pytest.mark.parametrize("outstanding", [0, -5])
def test_lgd_true_rejects_nonpositive_outstanding(outstanding):
    with pytest.raises(InvalidInputError):
        lgd_true(10, outstanding)


@pytest.mark.parametrize(
    "assets, liabilities, expected",
    [(120, 100, 0.0), (0, 100, 1.0), (40, 100, 0.6)],
)
def test_lgd_proxy_examples(assets, liabilities, expected):
    assert lgd_proxy(assets, liabilities) == pytest.approx(expected, abs=1e-15)


def test_lgd_proxy_rejects_nonpositive_liabilities():
    with pytest.raises(InvalidInputError):
        lgd_proxy(10, 0)


@given(
    st.floats(min_value=0, max_value=1e12, allow_nan=False),
    st.floats(min_value=1e-3, max_value=1e12, allow_nan=False),
)
def test_lgd_proxy_complements_coverage_ratio(a, l):
    assert lgd_proxy(a, l) + min(a / l, 1.0) == pytest.approx(1.0, abs=1e-15)


# -- records ---------------------------------------------------------------


def test_record_rejects_lgd_outside_unit_interval():
    with pytest.raises(InvalidInputError):
        make_record(lgd=1.2)


def test_true_outcome_record_needs_recovery_fields():
    from infolgd.dataset import FirmRecord

    with pytest.raises(InvalidInputError):
        FirmRecord("x", 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, "A", "D", True, True,
                   Provenance.TRUE_OUTCOME, 0.5)


def test_negative_assets_rejected():
    with pytest.raises(InvalidInputError):
        make_record(assets=-1.0)


# -- filters ---------------------------------------------------------------


def _roster():
    """10 records: 3 private, 2 small, 1 incomplete, 4 clean."""
    recs = []
    for i in range(3):
        recs.append(make_record(i, public=False))
    recs.append(make_record(3, assets=50e6, liabilities=40e6))
    recs.append(make_record(4, assets=99e6, liabilities=40e6))
    recs.append(make_record(5, cash=None))
    for i in range(6, 10):
        recs.append(make_record(i))
    return recs


def test_filter_roster_stage_counts():
    data, counts = apply_filters(_roster())
    assert len(data) == 4
    assert (counts["public"], counts["min_assets"], counts["complete"]) == (7, 5, 4)


def test_small_firm_excluded_at_asset_stage():
    _, counts = apply_filters([make_record(0, assets=50e6, liabilities=1e6), make_record(1)])
    assert counts["public"] == 2 and counts["min_assets"] == 1


def test_clean_record_retained():
    data, _ = apply_filters([make_record(0)])
    assert data.firm_ids() == ["F0000"]


def test_filters_empty_result_raises():
    with pytest.raises(EmptyDatasetError):
        apply_filters([make_record(0, public=False)])


def test_filters_idempotent():
    once, _ = apply_filters(_roster())
    twice, counts = apply_filters(once.records)
    assert twice.firm_ids() == once.firm_ids()
    assert set(counts.values()) == {len(once)}


def test_asset_threshold_is_strict():
    _, counts = apply_filters([make_record(0, assets=100e6, liabilities=1e6), make_record(1)])
    assert counts["min_assets"] == 1


# -- features --------------------------------------------------------------


def test_debt_to_assets_ratio():
    f = build_features(make_record(assets=100.0, liabilities=80.0, debt=50.0))
    assert f.debt_to_assets == 0.5


def test_log_assets_of_one_is_zero():
    f = build_features(make_record(assets=1.0, liabilities=0.5, debt=0.2))
    assert f.log_assets == 0.0
    assert f.log_liabilities == pytest.approx(math.log(0.5))


def test_zero_equity_caps_debt_to_equity():
    f = build_features(make_record(assets=100.0, liabilities=100.0, debt=10.0, equity=0.0))
    assert f.debt_to_equity == DEBT_TO_EQUITY_CAP


def test_negative_zero_equity_cap_keeps_sign_of_debt():
    f = build_features(make_record(assets=100.0, liabilities=100.0, debt=-10.0, equity=0.0))
    assert f.debt_to_equity == -DEBT_TO_EQUITY_CAP


def test_zero_current_liabilities_caps_current_ratio():
    f = build_features(make_record(current_liabilities=0.0))
    assert f.current_ratio == 1000.0


def test_build_features_rejects_incomplete():
    with pytest.raises(SchemaError):
        build_features(make_record(cash=None))


@settings(max_examples=50)
@given(
    st.floats(1e8, 1e12), st.floats(0.01, 2.0), st.floats(-1e11, 1e11),
    st.floats(0, 1e11), st.floats(0, 1e11),
)
def test_build_features_total_and_deterministic(assets, lev, equity, ca, cl):
    r = make_record(assets=assets, liabilities=assets * lev, debt=assets * lev * 0.8,
                    equity=equity, current_assets=ca, current_liabilities=cl)
    f1, f2 = build_features(r), build_features(r)
    assert f1 == f2
    assert all(math.isfinite(v) for v in f1.continuous())


# -- dataset ---------------------------------------------------------------


def test_mixture_proportion_matches_records():
    recs = [make_record(i, proxy=i % 4 != 0) for i in range(12)]
    data = Dataset.from_records(recs)
    assert data.mixture_proportion == sum(r.provenance is Provenance.PROXY for r in recs) / 12
    sub = data.subset([0, 1, 2, 3])
    assert sub.mixture_proportion == 0.75


def test_empty_dataset_rejected():
    with pytest.raises(EmptyDatasetError):
        Dataset.from_records([])


# -- CSV -------------------------------------------------------------------


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _row(fid="A1", lgd="0.3", **over):
    base = {
        "firm_id": fid, "total_assets": "2e8", "total_liabilities": "1.5e8", "total_debt": "1e8",
        "total_equity": "5e7", "current_assets": "5e7", "current_liabilities": "4e7", "cash": "1e7",
        "industry": "A", "filing_district": "D1", "chapter11": "true", "is_public": "true",
        "provenance": "Proxy", "recovered": "", "outstanding": "", "lgd": lgd,
    }
    base.update(over)
    return base


def test_load_three_rows(tmp_path):
    p = tmp_path / "d.csv"
    rows = [_row(f"A{i}") for i in range(3)]
    _write_rows(p, list(rows[0]), [list(r.values()) for r in rows])
    recs = load_dataset(p)
    assert [r.firm_id for r in recs] == ["A0", "A1", "A2"]


def test_missing_column_named(tmp_path):
    p = tmp_path / "d.csv"
    r = _row()
    del r["cash"]
    _write_rows(p, list(r), [list(r.values())])
    with pytest.raises(SchemaError, match="cash"):
        load_dataset(p)


def test_lgd_out_of_range_is_row_error(tmp_path):
    p = tmp_path / "d.csv"
    rows = [_row("A0"), _row("A1", lgd="1.2")]
    _write_rows(p, list(rows[0]), [list(r.values()) for r in rows])
    with pytest.raises(RowValidationError) as err:
        load_dataset(p)
    assert err.value.row == 2


def test_unparseable_numeric_reports_row(tmp_path):
    p = tmp_path / "d.csv"
    rows = [_row("A0", total_debt="lots")]
    _write_rows(p, list(rows[0]), [list(r.values()) for r in rows])
    with pytest.raises(RowValidationError, match="total_debt") as err:
        load_dataset(p)
    assert err.value.row == 1


def test_duplicate_firm_id(tmp_path):
    p = tmp_path / "d.csv"
    rows = [_row("A0"), _row("A0")]
    _write_rows(p, list(rows[0]), [list(r.values()) for r in rows])
    with pytest.raises(RowValidationError, match="duplicate"):
        load_dataset(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "nope.csv")


def test_labels_rebuilt_when_lgd_absent(tmp_path):
    p = tmp_path / "d.csv"
    rows = [
        _row("P", total_assets="1.2e8", total_liabilities="2e8"),
        _row("T", provenance="TrueOutcome", recovered="30", outstanding="120"),
    ]
    for r in rows:
        del r["lgd"]
    _write_rows(p, list(rows[0]), [list(r.values()) for r in rows])
    recs = load_dataset(p)
    assert recs[0].lgd == pytest.approx(0.4)
    assert recs[1].lgd == pytest.approx(0.75)
    assert recs[1].provenance is Provenance.TRUE_OUTCOME


def test_schema_mapping(tmp_path):
    p = tmp_path / "d.csv"
    r = _row()
    r["TA"] = r.pop("total_assets")
    _write_rows(p, list(r), [list(r.values())])
    recs = load_dataset(p, schema={"total_assets": "TA"})
    assert recs[0].total_assets == 2e8


def test_write_then_load_round_trip(tmp_path):
    recs = [make_record(i, proxy=i % 3 != 0, lgd=i / 7, assets=1e8 + i * 1234.5678) for i in range(7)]
    p = tmp_path / "rt.csv"
    write_dataset(recs, p)
    back = load_dataset(p)
    assert back == recs
    with open(p) as fh:
        assert fh.readline().strip().split(",") == list(CSV_COLUMNS)


def test_load_does_not_modify_file(tmp_path):
    recs = [make_record(i) for i in range(3)]
    p = tmp_path / "d.csv"
    write_dataset(recs, p)
    before = p.read_bytes()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        load_dataset(p)
    assert p.read_bytes() == before
