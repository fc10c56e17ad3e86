import numpy as np
import pytest

from infolgd.dataset import Dataset, FeatureVector, FirmRecord, Provenance


def make_record(i=0, *, assets=2e8, liabilities=1.5e8, debt=1e8, equity=None,
                current_assets=5e7, current_liabilities=4e7, cash=1e7, industry="A",
                district="D1", chapter11=True, public=True, proxy=True, lgd=0.5):
    if equity is None and assets is not None and liabilities is not None:
        equity = assets - liabilities
    return FirmRecord(
        firm_id=f"F{i:04d}",
        total_assets=assets,
        total_liabilities=liabilities,
        total_debt=debt,
        total_equity=equity,
        current_assets=current_assets,
        current_liabilities=current_liabilities,
        cash=cash,
        industry=industry,
        filing_district=district,
        chapter11=chapter11,
        is_public=public,
        provenance=Provenance.PROXY if proxy else Provenance.TRUE_OUTCOME,
        lgd=lgd,
        recovered=None if proxy else (1 - lgd) * liabilities,
        outstanding=None if proxy else liabilities,
    )


def make_features(*, dta=0.5, dte=1.0, cr=1.0, cta=0.1, log_assets=20.0, log_liabilities=19.0,
                  industry="A", district="D1", chapter11=True):
    return FeatureVector(dta, dte, cr, cta, log_assets, log_liabilities, industry, district, chapter11)


def dataset_from_features(features, labels, proxy=None):
    """A Dataset whose feature rows are given directly (records are placeholders)."""
    n = len(features)
    proxy = [True] * n if proxy is None else list(proxy)
    records = tuple(make_record(i, proxy=p, lgd=float(y)) for i, (p, y) in enumerate(zip(proxy, labels)))
    return Dataset(records, tuple(features), tuple(float(y) for y in labels), sum(proxy) / n)


def toy_dataset(n=60, seed=0, n_industries=3, n_districts=3, noise=0.05, n_true=None):
    """Small random dataset with a leverage-driven label.

    With ``n_true`` the last ``n_true`` rows are true outcomes, otherwise
    provenance is drawn at random (about 80% proxy).
    """
    rng = np.random.default_rng(seed)
    feats, labels = [], []
    for i in range(n):
        dta = rng.uniform(0.2, 1.2)
        la = rng.normal(20, 1)
        feats.append(make_features(
            dta=dta, dte=rng.normal(2, 1), cr=rng.lognormal(0, 0.4), cta=rng.uniform(0, 0.2),
            log_assets=la, log_liabilities=la + np.log(dta) + rng.normal(0, 0.1),
            industry=f"I{rng.integers(n_industries)}", district=f"D{rng.integers(n_districts)}",
            chapter11=bool(rng.random() < 0.8),
        ))
        labels.append(float(np.clip(0.6 * dta - 0.1 + rng.normal(0, noise), 0, 1)))
    proxy = rng.random(n) < 0.8
    proxy[:2] = [True, False]
    if n_true is not None:
        proxy = np.arange(n) < n - n_true
    return dataset_from_features(feats, labels, proxy)


@pytest.fixture
def toy():
    return toy_dataset()


@pytest.fixture
def toy_strat():
    """60 rows, 50 proxy and 10 true: fold shares are exact for k = 5 or 10."""
    return toy_dataset(n_true=10)



# (criterion number, sub-part, line) per acceptance check, printed after the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for *_, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
