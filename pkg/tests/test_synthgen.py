import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from infolgd.dataset import Provenance, apply_filters, build_features
from infolgd.synthgen import (
    DEFAULT_PROXY_LEVERAGE_LINK,
    ComponentSpec,
    MixtureConfig,
    calibrate_leverage_link,
    decoupled_config,
    default_paper_config,
    generate,
    pooled_leverage_mi,
    severity_config,
)


def test_default_values():
    cfg = default_paper_config()
    assert cfg.n == 1218
    assert cfg.pi_proxy == 0.897
    assert cfg.true_component.lgd_mode == 0.95
    assert cfg.proxy_component.lgd_mode == 0.08
    assert cfg.proxy_component.size_link == 0.0 and cfg.true_component.size_link == 0.0


def test_all_proxy():
    data = generate(replace(default_paper_config(), pi_proxy=1.0, n=200))
    assert all(r.provenance is Provenance.PROXY for r in data.records)
    assert data.mixture_proportion == 1.0


def test_no_proxy():
    data = generate(replace(default_paper_config(), pi_proxy=0.0, n=50))
    assert all(r.provenance is Provenance.TRUE_OUTCOME for r in data.records)


def test_same_seed_identical():
    a = generate(default_paper_config(seed=7, n=300))
    b = generate(default_paper_config(seed=7, n=300))
    assert a.records == b.records
    assert np.array_equal(a.y, b.y)
    c = generate(default_paper_config(seed=8, n=300))
    assert not np.array_equal(a.y, c.y)


def test_realized_share_at_ten_thousand():
    data = generate(default_paper_config(n=10000))
    assert abs(data.mixture_proportion - 0.897) <= 0.01


@pytest.mark.parametrize("n", [1000, 10000, 100000])
def test_share_binomial_concentration(n):
    # within 4 binomial standard errors
    data = generate(replace(default_paper_config(seed=3), n=n))
    se = math.sqrt(0.897 * 0.103 / n)
    assert abs(data.mixture_proportion - 0.897) < 4 * se


def test_pooled_leverage_mi_in_band():
    mi = pooled_leverage_mi(generate(default_paper_config()))
    assert 1.2 <= mi <= 1.8


def test_components_differ():
    data = generate(default_paper_config())
    proxy = np.array([r.provenance is Provenance.PROXY for r in data.records])
    assert ks_2samp(data.y[proxy], data.y[~proxy]).statistic > 0.5


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**63), st.floats(0, 1))
def test_labels_and_features_valid(seed, pi):
    data = generate(replace(default_paper_config(seed=seed, n=60), pi_proxy=pi))
    assert ((data.y >= 0) & (data.y <= 1)).all()
    assert np.isfinite(data.X).all()
    assert len(data) == 60


def test_records_pass_sample_filters():
    data = generate(default_paper_config(n=200))
    kept, counts = apply_filters(data.records)
    assert len(kept) == 200
    assert all(build_features(r) == f for r, f in zip(data.records, data.features))


def test_true_outcome_records_carry_recovery():
    data = generate(default_paper_config(n=200))
    for r in data.records:
        if r.provenance is Provenance.TRUE_OUTCOME:
            assert r.lgd == pytest.approx(1 - r.recovered / r.outstanding, abs=1e-9)


def test_config_json_round_trip():
    cfg = decoupled_config(seed=5)
    back = MixtureConfig.from_dict(json.loads(cfg.to_json()))
    assert back == cfg
    assert generate(replace(back, n=40)).records == generate(replace(cfg, n=40)).records


@pytest.mark.parametrize("bad", [dict(n=5), dict(pi_proxy=1.2), dict(seed=-1), dict(seed=2**64)])
def test_invalid_config(bad):
    with pytest.raises(ValueError):
        replace(default_paper_config(), **bad)


@pytest.mark.parametrize("bad", [dict(lgd_mode=1.5), dict(lgd_concentration=0.0), dict(noise_sd=0.0)])
def test_invalid_component(bad):
    with pytest.raises(ValueError):
        ComponentSpec(**{"lgd_mode": 0.5, "lgd_concentration": 2.0, **bad})


def test_calibration_reproduces_frozen_link():
    link = calibrate_leverage_link(default_paper_config(), lo=0.3, hi=1.2)
    assert link == pytest.approx(DEFAULT_PROXY_LEVERAGE_LINK, abs=2e-3)


def test_severity_config_only_changes_share():
    a, b = severity_config(0.5), severity_config(0.95)
    assert a.true_component == b.true_component
    assert a.proxy_component == b.proxy_component
    assert a.proxy_component.leverage_link == 0.0
    assert (a.pi_proxy, b.pi_proxy) == (0.5, 0.95)


def test_exact_share_gives_exact_counts():
    data = generate(replace(default_paper_config(seed=4), exact_share=True))
    assert sum(r.provenance is Provenance.PROXY for r in data.records) == round(0.897 * 1218)
    assert MixtureConfig.from_dict(json.loads(replace(default_paper_config(), exact_share=True).to_json())).exact_share


def test_bernoulli_stream_unchanged_by_option():
    a = generate(default_paper_config(seed=6, n=100))
    b = generate(replace(default_paper_config(seed=6, n=100), exact_share=False))
    assert a.records == b.records
