import math

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from sociallearn.errors import ConfigError, DomainError
from sociallearn.signals import (
    BoundedLinear,
    LinearUnbounded,
    Strength,
    Tabulated,
    from_text,
    parse_structure,
)

open_signal = st.floats(min_value=-0.999, max_value=0.999)
unit = st.floats(min_value=1e-6, max_value=1 - 1e-6)
slopes = st.floats(min_value=0.05, max_value=1.0)


def test_linear_pdf_values(lin):
    assert lin.pdf(1, 0.5) == pytest.approx(0.75, abs=1e-15)
    assert lin.pdf(0, 0.0) == pytest.approx(0.5, abs=1e-15)


def test_bounded_pdf_edge(half):
    assert half.pdf(1, 1 - 1e-12) == pytest.approx(0.75, abs=1e-9)


def test_linear_cdf_values(lin):
    assert lin.cdf(0, 0.0) == pytest.approx(0.75, abs=1e-15)
    assert lin.cdf(1, -0.6) == pytest.approx(0.04, abs=1e-15)
    for s in (lin, BoundedLinear(0.3)):
        assert s.cdf(0, 1.0) == pytest.approx(1.0, abs=1e-15)
        assert s.cdf(1, 1.0) == pytest.approx(1.0, abs=1e-15)
        assert s.cdf(0, -1.0) == 0.0


def test_cdf_matches_closed_form(lin):
    s = np.linspace(-1, 1, 41)
    np.testing.assert_allclose(lin.cdf(1, s), (1 + s) ** 2 / 4, atol=1e-14)
    np.testing.assert_allclose(lin.cdf(0, s), 0.5 * (s + 1) * (1.5 - s / 2), atol=1e-14)


def test_private_belief_values(lin, half):
    assert lin.private_belief(0.0) == pytest.approx(0.5)
    assert lin.private_belief(0.8) == pytest.approx(0.9)
    assert half.private_belief(1 - 1e-12) == pytest.approx(0.75, abs=1e-9)


def test_sample_signal_values(lin):
    assert lin.ppf(0, 0.75) == pytest.approx(0.0, abs=1e-14)
    assert lin.ppf(1, 0.25) == pytest.approx(0.0, abs=1e-14)
    s = lin.ppf(0, 0.5)
    assert lin.cdf(0, s) == pytest.approx(0.5, abs=1e-14)


def test_signals_outside_support_rejected(lin):
    with pytest.raises(DomainError):
        lin.pdf(0, 1.5)
    with pytest.raises(DomainError):
        lin.ppf(0, 0.0)
    with pytest.raises(DomainError):
        lin.pdf(2, 0.0)


def test_classify_linear(lin):
    r = lin.classify(0.1)
    assert r.strength is Strength.STRONG
    assert r.s_star == pytest.approx(0.8, abs=1e-12)
    assert r.s_lower_star == pytest.approx(-0.8, abs=1e-12)
    assert lin.private_belief(r.s_star) == pytest.approx(0.9, abs=1e-12)
    z = lin.classify(0.0)
    assert not z.bounded and z.strength is Strength.NOT_APPLICABLE and z.s_star == 1.0


def test_classify_bounded(half):
    r = half.classify(0.3)
    assert (r.beta_lower, r.beta_upper) == pytest.approx((0.25, 0.75))
    assert r.strong and r.s_star == pytest.approx(0.8, abs=1e-12)
    assert half.classify(0.4).s_star == pytest.approx(0.4, abs=1e-12)
    assert BoundedLinear(0.2).classify(0.45).strong
    assert BoundedLinear(0.1).classify(0.48).s_star == pytest.approx(0.4, abs=1e-12)
    # 1 - c above the belief ceiling: weak
    assert BoundedLinear(0.1).classify(0.4).strength is Strength.WEAK
    assert half.classify(0.0).strength is Strength.WEAK


def test_classify_rejects_bad_cost(lin):
    with pytest.raises(ConfigError):
        lin.classify(0.5)
    with pytest.raises(ConfigError):
        lin.classify(-0.1)


def test_validate_linear(lin):
    assert lin.validate(1001).ok


def test_validate_flat_ratio_fails():
    g = np.linspace(-1, 1, 5)
    rep = Tabulated(g, np.ones(5), np.ones(5)).validate(101)
    assert not rep.mlrp
    g = np.linspace(-1, 1, 103)
    assert rep.first_violation["mlrp"] == pytest.approx((g[1], g[2]))


def test_validate_asymmetric_fails():
    g = np.linspace(-1, 1, 5)
    f0 = np.array([2.0, 1.5, 1.0, 0.6, 0.4])
    f1 = np.array([0.3, 0.6, 1.0, 1.4, 1.9])
    rep = Tabulated(g, f0, f1).validate(101)
    assert rep.mlrp and not rep.symmetry


def test_tabulated_symmetric_matches_linear(lin):
    g = np.linspace(-1, 1, 11)
    tab = Tabulated(g, (1 - g) / 2, (1 + g) / 2)
    assert tab.symmetric
    s = np.linspace(-0.95, 0.95, 39)
    np.testing.assert_allclose(tab.cdf(0, s), lin.cdf(0, s), atol=1e-14)
    assert tab.classify(0.1).s_star == pytest.approx(0.8, abs=1e-10)


def test_text_round_trip(tmp_path, lin, half):
    for s in (lin, half):
        assert from_text(s.to_text()) == s
    g = np.linspace(-1, 1, 7)
    tab = Tabulated(g, 1.2 - 0.5 * g, 1.2 + 0.5 * g)
    p = tmp_path / "t.txt"
    p.write_text(tab.to_text())
    back = parse_structure("tabulated:t.txt", tmp_path)
    np.testing.assert_allclose(back.density.f1, tab.density.f1, rtol=1e-15)
    assert parse_structure("bounded:0.5") == half
    assert parse_structure("linear") == lin


@pytest.mark.parametrize("bad", ["cubic", "bounded:x", "bounded:1.5", "bounded:nan", "tabulated:/nope/none.txt"])
def test_parse_structure_errors(bad):
    with pytest.raises(ConfigError):
        parse_structure(bad)


def test_from_text_errors():
    with pytest.raises(ConfigError):
        from_text("family = bounded\n")
    with pytest.raises(ConfigError):
        from_text("-1 1\n1 1\n")
    with pytest.raises(ConfigError):
        from_text("0 1 1\n1 1 1\n")  # grid must start at -1


@given(open_signal, slopes)
def test_belief_symmetry(s, lam):
    st_ = BoundedLinear(lam)
    assert st_.private_belief(s) + st_.private_belief(-s) == pytest.approx(1.0, abs=1e-12)


@given(unit, slopes, st.sampled_from([0, 1]))
def test_quantile_round_trip(u, lam, state):
    s = BoundedLinear(lam)
    assert s.cdf(state, s.ppf(state, u)) == pytest.approx(u, abs=1e-10)


@given(slopes)
@settings(max_examples=30)
def test_ratio_increasing_on_grid(lam):
    s = BoundedLinear(lam)
    x = np.linspace(-0.999, 0.999, 1001)
    assert np.all(np.diff(s.pdf(1, x) / s.pdf(0, x)) > 0)


@given(st.floats(min_value=0.001, max_value=0.49), st.floats(min_value=0.001, max_value=0.49))
def test_s_star_decreasing_in_cost(a, b):
    lin = LinearUnbounded()
    if a == b:
        return
    lo, hi = sorted((a, b))
    sa, sb = lin.classify(lo).s_star, lin.classify(hi).s_star
    assert sa > sb
    assert sa == pytest.approx(1 - 2 * lo, abs=1e-12)


@given(st.floats(min_value=1e-4, max_value=0.49))
def test_unbounded_always_strong(c):
    assert LinearUnbounded().classify(c).strong


@given(st.floats(min_value=-30, max_value=30), slopes)
@example(21.0, 1.0)
def test_threshold_inverts_llr(lam_obs, slope):
    s = BoundedLinear(slope)
    t = s.threshold(lam_obs)
    if -1.0 < t < 1.0:
        # near +-1 one ulp of t moves the llr by far more than 1e-9, so bracket the root instead
        lo_t, hi_t = t, t
        for _ in range(4):
            lo_t, hi_t = np.nextafter(lo_t, -1.0), np.nextafter(hi_t, 1.0)
        assert s.llr(lo_t) - 1e-9 <= -lam_obs <= s.llr(hi_t) + 1e-9
    else:
        # no interior root: the signal never overturns the observation
        lo, hi = s.llr(-1 + 1e-12), s.llr(1 - 1e-12)
        assert (-lam_obs <= lo + 1e-9) or (-lam_obs >= hi - 1e-9)
        assert math.copysign(1.0, t) == (-1.0 if lam_obs > 0 else 1.0)
