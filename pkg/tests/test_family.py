import math

import numpy as np
import pytest
from scipy import integrate as sci
from scipy.special import erf, fresnel

from isospec.errors import (DomainError, ForbiddenIntervalError, InfiniteGammaError,
                            NonNormalizableError, PeakError, SingularityError, UndefinedError)
from isospec.family import (SuperpotentialFamily, SuperpotentialSpec, gamma_from_initial_condition,
                            normalization_constant, partner_potentials, phi_particular)
from isospec.presets import PRESETS, constant_preset, get_preset

SQRT_PI = math.sqrt(math.pi)


def spec(name):
    return PRESETS[name].spec()


# -- particular solution and partners ---------------------------------------------

def test_phi_particular_examples():
    assert phi_particular(spec("harmonic"), 2.0) == 2.0
    assert phi_particular(spec("constant"), 3.7) == 1.0
    assert phi_particular(spec("quartic"), 0.0) == 0.0


def test_literal_harmonic_composition_is_abs():
    literal = SuperpotentialSpec.from_sources("sqrt(u)", "x^2")
    assert literal.phi(-2.0) == 2.0  # |x|, the reason the preset carries a branch
    assert spec("harmonic").phi(-2.0) == -2.0
    with pytest.raises(DomainError) as info:
        literal.phi_prime(0.0)
    assert info.value.x == 0.0


@pytest.mark.parametrize("name, x, expected", [
    ("harmonic", 1.0, (0.0, 2.0)),
    ("quartic", 0.0, (2.0, -2.0)),
    ("case1a", 0.0, (1.0, 1.0)),
])
def test_partner_examples(name, x, expected):
    v1, v2 = partner_potentials(spec(name), x)
    assert (v1, v2) == pytest.approx(expected, abs=1e-15)


def test_partners_match_printed_forms():
    x = np.linspace(-3, 3, 61)
    v1, v2 = partner_potentials(spec("quartic"), x)
    base = (x * (x - 2)) ** 2
    assert np.allclose(v2, base + 2 * x - 2, atol=1e-12)
    assert np.allclose(v1, base - 2 * x + 2, atol=1e-12)
    v1, v2 = partner_potentials(spec("case1a"), x)
    s = np.sqrt(x * x + 1)
    assert np.allclose(v2, x * x + 1 + x / s, atol=1e-12)
    assert np.allclose(v1, x * x + 1 - x / s, atol=1e-12)
    v1, v2 = partner_potentials(spec("fresnel"), x)
    assert np.allclose(v2, np.sin(x * x) ** 2 + 2 * x * np.cos(x * x), atol=1e-12)
    assert np.allclose(v1, np.sin(x * x) ** 2 - 2 * x * np.cos(x * x), atol=1e-12)
    v1, v2 = partner_potentials(constant_preset(2.5).spec(), x)
    assert np.allclose(v1, 6.25) and np.allclose(v2, 6.25)


# -- integrating factor ------------------------------------------------------------

def test_integrating_factor_examples(families):
    assert families["harmonic"].mu(1.0) == pytest.approx(math.exp(-1), abs=1e-10)
    assert families["quartic"].mu(3.0) == pytest.approx(1.0, abs=1e-10)
    x = np.linspace(-10, 10, 41)
    assert np.allclose(families["constant"].mu(x), np.exp(-2 * x), rtol=1e-10, atol=0)


def test_integrating_factor_closed_forms(families):
    x = np.linspace(-4, 4, 81)
    s = np.sqrt(x * x + 1)
    assert np.allclose(families["case1a"].mu(x), np.exp(-x * s) / (x + s), rtol=1e-10, atol=0)
    x = np.linspace(-2, 8, 101)
    S, _ = fresnel(np.sqrt(2 / np.pi) * x)
    assert np.allclose(families["fresnel"].mu(x), np.exp(-np.sqrt(2 * np.pi) * S), rtol=1e-9, atol=0)
    x = np.linspace(-4, 8, 121)
    assert np.allclose(families["quartic"].mu(x), np.exp(-(2 / 3) * x * x * (x - 3)), rtol=1e-10, atol=0)


def test_mu_at_zero_is_one(families):
    for fam in families.values():
        assert fam.mu(0.0) == 1.0


# -- general solution ----------------------------------------------------------------

@pytest.mark.parametrize("name", list(PRESETS))
def test_phi_general_at_zero(families, name):
    fam = families[name]
    for g in (-7.0, 3.0):
        m = fam.member(g)
        if m.singularity() is not None and abs(m.singularity()) < 1e-12:
            continue
        assert m.phi_general(0.0) == pytest.approx(fam.spec.phi(0.0) + 1 / g, abs=1e-15)


def test_phi_general_large_gamma(families):
    x = np.linspace(-6, 6, 121)
    assert np.max(np.abs(families["harmonic"].member(1e12).phi_general(x) - x)) <= 1e-10


def test_phi_general_constant_example(families):
    assert families["constant"].member(-2.0).phi_general(0.0) == pytest.approx(0.5, abs=1e-15)


def test_harmonic_family_matches_erf_form(families):
    m = families["harmonic"].member(4.0)
    x = np.linspace(-6, 6, 241)
    d = 4.0 + SQRT_PI / 2 * erf(x)
    printed = x * x - 1 + 4 * x * np.exp(-x * x) / d + 2 * np.exp(-2 * x * x) / d ** 2
    assert np.max(np.abs(m.parametric_potential(x) - printed)) <= 1e-9
    assert np.max(np.abs(m.zero_mode(x) - np.exp(-x * x / 2) / d)) <= 1e-10
    assert m.parametric_potential(0.0) == pytest.approx(-0.875, abs=1e-14)
    assert m.zero_mode(0.0) == 0.25


def test_quartic_family_matches_printed_form(families):
    g = -37.0
    m = families["quartic"].member(g)
    x = np.linspace(-4, 8, 49)
    mu = np.exp(-(2 / 3) * x * x * (x - 3))
    Gam = np.array([sci.quad(lambda t: np.exp(-(2 / 3) * t * t * (t - 3)), 0, v,
                             epsabs=1e-13, epsrel=1e-13, limit=200)[0] for v in x])
    d = g + Gam
    printed = (x * (x - 2)) ** 2 - 2 * x + 2 + 4 * mu * (x * x - 2 * x) / d + 2 * mu * mu / d ** 2
    assert np.max(np.abs(m.parametric_potential(x) - printed) / (1 + np.abs(printed))) <= 1e-9


def test_case1a_family_matches_printed_form(families):
    g = -2.0
    m = families["case1a"].member(g)
    x = np.linspace(-4, 4, 33)
    s = np.sqrt(x * x + 1)
    mu_f = lambda t: np.exp(-t * np.sqrt(t * t + 1)) / (t + np.sqrt(t * t + 1))
    Gam = np.array([sci.quad(mu_f, 0, v, epsabs=1e-13, epsrel=1e-13)[0] for v in x])
    d = (x + s) * (g + Gam)
    printed = x * x + 1 - x / s + 4 * s * np.exp(-x * s) / d + 2 * np.exp(-2 * x * s) / d ** 2
    assert np.max(np.abs(m.parametric_potential(x) - printed) / (1 + np.abs(printed))) <= 1e-9


def test_constant_family_matches_printed_form_with_shifted_gamma(families):
    # the printed closed form measures gamma with Gamma(x) = -exp(-2cx)/(2c)
    g = -3.0
    m = families["constant"].member(g)
    x = np.linspace(-3, 10, 53)
    d = (g + 0.5) * np.exp(2 * x) - 0.5
    printed = 1 + 4 / d + 2 / d ** 2
    assert np.allclose(m.parametric_potential(x), printed, rtol=1e-9, atol=1e-12)
    assert np.allclose(m.zero_mode(x), np.exp(-x) / ((g + 0.5) - 0.5 * np.exp(-2 * x)), rtol=1e-9)


def test_constant_singularity(families):
    m = families["constant"].member(1.0)
    root = -math.log(3) / 2  # 1 + (1 - e^{-2x})/2 = 0
    assert m.singularity() == pytest.approx(root, abs=1e-10)
    with pytest.raises(SingularityError) as info:
        m.parametric_potential(m.singularity())
    assert info.value.x == pytest.approx(root, abs=1e-10)
    assert info.value.gamma == 1.0


def test_large_gamma_recovers_nonparametric(families):
    fam = families["harmonic"]
    x = np.linspace(-6, 6, 241)
    v1, _ = partner_potentials(fam.spec, x)
    m = fam.member(1e12)
    assert np.max(np.abs(m.parametric_potential(x) - v1)) <= 1e-8
    assert np.max(np.abs(1e12 * m.zero_mode(x) - np.sqrt(fam.mu(x)))) <= 1e-8
    inf = fam.member(math.inf)
    assert np.array_equal(inf.zero_mode(x), np.sqrt(fam.mu(x)))


def test_zero_mode_sign_follows_denominator(families):
    fam = families["harmonic"]
    x = np.linspace(-6, 6, 101)
    assert np.all(fam.member(2.0).zero_mode(x) > 0)
    assert np.all(fam.member(-2.0).zero_mode(x) < 0)


def test_normalization_identity(families):
    # int psi^2 = 1/(gamma + Gamma(a)) - 1/(gamma + Gamma(b)) exactly
    for name, g in (("harmonic", 2.0), ("quartic", -37.0), ("constant", -2.0), ("case1a", -1.0)):
        fam = families[name]
        a, b = fam.window
        exact = 1 / (g + fam.cumulative(a)) - 1 / (g + fam.cumulative(b))
        assert fam.member(g).norm() == pytest.approx(exact, rel=1e-8)


# -- regular ranges --------------------------------------------------------------------

def test_regular_range_harmonic(families):
    r = families["harmonic"].regular_range()
    assert len(r.regular_gammas) == 2
    (lo_a, hi_a), (lo_b, hi_b) = r.regular_gammas
    assert lo_a == -math.inf and hi_b == math.inf
    assert abs(-hi_a - 0.886227) <= 1e-5 and abs(lo_b - 0.886227) <= 1e-5
    assert r.is_regular(1.0) and r.is_regular(-1.0) and not r.is_regular(0.5)


def test_regular_range_case1a(families):
    r = families["case1a"].regular_range()
    assert r.left_limit.kind == "divergent"
    assert len(r.regular_gammas) == 1
    lo, hi = r.regular_gammas[0]
    assert lo == -math.inf and abs(hi + 0.44779) <= 1e-4
    oracle, _ = sci.quad(lambda t: np.exp(-t * np.sqrt(t * t + 1)) / (t + np.sqrt(t * t + 1)), 0, np.inf)
    assert hi == pytest.approx(-oracle, abs=1e-8)


def test_regular_range_fresnel_empty(families):
    r = families["fresnel"].regular_range()
    assert r.regular_gammas == [] and r.normalizable_gammas == []


def test_regular_set_is_complement_of_range(families):
    fam = families["quartic"]
    r = fam.regular_range()
    hi = r.regular_gammas[0][1]
    for g in (hi - 1e-3, -25.0, -100.0):
        assert r.is_regular(g) and fam.member(g).is_regular()
    for g in (hi + 1e-3, 0.0, 8.0, -8.0):
        assert not r.is_regular(g) and not fam.member(g).is_regular()


def test_regular_range_json_schema(families):
    data = families["harmonic"].regular_range().to_json("harmonic")
    assert set(data) == {"preset", "gamma_s", "regular_intervals", "normalizable_intervals"}
    assert data["regular_intervals"][0][0] is None and data["regular_intervals"][1][1] is None
    assert {d["side"] for d in data["gamma_s"]} == {"left", "right"}


def test_normalizable_set_equals_regular_set_for_two_finite_tails(families):
    r = families["harmonic"].regular_range()
    assert r.normalizable_gammas == r.regular_gammas


# -- initial condition, normalized-seed convention ----------------------------------------------

def test_gamma_from_initial_condition():
    assert gamma_from_initial_condition(spec("harmonic"), 0.25) == 4.0
    assert gamma_from_initial_condition(spec("constant"), 0.5) == -2.0
    with pytest.raises(InfiniteGammaError):
        gamma_from_initial_condition(spec("harmonic"), 0.0)
    with pytest.raises(ZeroDivisionError):
        gamma_from_initial_condition(spec("constant"), 1.0)


def test_normalization_constant():
    assert normalization_constant(1.0) == pytest.approx(math.sqrt(2))
    assert normalization_constant(-2.0) == pytest.approx(math.sqrt(2))
    for g in (-0.5, -1.0, 0.0):
        with pytest.raises(ForbiddenIntervalError):
            normalization_constant(g)


def test_gamma_convert_harmonic(families):
    fam = families["harmonic"]
    # gamma_main = sqrt(pi) * gamma_a - Gamma(-inf) = sqrt(pi) * gamma_a + sqrt(pi)/2
    for g_a in (1.0, -2.0, 0.3):
        g_main = fam.gamma_from_normalized(g_a)
        assert g_main == pytest.approx(SQRT_PI * g_a + SQRT_PI / 2, abs=1e-9)
        assert fam.gamma_convert(g_main) == pytest.approx(g_a, abs=1e-12)
    assert fam.gamma_convert(math.inf) == math.inf


def test_gamma_convert_half_line(families):
    fam = families["constant"]
    # l = 0, upper = +inf: ||mu||_1 = 1/(2c)
    assert fam.gamma_convert(-3.0, lower=0.0) == pytest.approx(-6.0, abs=1e-8)
    with pytest.raises(NonNormalizableError):
        fam.gamma_convert(-3.0)


def test_normalized_member_is_normalized(families):
    fam = families["harmonic"]
    for g_a in (1.0, -2.0, 3.5):
        m = fam.normalized_member(g_a)
        n2 = normalization_constant(g_a) ** 2
        assert m.norm() * n2 == pytest.approx(1.0, abs=1e-6)


def test_forbidden_image_is_the_singular_set(families):
    fam = families["harmonic"]
    assert fam.gamma_from_normalized(-1.0) == pytest.approx(-SQRT_PI / 2, abs=1e-9)
    assert fam.gamma_from_normalized(0.0) == pytest.approx(SQRT_PI / 2, abs=1e-9)


# -- peaks -------------------------------------------------------------------------------

def test_gamma_star_harmonic(families):
    ref = -(math.exp(-1) + sci.quad(lambda t: math.exp(-t * t), 0, 1)[0])
    assert families["harmonic"].gamma_star(1.0) == pytest.approx(ref, abs=1e-10)
    assert ref == pytest.approx(-1.1147, abs=1e-3)
    with pytest.raises(UndefinedError):
        families["harmonic"].gamma_star(0.0)
    assert math.isnan(families["harmonic"].gamma_star(np.array([0.0, 1.0]), on_undefined="nan")[0])


def test_gamma_star_where_phi_g_vanishes(families):
    fam = families["quartic"]
    for p in fam.peaks(-30.0):
        assert fam.gamma_star(p.x) == pytest.approx(-30.0, abs=1e-6)


def test_quartic_peaks_bracketed_by_gamma_star_roots(families):
    fam = families["quartic"]
    m = fam.member(-30.0)
    x = np.linspace(-4, 8, 24001)
    psi2 = m.zero_mode(x) ** 2
    interior = (psi2[1:-1] > psi2[:-2]) & (psi2[1:-1] >= psi2[2:])
    argmax = x[1:-1][interior]
    gs = fam.gamma_star(x, on_undefined="nan") + 30.0
    ok = np.isfinite(gs[:-1]) & np.isfinite(gs[1:])
    roots = x[:-1][ok & (np.sign(gs[:-1]) != np.sign(gs[1:]))]
    peaks = [p.x for p in m.peak_analysis()]
    assert len(argmax) == 2 and len(peaks) == 2
    assert np.allclose(sorted(peaks), sorted(argmax), atol=1e-3)
    for p in peaks:
        assert np.min(np.abs(roots - p)) <= 1e-3


def test_harmonic_single_peak_matches_argmax(families):
    m = families["harmonic"].member(4.0)
    x = np.linspace(-6, 6, 120001)
    psi2 = m.zero_mode(x) ** 2
    peaks = m.peak_analysis()
    assert len(peaks) == 1
    assert peaks[0].x == pytest.approx(x[np.argmax(psi2)], abs=2e-4)
    assert peaks[0].height == pytest.approx(psi2.max() / m.norm(), rel=1e-6)


def test_quartic_equal_heights_near_gamma_c(families):
    peaks = families["quartic"].peaks(-28.33)
    assert len(peaks) == 2
    h1, h2 = peaks[0].height, peaks[1].height
    assert abs(h1 - h2) <= 0.02 * max(h1, h2)


def test_quartic_shallow_well_wins_at_minus_26(families):
    peaks = families["quartic"].peaks(-26.0)
    deep = min(peaks, key=lambda p: p.well_value)
    shallow = max(peaks, key=lambda p: p.well_value)
    assert shallow.height > deep.height
    deep49 = min(families["quartic"].peaks(-49.0), key=lambda p: p.well_value)
    shallow49 = max(families["quartic"].peaks(-49.0), key=lambda p: p.well_value)
    assert deep49.height > shallow49.height


def test_find_gamma_c(families):
    gc = families["quartic"].find_gamma_c((-49.0, -20.0))
    assert abs(gc - (-28.33)) <= 0.5
    with pytest.raises(PeakError):
        families["harmonic"].find_gamma_c((2.0, 6.0))


def test_peaks_need_a_normalizable_member(families):
    with pytest.raises(NonNormalizableError):
        families["fresnel"].peaks(-3.0)
    with pytest.raises(NonNormalizableError):
        families["harmonic"].peaks(0.5)


def test_get_preset():
    assert get_preset("constant", 2.0).constants["gamma_s"] == -0.25
    with pytest.raises(KeyError):
        get_preset("nope")
