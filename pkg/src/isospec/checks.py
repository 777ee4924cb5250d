"""Invariant suite behind ``isospec verify``.

Each check returns a :class:`CheckResult` with the measured quantity and the
threshold it was held to, so failures are reported with numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularityError
from .family import ParametricFamily, SuperpotentialFamily, partner_potentials
from .spectral import zero_mode_residual

SAMPLE_POINTS = 4001
FD_STEP = 1e-5
LOG_FD_STEP = 1e-4
RESIDUAL_N = 20001


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status}  {self.name}: {self.value:.3e} (threshold {self.threshold:.1e})"
        return f"{text}  {self.detail}" if self.detail else text


def _check(name, value, threshold, detail="") -> CheckResult:
    value = float(value)
    return CheckResult(name, bool(value <= threshold), value, threshold, detail)


def _interior(fam: SuperpotentialFamily, n: int = SAMPLE_POINTS, margin: float = 1e-3):
    a, b = fam.window
    return np.linspace(a + margin, b - margin, n)


def riccati_residual(member: ParametricFamily, x) -> float:
    """max |phi_g' + phi_g^2 - V2| / (1 + |V2|) with the analytic derivative."""
    _, v2 = partner_potentials(member.spec, x)
    pg = member.phi_general(x)
    return float(np.max(np.abs(member.phi_general_prime(x) + pg * pg - v2) / (1 + np.abs(v2))))


def riccati_fd_gap(member: ParametricFamily, x, h: float = FD_STEP) -> float:
    """max |analytic phi_g' - central difference of phi_g|."""
    fd = (member.phi_general(x + h) - member.phi_general(x - h)) / (2 * h)
    return float(np.max(np.abs(member.phi_general_prime(x) - fd)))


def log_derivative_gap(member: ParametricFamily, x, h: float = LOG_FD_STEP) -> float:
    """max |-(ln|psi|)' - phi_g| with a central difference."""
    lp = np.log(np.abs(member.zero_mode(x + h)))
    lm = np.log(np.abs(member.zero_mode(x - h)))
    return float(np.max(np.abs(-(lp - lm) / (2 * h) - member.phi_general(x))))


def darboux_gap(member: ParametricFamily, x) -> float:
    """max |V1gamma - (V2 - 2 phi_g')|."""
    _, v2 = partner_potentials(member.spec, x)
    return float(np.max(np.abs(member.parametric_potential(x) - (v2 - 2 * member.phi_general_prime(x)))))


def limit_distance(fam: SuperpotentialFamily, gamma: float, x=None) -> float:
    """sup |V1gamma - V1| over the window samples."""
    x = _interior(fam, margin=0.0) if x is None else x
    v1, _ = partner_potentials(fam.spec, x)
    return float(np.max(np.abs(fam.member(gamma).parametric_potential(x) - v1)))


def member_checks(fam: SuperpotentialFamily, gamma: float, label: str) -> list[CheckResult]:
    member = fam.member(gamma)
    x = _interior(fam)
    tag = f"[{label}, gamma={gamma:g}]"
    out = [
        _check(f"riccati residual {tag}", riccati_residual(member, x), 1e-6),
        _check(f"riccati derivative vs central difference {tag}", riccati_fd_gap(member, x), 1e-5),
        _check(f"log-derivative identity {tag}", log_derivative_gap(member, x), 1e-5),
        _check(f"darboux identity {tag}", darboux_gap(member, x), 1e-8),
        _check(f"zero-mode schrodinger residual {tag}",
               zero_mode_residual(member, None, RESIDUAL_N), 1e-4, f"n={RESIDUAL_N}"),
    ]
    psi = np.asarray(member.zero_mode(x))
    signs = np.unique(np.sign(psi))
    out.append(CheckResult(f"nodeless zero mode {tag}", len(signs) == 1 and signs[0] != 0,
                           float(len(signs)), 1.0, "distinct signs of psi"))
    peaks = member.peak_analysis()
    worst_phi = max((abs(float(member.phi_general(p.x))) for p in peaks), default=0.0)
    worst_star = max((abs(float(fam.gamma_star(p.x)) - gamma) for p in peaks), default=0.0)
    out.append(_check(f"peak condition |phi_g(x_peak)| {tag}", worst_phi, 1e-8,
                      f"{len(peaks)} peak(s)"))
    out.append(_check(f"peak locus gamma*(x_peak) = gamma {tag}", worst_star,
                      1e-6 * (1 + abs(gamma))))
    return out


def singularity_checks(fam: SuperpotentialFamily, label: str) -> list[CheckResult]:
    """Put the root of gamma + Gamma at a chosen x0 and check everything blows up there."""
    a, b = fam.window
    x0 = 0.5 * b  # Gamma is known everywhere in the window, any interior point will do
    gamma = -float(fam.ci.direct(x0))
    member = fam.member(gamma)
    root = member.singularity()
    tag = f"[{label}, gamma={gamma:.6g}]"
    out = [_check(f"singularity located {tag}", abs(root - x0) if root is not None else math.inf,
                  1e-8 * max(1.0, abs(x0)))]
    delta = 1e-6
    sides = []
    for s in (-1, 1):
        x = x0 + s * 10 * delta
        sides.append((member.phi_general(x), member.parametric_potential(x), member.zero_mode(x)))
    smallest = min(min(abs(v) for v in side) for side in sides)
    flips = all((sides[0][i] > 0) != (sides[1][i] > 0) for i in (0, 2))
    out.append(CheckResult(f"blow-up on both sides of the root {tag}",
                           smallest > 1e3 and flips, smallest, 1e3,
                           "min of |phi_g|, |V1gamma|, |psi| at 1e-5 from the root"))
    try:
        member.phi_general(x0)
        raised = False
    except SingularityError:
        raised = True
    out.append(CheckResult(f"singularity error at the root {tag}", raised, float(not raised), 0.0))
    return out


def grid_checks(fam: SuperpotentialFamily, label: str) -> list[CheckResult]:
    ci = fam.ci
    out = [
        _check(f"mu(0) = 1 [{label}]", abs(float(fam.mu(0.0)) - 1.0), 1e-14),
        _check(f"Gamma(0) = 0 [{label}]", abs(float(ci.gamma_values[np.searchsorted(ci.grid, 0.0)])), 0.0),
    ]
    # strict growth is only representable where a cell adds more than one ulp
    steps = np.diff(ci.gamma_values)
    visible = np.diff(ci.grid) * np.minimum(ci.mu_values[:-1], ci.mu_values[1:]) \
        > 4 * np.spacing(np.abs(ci.gamma_values[1:]))
    out.append(CheckResult(f"Gamma increasing [{label}]",
                           bool(np.all(steps >= 0) and np.all(steps[visible] > 0)),
                           float(np.min(steps)), 0.0, "min node increment"))
    x = _interior(fam)
    dp = fam.spec.phi_prime(x)
    fd = (fam.spec.phi(x + FD_STEP) - fam.spec.phi(x - FD_STEP)) / (2 * FD_STEP)
    out.append(_check(f"phi_p' vs central difference [{label}]",
                      np.max(np.abs(dp - fd) / (1 + np.abs(fd))), 1e-6))
    for tail, edge in ((ci.left_tail, ci.gamma_values[0]), (ci.right_tail, ci.gamma_values[-1])):
        if tail.is_finite:
            gap = abs(tail.value - edge)
            out.append(_check(f"{tail.side} asymptote brackets Gamma at the edge [{label}]",
                              gap, tail.uncertainty))
    return out


def symmetry_check(fam: SuperpotentialFamily, label: str) -> CheckResult:
    """Even mu: Gamma(-x) = -Gamma(x)."""
    b = min(-fam.window[0], fam.window[1])
    x = np.linspace(0, b, 1001)
    gap = np.max(np.abs(fam.ci.direct(-x) + fam.ci.direct(x)))
    return _check(f"odd Gamma for even mu [{label}]", gap, 10 * fam.tol)


def limit_monotone_check(fam: SuperpotentialFamily, label: str, sign: float = 1.0) -> CheckResult:
    gammas = [sign * 1e2, sign * 1e4, sign * 1e6]
    d = [limit_distance(fam, g) for g in gammas]
    ok = d[0] > d[1] > d[2]
    return CheckResult(f"limit recovery monotone in |gamma| [{label}]", ok, d[2], d[1],
                       "sup|V1gamma - V1| at 1e2, 1e4, 1e6: " + ", ".join(f"{v:.3g}" for v in d))


def run_suite(fam: SuperpotentialFamily, label: str, gammas, even_mu: bool = False) -> list[CheckResult]:
    results = grid_checks(fam, label)
    report = fam.regular_range()
    usable = [g for g in gammas if report.is_regular(g)]
    skipped = [g for g in gammas if not report.is_regular(g)]
    if skipped:
        results.append(CheckResult(f"requested gammas are regular [{label}]", False,
                                   float(len(skipped)), 0.0, f"singular: {skipped}"))
    if not report.regular_gammas:
        results.append(CheckResult(f"no regular gamma exists [{label}]", True, 0.0, 0.0,
                                   "member checks not applicable"))
    for g in usable:
        results.extend(member_checks(fam, g, label))
    results.extend(singularity_checks(fam, label))
    if even_mu:
        results.append(symmetry_check(fam, label))
        results.append(limit_monotone_check(fam, label))
    return results
