"""Partner potentials and the one-parameter isospectral family.

Starting from a particular Riccati solution in composition form
``phi_p(x) = F(f(x))`` (energy shifted so the zero mode sits at 0):

* partner potentials ``V2 = F'(f) f' + F^2`` and ``V1 = V2 - 2 phi_p'``;
* integrating factor ``mu = exp(-2 int_0^x phi_p)`` and ``Gamma = int_0^x mu``;
* general Riccati solution ``phi_g = phi_p + mu / (gamma + Gamma)``;
* family ``V1g = V2 - 2 phi_g'`` with zero mode ``sqrt(mu) / (gamma + Gamma)``.

``V1g`` is never obtained by differentiating ``ln|gamma + Gamma|`` numerically.
With ``mu' = -2 phi_p mu`` it expands to
``V1 + 4 phi_p r + 2 r^2`` where ``r = mu / (gamma + Gamma)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import quad
from .errors import (
    DomainError,
    ForbiddenIntervalError,
    InfiniteGammaError,
    NonNormalizableError,
    PeakError,
    SingularityError,
    UndefinedError,
)
from .expr import Expression, differentiate, parse
from .quad import CumulativeIntegral, TailClassification

Window = tuple[float, float]

# |gamma + Gamma(x)| below this (relative to 1 + |gamma|) counts as a hit
SINGULAR_TOL = 1e-12
GAMMA_C_TOL = 1e-3
SCAN_POINTS = 8001
MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class SuperpotentialSpec:
    """The pair (F, f) defining ``phi_p = F(f(x))``.

    ``branch`` optionally gives ``phi_p`` directly as an expression in x.  It
    is needed when the principal branch of F composed with f is not the
    analytic one: ``sqrt(x^2)`` is ``|x|`` numerically, while the smooth
    continuation through the double zero of ``x^2`` is ``x``.  When set, it
    replaces the composition for every evaluation.
    """

    F: Expression
    f: Expression
    F_prime: Expression
    f_prime: Expression
    branch: Expression | None = None
    branch_prime: Expression | None = None
    epsilon: float = 0.0

    @classmethod
    def from_sources(cls, F: str, f: str, branch: str | None = None) -> "SuperpotentialSpec":
        F_expr = parse(F, "u")
        f_expr = parse(f, "x")
        branch_expr = parse(branch, "x") if branch is not None else None
        return cls(
            F=F_expr,
            f=f_expr,
            F_prime=differentiate(F_expr),
            f_prime=differentiate(f_expr),
            branch=branch_expr,
            branch_prime=differentiate(branch_expr) if branch_expr is not None else None,
        )

    def _outer(self, e: Expression, fx, x):
        try:
            return e(fx)
        except DomainError as exc:
            # report the x that produced the bad inner value
            if exc.x is not None and np.ndim(fx) > 0:
                hits = np.nonzero(np.asarray(fx) == exc.x)[0]
                where = float(np.asarray(x).flat[hits[0]]) if hits.size else None
            else:
                where = float(x) if np.ndim(x) == 0 else None
            raise DomainError(f"F: {exc.args[0].split(' (at')[0]}", where) from exc

    def phi(self, x):
        """Particular solution ``phi_p(x)``."""
        if self.branch is not None:
            return self.branch(x)
        return self._outer(self.F, self.f(x), x)

    def phi_prime(self, x):
        """``phi_p'(x) = F'(f(x)) f'(x)`` (or the derivative of ``branch``)."""
        if self.branch is not None:
            return self.branch_prime(x)
        return self._outer(self.F_prime, self.f(x), x) * self.f_prime(x)


def phi_particular(spec: SuperpotentialSpec, x):
    return spec.phi(x)


def partner_potentials(spec: SuperpotentialSpec, x):
    """``(V1, V2)`` at ``x``."""
    p = spec.phi(x)
    dp = spec.phi_prime(x)
    v2 = dp + p * p + spec.epsilon
    return v2 - 2 * dp, v2


def gamma_from_initial_condition(spec: SuperpotentialSpec, phi_g_at_0: float) -> float:
    """Family parameter reproducing a prescribed ``phi_g(0)``."""
    delta = phi_g_at_0 - spec.phi(0.0)
    if delta == 0:
        raise InfiniteGammaError()
    return 1.0 / delta


def normalization_constant(gamma_normalized: float) -> float:
    """``N = sqrt(gamma (gamma + 1))`` for a normalized seed zero mode."""
    if -1.0 <= gamma_normalized <= 0.0:
        raise ForbiddenIntervalError(gamma_normalized)
    return math.sqrt(gamma_normalized * (gamma_normalized + 1.0))


def integrating_factor(spec: SuperpotentialSpec, window: Window,
                       tol: float = quad.DEFAULT_TOL) -> CumulativeIntegral:
    """Build ``mu`` and ``Gamma`` over ``window``.

    The exponent ``int_0^x phi_p`` is tabulated once; ``mu`` at any point is
    ``exp(-2 * exponent)``.
    """
    x_min, x_max = window
    exponent = quad.Antiderivative(spec.phi, x_min, x_max, tol)

    def mu(x):
        arg = -2.0 * exponent(x)
        with np.errstate(over="ignore"):
            return np.exp(np.where(arg > MAX_EXPONENT, np.inf, arg))

    return quad.build_cumulative(mu, x_min, x_max, tol)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Peak:
    x: float
    height: float  # of the normalized squared zero mode
    well_x: float  # nearest local minimum of V1gamma
    well_value: float


@dataclass(frozen=True, eq=False)
class ParametricFamily:
    """One member of the family: a shared ``CumulativeIntegral`` plus gamma.

    ``convention="normalized"`` means ``gamma`` is measured with the seed zero
    mode normalized to one and the integral starting at ``lower``; it is
    converted to the default convention on construction and only the zero
    mode's overall scale differs.
    """

    spec: SuperpotentialSpec
    ci: CumulativeIntegral
    gamma: float
    convention: Literal["origin", "normalized"] = "origin"
    gamma_main: float = field(init=False)
    scale: float = field(init=False)
    lower: float | None = None

    def __post_init__(self):
        if self.convention == "origin":
            g, s = self.gamma, 1.0
        elif self.convention == "normalized":
            lower_value, norm = _normalized_reference(self.ci, self.lower, None)
            g = gamma_from_normalized_value(self.gamma, lower_value, norm)
            s = math.sqrt(norm)
        else:
            raise ValueError(f"unknown convention {self.convention!r}")
        object.__setattr__(self, "gamma_main", float(g))
        object.__setattr__(self, "scale", s)

    @property
    def window(self) -> Window:
        return self.ci.x_min, self.ci.x_max

    # -- singularity -------------------------------------------------------

    def singularity(self) -> float | None:
        """Root of ``gamma + Gamma`` inside the window, or None."""
        g = self.gamma_main
        if math.isinf(g):
            return None
        values = g + self.ci.gamma_values
        if values[0] > 0 or values[-1] < 0:
            return None
        lo, hi = self.ci.x_min, self.ci.x_max
        if values[0] == 0:
            return lo
        # bisect to adjacent floats so the root itself trips the singular test
        while True:
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
            if g + self.ci.direct(mid) < 0:
                lo = mid
            else:
                hi = mid
        return lo if abs(g + self.ci.direct(lo)) <= abs(g + self.ci.direct(hi)) else hi

    def is_regular(self) -> bool:
        """No root of ``gamma + Gamma`` in the window."""
        return self.singularity() is None

    def denominator(self, x):
        d = self.gamma_main + self.ci.direct(x)
        hit = np.abs(d) <= SINGULAR_TOL * (1.0 + abs(self.gamma_main))
        if np.any(hit):
            raise SingularityError(self.gamma_main, self.singularity())
        return d

    def ratio(self, x):
        """``mu / (gamma + Gamma)``."""
        if math.isinf(self.gamma_main):
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.ci.mu(np.asarray(x, dtype=float)) / self.denominator(x)

    # -- evaluators --------------------------------------------------------

    def phi_general(self, x):
        return self.spec.phi(x) + self.ratio(x)

    def phi_general_prime(self, x):
        """Analytic ``phi_g' = phi_p' - 2 phi_p r - r^2``."""
        p = self.spec.phi(x)
        r = self.ratio(x)
        return self.spec.phi_prime(x) - 2 * p * r - r * r

    def parametric_potential(self, x):
        v1, _ = partner_potentials(self.spec, x)
        p = self.spec.phi(x)
        r = self.ratio(x)
        return v1 + 4 * p * r + 2 * r * r

    def zero_mode(self, x):
        """Unnormalized zero mode; carries the sign of ``1/(gamma + Gamma)``.

        For infinite gamma this returns the limit of ``gamma * psi``, the
        nonparametric zero mode ``sqrt(mu)``.
        """
        mu = self.ci.mu(np.asarray(x, dtype=float))
        if math.isinf(self.gamma_main):
            out = np.sqrt(mu)
        else:
            out = self.scale * np.sqrt(mu) / self.denominator(x)
        return float(out) if np.ndim(x) == 0 else out

    def norm(self, tol: float = quad.DEFAULT_TOL) -> float:
        """``int psi^2`` over the window, by adaptive quadrature."""
        self._require_regular_window()
        return quad.integrate(lambda t: self.zero_mode(t) ** 2,
                              self.ci.x_min, self.ci.x_max, tol, rtol=tol)

    def _require_regular_window(self):
        root = self.singularity()
        if root is not None:
            raise SingularityError(self.gamma_main, root)

    # -- peaks -------------------------------------------------------------

    def peak_analysis(self, n_scan: int = SCAN_POINTS) -> list[Peak]:
        """Local maxima of the normalized squared zero mode.

        ``(psi^2)' = -2 phi_g psi^2``, so maxima sit where ``phi_g`` changes
        sign from negative to positive; each bracket is bisected down to
        rounding level.
        """
        limits = regular_intervals_from_tails(self.ci.left_tail, self.ci.right_tail)
        if not _in_intervals(self.gamma_main, limits):
            raise NonNormalizableError(
                f"zero mode for gamma={self.gamma_main:.12g} is not normalizable "
                "(singular on the full line)"
            )
        self._require_regular_window()
        xs = np.linspace(self.ci.x_min, self.ci.x_max, n_scan)
        pg = self.phi_general(xs)
        z = self.norm()
        v1g = self.parametric_potential(xs)
        wells = [i for i in range(1, n_scan - 1) if v1g[i] < v1g[i - 1] and v1g[i] <= v1g[i + 1]]
        peaks = []
        for i in np.nonzero((pg[:-1] < 0) & (pg[1:] >= 0))[0]:
            x = self._bisect_phi_g(float(xs[i]), float(xs[i + 1]))
            height = self.zero_mode(x) ** 2 / z
            if wells:
                j = min(wells, key=lambda k: abs(xs[k] - x))
                well_x, well_value = float(xs[j]), float(v1g[j])
            else:
                well_x = well_value = math.nan
            peaks.append(Peak(x, height, well_x, well_value))
        return peaks

    def _bisect_phi_g(self, lo: float, hi: float) -> float:
        f_lo = self.phi_general(lo)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
            f_mid = self.phi_general(mid)
            if f_mid == 0:
                return mid
            if (f_mid < 0) == (f_lo < 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        return lo if abs(f_lo) <= abs(self.phi_general(hi)) else hi


def _in_intervals(value: float, intervals) -> bool:
    return any(lo < value < hi for lo, hi in intervals)


def regular_intervals_from_tails(left: TailClassification | None,
                                 right: TailClassification | None) -> list[Window]:
    """Open gamma intervals for which ``gamma + Gamma`` never vanishes on the line."""
    lo = left.value if left is not None and left.is_finite else -math.inf
    hi = right.value if right is not None and right.is_finite else math.inf
    out = []
    if math.isfinite(hi):
        out.append((-math.inf, -hi))
    if math.isfinite(lo):
        out.append((-lo, math.inf))
    return out


def _subtract_closed(intervals: list[Window], lo: float, hi: float) -> list[Window]:
    out = []
    for a, b in intervals:
        if b <= lo or a >= hi:
            out.append((a, b))
            continue
        if a < lo:
            out.append((a, lo))
        if b > hi:
            out.append((hi, b))
    return out


def _normalized_reference(ci: CumulativeIntegral, lower: float | None,
                        upper: float | None) -> tuple[float, float]:
    """``(Gamma(l), int_l^upper mu)``; None means the infinite limit."""
    if lower is None or math.isinf(lower):
        lower_value = ci.limit("left")
        if lower_value is None:
            raise NonNormalizableError("integrating factor is not integrable on the left")
    else:
        lower_value = ci.direct(lower)
    if upper is None or math.isinf(upper):
        upper_value = ci.limit("right")
        if upper_value is None:
            raise NonNormalizableError("integrating factor is not integrable on the right")
    else:
        upper_value = ci.direct(upper)
    return float(lower_value), float(upper_value - lower_value)


def gamma_from_normalized_value(gamma_normalized: float, lower_value: float, norm: float) -> float:
    return gamma_normalized * norm - lower_value


@dataclass(frozen=True)
class RegularRangeReport:
    left_limit: TailClassification
    right_limit: TailClassification
    regular_gammas: list[Window]
    normalizable_gammas: list[Window]
    critical_gamma_s: list[dict]
    assumed_divergent: list[str]

    def is_regular(self, gamma: float) -> bool:
        return _in_intervals(gamma, self.regular_gammas)

    def to_json(self, preset: str) -> dict:
        def finite_or_none(v):
            return None if math.isinf(v) else v

        return {
            "preset": preset,
            "gamma_s": [
                {"value": c["value"], "side": c["side"], "tail": c["tail"]}
                for c in self.critical_gamma_s
            ],
            "regular_intervals": [[finite_or_none(a), finite_or_none(b)]
                                  for a, b in self.regular_gammas],
            "normalizable_intervals": [[finite_or_none(a), finite_or_none(b)]
                                       for a, b in self.normalizable_gammas],
        }


class SuperpotentialFamily:
    """Everything that does not depend on gamma: spec, window, mu and Gamma.

    Members for any number of gammas share the one ``CumulativeIntegral``,
    which is read-only, so sweeps can run concurrently.
    """

    def __init__(self, spec: SuperpotentialSpec, window: Window, tol: float = quad.DEFAULT_TOL):
        self.spec = spec
        self.window = (float(window[0]), float(window[1]))
        self.tol = tol
        self.ci = integrating_factor(spec, self.window, tol)

    def member(self, gamma: float) -> ParametricFamily:
        return ParametricFamily(self.spec, self.ci, float(gamma))

    def normalized_member(self, gamma_normalized: float, lower: float | None = None) -> ParametricFamily:
        return ParametricFamily(self.spec, self.ci, float(gamma_normalized), "normalized", lower=lower)

    def mu(self, x):
        return self.ci.mu(np.asarray(x, dtype=float))

    def cumulative(self, x):
        return self.ci.direct(x)

    # -- regular / singular analysis ----------------------------------------

    def regular_range(self) -> RegularRangeReport:
        left, right = self.ci.left_tail, self.ci.right_tail
        regular = regular_intervals_from_tails(left, right)
        if left.is_finite and right.is_finite:
            # image of the normalized-seed forbidden [-1, 0] in this convention
            lower_value, norm = _normalized_reference(self.ci, None, None)
            normalizable = _subtract_closed(
                regular,
                gamma_from_normalized_value(-1.0, lower_value, norm),
                gamma_from_normalized_value(0.0, lower_value, norm),
            )
        else:
            # psi^2 = Gamma'/(gamma+Gamma)^2 integrates to a finite value
            # whenever gamma + Gamma has no root, so nothing more to remove
            normalizable = list(regular)
        critical = []
        for tail in (left, right):
            critical.append({
                "value": -tail.value if tail.is_finite else None,
                "side": tail.side,
                "tail": "finite" if tail.is_finite else "divergent",
                "uncertainty": tail.uncertainty if tail.is_finite else None,
            })
        assumed = [t.side for t in (left, right) if t.kind == "inconclusive"]
        return RegularRangeReport(left, right, regular, normalizable, critical, assumed)

    # -- locus of maxima -----------------------------------------------------

    def gamma_star(self, x, on_undefined: Literal["raise", "nan"] = "raise"):
        """gamma for which the normalized squared zero mode peaks (or dips) at x."""
        xa = np.asarray(x, dtype=float)
        p = np.asarray(self.spec.phi(xa), dtype=float)
        zero = p == 0
        if np.any(zero) and on_undefined == "raise":
            raise UndefinedError("gamma* undefined where phi_p = 0",
                                 float(np.broadcast_to(xa, zero.shape)[zero].flat[0]))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -(self.mu(xa) + p * self.ci.direct(xa)) / np.where(zero, np.nan, p)
        return float(out) if np.ndim(x) == 0 else out

    def peaks(self, gamma: float) -> list[Peak]:
        return self.member(gamma).peak_analysis()

    def find_gamma_c(self, bracket: Window, tol: float = GAMMA_C_TOL) -> float:
        """gamma at which the two peaks of the squared zero mode are equal.

        Bisection on the height difference (first peak minus last peak).
        """
        a, b = sorted(bracket)

        def diff(g):
            peaks = self.peaks(g)
            if len(peaks) != 2:
                raise PeakError(f"gamma={g:.12g} gives {len(peaks)} peak(s), need 2")
            return peaks[0].height - peaks[1].height

        fa, fb = diff(a), diff(b)
        if fa == 0:
            return a
        if fb == 0:
            return b
        if (fa > 0) == (fb > 0):
            raise PeakError(f"peak height difference does not change sign on [{a}, {b}]")
        while b - a > tol:
            m = 0.5 * (a + b)
            fm = diff(m)
            if fm == 0:
                return m
            if (fm > 0) == (fa > 0):
                a, fa = m, fm
            else:
                b = m
        return 0.5 * (a + b)

    # -- conventions -------------------------------------------------------------

    def gamma_convert(self, gamma_main: float, lower: float | None = None,
                      upper: float | None = None) -> float:
        """Origin-convention gamma to the normalized-seed convention on ``[lower, upper]``.

        ``None`` for either limit means the corresponding infinite limit,
        read from the tail asymptote.
        """
        if math.isinf(gamma_main):
            return gamma_main
        lower_value, norm = _normalized_reference(self.ci, lower, upper)
        return (gamma_main + lower_value) / norm

    def gamma_from_normalized(self, gamma_normalized: float, lower: float | None = None,
                            upper: float | None = None) -> float:
        if math.isinf(gamma_normalized):
            return gamma_normalized
        lower_value, norm = _normalized_reference(self.ci, lower, upper)
        return gamma_from_normalized_value(gamma_normalized, lower_value, norm)
