"""Adaptive Gauss-Kronrod quadrature and cumulative integrals.

All integrands are *vectorized* callables: they receive a numpy array of
abscissas and must return an array of the same shape.

The cumulative integral ``Gamma(x) = int_0^x mu`` is stored on an adaptive grid
containing 0 and evaluated between nodes by a cubic Hermite interpolant whose
node slopes are the exact values ``mu(x_i)``, limited with the Fritsch-Carlson
condition so the interpolant can never lose monotonicity.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InvalidSuperpotentialError, QuadratureError, WindowTooWideError

Integrand = Callable[[np.ndarray], np.ndarray]

# 15-point Kronrod extension of the 7-point Gauss rule, on [-1, 1].
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

KRONROD_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (counted from the outside).
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]
GAUSS_WEIGHTS[7] = _WG[3]

DEFAULT_TOL = 1e-10
MAX_INTERVALS = 5000

# tail classification thresholds
DECAY_FLOOR = 1e-12
DIVERGENCE_FLOOR = 1e-3
TAIL_FRACTION = 0.1
TAIL_TOL = 1e-6


def gk15(g: Integrand, a, b):
    """Apply the 7/15 Gauss-Kronrod pair to each interval ``[a_i, b_i]``.

    ``a`` and ``b`` are broadcastable arrays.  Returns ``(kronrod, error)``
    where ``error = |kronrod - gauss|``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    center = 0.5 * (b + a)
    nodes = center[..., None] + half[..., None] * KRONROD_NODES
    values = np.asarray(g(nodes), dtype=float)
    kronrod = half * (values @ KRONROD_WEIGHTS)
    gauss = half * (values @ GAUSS_WEIGHTS)
    return kronrod, np.abs(kronrod - gauss)


def integrate_with_error(
    g: Integrand,
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    rtol: float = 0.0,
    max_intervals: int = MAX_INTERVALS,
) -> tuple[float, float]:
    """Globally adaptive GK15 quadrature; returns ``(value, error_estimate)``.

    The worst interval is bisected until the summed error estimate is at most
    ``max(tol, rtol * |value|)``.  ``a > b`` flips the sign.
    """
    if tol <= 0 and rtol <= 0:
        raise ValueError("need tol > 0 or rtol > 0")
    if a == b:
        return 0.0, 0.0
    if a > b:
        value, err = integrate_with_error(g, b, a, tol, rtol, max_intervals)
        return -value, err

    # start from a few panels so one rule cannot miss a narrow feature
    edges = np.linspace(a, b, 5)
    vals, errs = gk15(g, edges[:-1], edges[1:])
    heap = [(-e, lo, hi, v) for lo, hi, v, e in zip(edges[:-1], edges[1:], vals, errs)]
    heapq.heapify(heap)
    total = float(np.sum(vals))
    total_err = float(np.sum(errs))
    n = len(heap)
    while total_err > max(tol, rtol * abs(total)):
        if n >= max_intervals:
            raise QuadratureError(
                f"no convergence on [{a}, {b}] after {n} subintervals "
                f"(error estimate {total_err:.3g})"
            )
        neg_err, lo, hi, v = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise QuadratureError(f"interval [{lo}, {hi}] cannot be bisected further")
        pv, pe = gk15(g, np.array([lo, mid]), np.array([mid, hi]))
        total += float(pv.sum()) - v
        total_err += float(pe.sum()) + neg_err
        heapq.heappush(heap, (-pe[0], lo, mid, pv[0]))
        heapq.heappush(heap, (-pe[1], mid, hi, pv[1]))
        n += 1
    # re-sum to shed the drift of the running update
    total = math.fsum(item[3] for item in heap)
    total_err = math.fsum(-item[0] for item in heap)
    return total, total_err


def integrate(g: Integrand, a: float, b: float, tol: float = DEFAULT_TOL, rtol: float = 0.0) -> float:
    """Integral of ``g`` over ``[a, b]`` with estimated absolute error <= tol."""
    return integrate_with_error(g, a, b, tol, rtol)[0]


def _refine_cells(g, edges, tol, rtol, total_length, max_cells):
    """Bisect cells of ``edges`` until each cell's GK error is acceptable.

    The acceptance test is ``err <= tol * len / total_length + rtol * |I|``
    so the summed absolute error stays below ``tol`` plus a relative part.
    """
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    vals, errs = gk15(g, lo, hi)
    done_lo, done_hi, done_v, done_e = [], [], [], []
    while True:
        ok = errs <= tol * (hi - lo) / total_length + rtol * np.abs(vals)
        done_lo.append(lo[ok]); done_hi.append(hi[ok])
        done_v.append(vals[ok]); done_e.append(errs[ok])
        if ok.all():
            break
        lo, hi = lo[~ok], hi[~ok]
        mid = 0.5 * (lo + hi)
        if np.any(~((lo < mid) & (mid < hi))):
            raise QuadratureError("cell cannot be bisected further")
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        if sum(len(d) for d in done_lo) + len(lo) > max_cells:
            raise QuadratureError(f"cell budget of {max_cells} exhausted")
        vals, errs = gk15(g, lo, hi)
    lo = np.concatenate(done_lo)
    order = np.argsort(lo)
    return (lo[order], np.concatenate(done_hi)[order],
            np.concatenate(done_v)[order], np.concatenate(done_e)[order])


def _signed_cumsum(x0_index: int, cell_values: np.ndarray) -> np.ndarray:
    """Accumulate cell integrals outward from node ``x0_index`` (value 0)."""
    out = np.zeros(len(cell_values) + 1)
    out[x0_index + 1:] = np.cumsum(cell_values[x0_index:])
    out[:x0_index] = -np.cumsum(cell_values[:x0_index][::-1])[::-1]
    return out


def _initial_edges(x_min: float, x_max: float, n_min: int) -> np.ndarray:
    """Uniform-ish edges on [x_min, x_max] that always contain 0."""
    span = x_max - x_min
    n_left = max(1, round(n_min * -x_min / span))
    n_right = max(1, n_min - n_left)
    return np.concatenate([np.linspace(x_min, 0.0, n_left + 1)[:-1],
                           np.linspace(0.0, x_max, n_right + 1)])


class Antiderivative:
    """``A(x) = int_0^x g`` for a smooth, possibly sign-changing ``g``.

    Node values come from adaptive cells; at other points one extra GK15
    panel from the nearest node on the left is added.
    """

    def __init__(self, g: Integrand, x_min: float, x_max: float,
                 tol: float = DEFAULT_TOL, n_min: int = 64, max_cells: int = 200_000):
        if not x_min < 0 < x_max:
            raise ValueError("the window must satisfy x_min < 0 < x_max")
        self.g = g
        lo, hi, vals, errs = _refine_cells(
            g, _initial_edges(x_min, x_max, n_min), tol, 0.0, x_max - x_min, max_cells)
        self.nodes = np.append(lo, hi[-1])
        self.values = _signed_cumsum(int(np.searchsorted(self.nodes, 0.0)), vals)
        self.error = float(errs.sum())

    @property
    def window(self) -> tuple[float, float]:
        return float(self.nodes[0]), float(self.nodes[-1])

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(self.nodes, xa, side="right") - 1, 0, len(self.nodes) - 2)
        left = self.nodes[i]
        panel, _ = gk15(self.g, left, xa)
        out = self.values[i] + panel
        return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class TailClassification:
    """Limit of ``Gamma`` beyond one end of the window.

    ``kind`` is ``"finite"`` (``value`` +- ``uncertainty`` is the asymptote),
    ``"divergent"``, or ``"inconclusive"``; callers treat the last as
    divergent.
    """

    kind: Literal["finite", "divergent", "inconclusive"]
    side: Literal["left", "right"]
    value: float | None = None
    uncertainty: float | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"


@dataclass(frozen=True, eq=False)
class CumulativeIntegral:
    """``mu`` on an adaptive grid together with ``Gamma(x) = int_0^x mu``."""

    grid: np.ndarray
    mu_values: np.ndarray
    gamma_values: np.ndarray
    slopes: np.ndarray  # Hermite slopes (mu, Fritsch-Carlson limited)
    mu: Integrand
    quadrature_tolerance: float
    cell_errors: np.ndarray  # GK error estimate per grid cell
    left_tail: TailClassification | None = None
    right_tail: TailClassification | None = None

    @property
    def error_estimate(self) -> float:
        return float(self.cell_errors.sum())

    def side_error(self, side: Literal["left", "right"]) -> float:
        """Summed quadrature error between 0 and the window edge on ``side``."""
        cells = self.grid[:-1] >= 0 if side == "right" else self.grid[:-1] < 0
        return float(self.cell_errors[cells].sum())

    @property
    def x_min(self) -> float:
        return float(self.grid[0])

    @property
    def x_max(self) -> float:
        return float(self.grid[-1])

    def _locate(self, xa):
        if np.any((xa < self.grid[0]) | (xa > self.grid[-1])):
            raise ValueError(f"x outside the window [{self.x_min}, {self.x_max}]")
        i = np.clip(np.searchsorted(self.grid, xa, side="right") - 1, 0, len(self.grid) - 2)
        h = self.grid[i + 1] - self.grid[i]
        t = (xa - self.grid[i]) / h
        return i, h, t

    def evaluate(self, x):
        """Interpolated ``Gamma(x)``."""
        xa = np.asarray(x, dtype=float)
        i, h, t = self._locate(xa)
        y0, y1 = self.gamma_values[i], self.gamma_values[i + 1]
        m0, m1 = self.slopes[i], self.slopes[i + 1]
        t2, t3 = t * t, t * t * t
        out = ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0
               + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1)
        return float(out) if np.ndim(x) == 0 else out

    def direct(self, x):
        """``Gamma(x)`` as the node value plus one GK15 panel from the node below.

        Smooth in ``x`` to rounding level, unlike the piecewise interpolant,
        so it is the right choice when ``Gamma`` is differenced numerically.
        """
        xa = np.asarray(x, dtype=float)
        i, _, _ = self._locate(xa)
        panel, _ = gk15(self.mu, self.grid[i], xa)
        out = self.gamma_values[i] + panel
        return float(out) if np.ndim(x) == 0 else out

    def derivative(self, x):
        """Derivative of the interpolant (approximates ``mu``)."""
        xa = np.asarray(x, dtype=float)
        i, h, t = self._locate(xa)
        y0, y1 = self.gamma_values[i], self.gamma_values[i + 1]
        m0, m1 = self.slopes[i], self.slopes[i + 1]
        out = ((6 * t * t - 6 * t) * (y0 - y1) / h + (3 * t * t - 4 * t + 1) * m0
               + (3 * t * t - 2 * t) * m1)
        return float(out) if np.ndim(x) == 0 else out

    def __call__(self, x):
        return self.evaluate(x)

    def limit(self, side: Literal["left", "right"]) -> float | None:
        """Finite asymptote of Gamma on ``side`` or None when divergent."""
        tail = self.left_tail if side == "left" else self.right_tail
        if tail is None:
            tail = classify_tail(self, side)
        return tail.value if tail.is_finite else None

    def minimum_mu(self, a: float, b: float) -> tuple[float, float]:
        """``(x, mu(x))`` at the minimum of ``mu`` on ``[a, b]``."""
        mask = (self.grid >= a) & (self.grid <= b)
        xs = np.unique(np.concatenate([[a, b], self.grid[mask]]))
        values = self.mu(xs)
        k = int(np.argmin(values))
        lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, len(xs) - 1)]
        best_x, best = float(xs[k]), float(values[k])
        if hi > lo:
            res = minimize_scalar(lambda t: float(self.mu(np.array([t]))[0]),
                                  bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-12})
            if res.fun < best:
                best_x, best = float(res.x), float(res.fun)
        return best_x, best


def _check_mu(values: np.ndarray, xs: np.ndarray):
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise WindowTooWideError("integrating factor overflows", float(xs[bad].flat[0]))
    bad = values <= 0
    if np.any(bad):
        raise InvalidSuperpotentialError(
            f"integrating factor is not positive at x={float(xs[bad].flat[0]):.12g}"
        )


def _fritsch_carlson(grid, values, slopes):
    m = slopes.copy()
    delta = np.diff(values) / np.diff(grid)
    for k in np.nonzero(delta > 0)[0]:
        a = m[k] / delta[k]
        b = m[k + 1] / delta[k]
        s = a * a + b * b
        if s > 9.0:
            tau = 3.0 / math.sqrt(s)
            m[k] = tau * a * delta[k]
            m[k + 1] = tau * b * delta[k]
    return m


def build_cumulative(
    mu: Integrand,
    x_min: float,
    x_max: float,
    tol: float = DEFAULT_TOL,
    n_min: int = 64,
    rtol: float | None = None,
    max_cells: int = 400_000,
) -> CumulativeIntegral:
    """Tabulate ``Gamma(x) = int_0^x mu`` on an adaptive grid over the window.

    Cells are bisected until (a) the GK15 error is below the per-cell share of
    ``tol`` and (b) the Hermite interpolant at each cell midpoint agrees with
    direct integration to ``tol + rtol*|Gamma(mid)|``.  ``rtol`` (default
    ``tol``) only matters where ``mu`` is astronomically large, as on the
    divergent side of a confining superpotential.
    """
    if not x_min < 0 < x_max:
        raise ValueError("the window must satisfy x_min < 0 < x_max")
    if tol <= 0:
        raise ValueError("tol must be positive")
    rtol = tol if rtol is None else rtol

    def checked_mu(xs):
        values = np.asarray(mu(xs), dtype=float)
        _check_mu(values, np.asarray(xs))
        return values

    edges = _initial_edges(x_min, x_max, n_min)
    span = x_max - x_min
    for _ in range(60):
        lo, hi, vals, errs = _refine_cells(checked_mu, edges, tol, rtol, span, max_cells)
        grid = np.append(lo, hi[-1])
        gamma = _signed_cumsum(int(np.searchsorted(grid, 0.0)), vals)
        mu_nodes = checked_mu(grid)
        slopes = _fritsch_carlson(grid, gamma, mu_nodes)
        ci = CumulativeIntegral(grid, mu_nodes, gamma, slopes, mu, tol, errs)
        # probe midpoints against direct integration from the left node
        mids = 0.5 * (grid[:-1] + grid[1:])
        direct = gamma[:-1] + gk15(checked_mu, grid[:-1], mids)[0]
        bad = np.abs(ci.evaluate(mids) - direct) > tol + rtol * np.abs(direct)
        if not bad.any():
            break
        if len(grid) + bad.sum() > max_cells:
            raise QuadratureError(f"grid budget of {max_cells} nodes exhausted")
        edges = np.sort(np.concatenate([grid, mids[bad]]))
    else:
        raise QuadratureError("interpolation refinement did not converge")

    left = classify_tail(ci, "left")
    right = classify_tail(ci, "right")
    return CumulativeIntegral(grid, mu_nodes, gamma, slopes, mu, tol, errs, left, right)


def classify_tail(ci: CumulativeIntegral, side: Literal["left", "right"],
                  tail_tol: float = TAIL_TOL) -> TailClassification:
    """Decide whether ``Gamma`` tends to a finite limit beyond ``side``.

    Finite: ``mu`` decreases monotonically toward the edge over the last
    ``TAIL_FRACTION`` of the window and either ``mu_edge < DECAY_FLOOR`` or the
    exponential-tail estimate ``mu_edge / kappa`` (``kappa`` the local decay
    rate of ``ln mu``) is at most ``tail_tol``.  The asymptote is the edge value
    plus that tail estimate.

    Divergent: ``mu > DIVERGENCE_FLOOR`` throughout the last part of the
    window, so ``Gamma`` keeps growing at least linearly.
    """
    span = ci.x_max - ci.x_min
    if side == "right":
        mask = ci.grid >= ci.x_max - TAIL_FRACTION * span
        xs, mus = ci.grid[mask], ci.mu_values[mask]
        edge_gamma = float(ci.gamma_values[-1])
        sign = 1.0
    elif side == "left":
        mask = ci.grid <= ci.x_min + TAIL_FRACTION * span
        xs, mus = ci.grid[mask][::-1], ci.mu_values[mask][::-1]
        edge_gamma = float(ci.gamma_values[0])
        sign = -1.0
    else:
        raise ValueError(f"side must be 'left' or 'right', not {side!r}")

    mu_edge = float(mus[-1])
    decreasing = bool(np.all(np.diff(mus) <= 0))
    dx = abs(float(xs[-1] - xs[-2]))
    log_drop = math.log(float(mus[-2])) - math.log(mu_edge)
    kappa = log_drop / dx if dx > 0 else 0.0
    tail = mu_edge / kappa if kappa > 0 else math.inf
    diagnostics = {
        "mu_edge": mu_edge,
        "mu_min_tail": float(mus.min()),
        "decreasing": decreasing,
        "decay_rate": kappa,
        "tail_estimate": tail,
    }
    if decreasing and (mu_edge < DECAY_FLOOR or tail <= tail_tol):
        if not math.isfinite(tail):
            # flat below the floor: bound the remainder crudely
            tail = mu_edge * span
        return TailClassification(
            "finite", side,
            value=edge_gamma + sign * tail,
            uncertainty=tail + ci.side_error(side),
            diagnostics=diagnostics,
        )
    if float(mus.min()) > DIVERGENCE_FLOOR:
        return TailClassification("divergent", side, diagnostics=diagnostics)
    return TailClassification("inconclusive", side, diagnostics=diagnostics)
