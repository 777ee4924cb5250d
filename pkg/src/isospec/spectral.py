"""Finite-difference Hamiltonians and their low-lying spectra.

``H = -d^2/dx^2 + V`` on a uniform grid with Dirichlet ends becomes a
symmetric tridiagonal matrix on the interior points.  Eigenvalues come from
Sturm-sequence bisection, eigenvectors from inverse iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import SpectrumError, UnsupportedSpectrumError, WindowTooSmallError
from .family import ParametricFamily, SuperpotentialFamily, SuperpotentialSpec, partner_potentials

EIG_TOL = 1e-10
DECAY_TOL = 1e-6
DEFAULT_N = 2001
DEFAULT_K = 5


@dataclass(frozen=True)
class DiscretizedHamiltonian:
    a: float
    b: float
    n_points: int
    diagonal: np.ndarray
    off_diagonal: float

    @classmethod
    def from_potential(cls, V, a: float, b: float, n: int = DEFAULT_N) -> "DiscretizedHamiltonian":
        if n < 4:
            raise SpectrumError("need at least 4 grid points")
        h = (b - a) / (n - 1)
        x = np.linspace(a, b, n)[1:-1]
        v = np.asarray(V(x), dtype=float)
        return cls(float(a), float(b), int(n), 2.0 / h**2 + v, -1.0 / h**2)

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n_points)[1:-1]

    @property
    def size(self) -> int:
        return len(self.diagonal)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = self.diagonal * psi
        out[1:] += self.off_diagonal * psi[:-1]
        out[:-1] += self.off_diagonal * psi[1:]
        return out

    def count_below(self, shift: float) -> int:
        """Number of eigenvalues strictly below ``shift`` (Sturm sequence)."""
        e2 = self.off_diagonal * self.off_diagonal
        tiny = 1e-300
        count = 0
        q = math.inf  # so the first pivot is d_0 - shift
        for d in self.diagonal.tolist():
            q = d - shift - e2 / (q if q != 0.0 else tiny)
            if q < 0.0:
                count += 1
        return count

    def gershgorin(self) -> tuple[float, float]:
        r = 2.0 * abs(self.off_diagonal)
        return float(self.diagonal.min() - r), float(self.diagonal.max() + r)


def _bisect_eigenvalue(H: DiscretizedHamiltonian, index: int, lo: float, hi: float,
                       tol: float) -> float:
    # invariant: count_below(lo) <= index < count_below(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if H.count_below(mid) > index:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _eigenvalues_only(H: DiscretizedHamiltonian, k: int, tol: float) -> np.ndarray:
    if not 0 < k < H.size:
        raise SpectrumError(f"k={k} must satisfy 0 < k < {H.size} (interior points)")
    lo, hi = H.gershgorin()
    values = []
    for i in range(k):
        start = values[-1] - tol if values else lo
        values.append(_bisect_eigenvalue(H, i, start, hi, tol))
    return np.array(values)


def eigenvectors(H: DiscretizedHamiltonian, values: np.ndarray, iterations: int = 3) -> np.ndarray:
    """Unit eigenvectors (columns) for the given eigenvalues by inverse iteration."""
    n = H.size
    band = np.empty((3, n))
    band[0, :] = H.off_diagonal
    band[2, :] = H.off_diagonal
    rng = np.random.default_rng(0)
    vectors = np.empty((n, len(values)))
    for j, lam in enumerate(values):
        shift = lam + 1e-9 * max(1.0, abs(lam))
        band[1, :] = H.diagonal - shift
        v = rng.standard_normal(n)
        for _ in range(iterations):
            v = solve_banded((1, 1), band, v, check_finite=False)
            # keep clustered eigenvectors apart
            v -= vectors[:, :j] @ (vectors[:, :j].T @ v)
            v /= np.linalg.norm(v)
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        vectors[:, j] = v
    return vectors


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray  # max |H psi - lambda psi| per pair


def eigenvalues(H: DiscretizedHamiltonian, k: int = DEFAULT_K, tol: float = EIG_TOL,
                decay_tol: float | None = DECAY_TOL) -> np.ndarray:
    """Lowest ``k`` eigenvalues in ascending order.

    With ``decay_tol`` set, the ground eigenvector must have fallen below
    ``decay_tol`` (relative to its maximum) at the first and last interior
    points; otherwise the window is too small for a bound-state calculation.
    """
    return solve(H, k, tol, decay_tol).values


def solve(H: DiscretizedHamiltonian, k: int = DEFAULT_K, tol: float = EIG_TOL,
          decay_tol: float | None = DECAY_TOL) -> Spectrum:
    values = _eigenvalues_only(H, k, tol)
    vectors = eigenvectors(H, values)
    if decay_tol is not None:
        g = np.abs(vectors[:, 0])
        edge = max(g[0], g[-1]) / g.max()
        if edge > decay_tol:
            raise WindowTooSmallError(
                f"ground state has not decayed at the window edge "
                f"(|psi_edge|/max|psi| = {edge:.3g} > {decay_tol:g}) on [{H.a}, {H.b}]"
            )
    residuals = np.array([
        np.max(np.abs(H.apply(vectors[:, j]) - values[j] * vectors[:, j]))
        for j in range(len(values))
    ])
    return Spectrum(values, vectors, residuals)


@dataclass(frozen=True)
class SpectrumReport:
    label_a: str
    label_b: str
    eigenvalues_a: np.ndarray
    eigenvalues_b: np.ndarray
    residual_norms_a: np.ndarray
    residual_norms_b: np.ndarray
    h: float

    @property
    def pairwise_diffs(self) -> np.ndarray:
        m = min(len(self.eigenvalues_a), len(self.eigenvalues_b))
        return np.abs(self.eigenvalues_a[:m] - self.eigenvalues_b[:m])

    @property
    def max_diff(self) -> float:
        return float(self.pairwise_diffs.max())

    def to_json(self) -> dict:
        return {
            "a": self.label_a,
            "b": self.label_b,
            "eigenvalues_a": self.eigenvalues_a.tolist(),
            "eigenvalues_b": self.eigenvalues_b.tolist(),
            "pairwise_diffs": self.pairwise_diffs.tolist(),
            "residual_norms_a": self.residual_norms_a.tolist(),
            "residual_norms_b": self.residual_norms_b.tolist(),
            "h": self.h,
        }


def compare(Va, Vb, a: float, b: float, n: int = DEFAULT_N, k: int = DEFAULT_K,
            labels=("a", "b"), drop_a: int = 0, decay_tol: float | None = DECAY_TOL) -> SpectrumReport:
    """Lowest ``k`` levels of two potentials; ``drop_a`` skips levels of the first."""
    Ha = DiscretizedHamiltonian.from_potential(Va, a, b, n)
    Hb = DiscretizedHamiltonian.from_potential(Vb, a, b, n)
    sa = solve(Ha, k + drop_a, decay_tol=decay_tol)
    sb = solve(Hb, k, decay_tol=decay_tol)
    return SpectrumReport(labels[0], labels[1], sa.values[drop_a:], sb.values,
                          sa.residuals[drop_a:], sb.residuals, Ha.h)


@dataclass(frozen=True)
class IsospectralReport:
    gamma: float
    family: SpectrumReport  # V1 against V1gamma
    ladder: SpectrumReport  # levels of V1 (ground removed when unbroken) against V2
    unbroken: bool  # sqrt(mu) normalizable: V1 has the zero mode at 0

    def to_json(self) -> dict:
        return {"gamma": self.gamma, "unbroken": self.unbroken,
                "family": self.family.to_json(), "ladder": self.ladder.to_json()}


def isospectral_check(spec: SuperpotentialSpec, gamma: float, window, n: int = DEFAULT_N,
                      k: int = DEFAULT_K, family: SuperpotentialFamily | None = None) -> IsospectralReport:
    """Compare V1 with V1gamma, and V2 with V1 shifted by one level.

    The shift applies only when V1 has a normalizable zero mode (both tails
    of Gamma finite); otherwise the partners share every level.
    """
    a, b = map(float, window)
    fam = family if family is not None else SuperpotentialFamily(spec, (a, b))
    member = fam.member(gamma)
    member._require_regular_window()
    unbroken = fam.ci.left_tail.is_finite and fam.ci.right_tail.is_finite
    V1 = lambda x: partner_potentials(spec, x)[0]
    V2 = lambda x: partner_potentials(spec, x)[1]
    fam_report = compare(V1, member.parametric_potential, a, b, n, k, ("V1", "V1gamma"))
    ladder = compare(V1, V2, a, b, n, k, ("V1", "V2"), drop_a=1 if unbroken else 0)
    return IsospectralReport(float(gamma), fam_report, ladder, unbroken)


def zero_mode_residual(fam: ParametricFamily, window=None, n: int = DEFAULT_N) -> float:
    """``max |-D2 psi + V1gamma psi| / max |psi|`` over interior grid points."""
    a, b = window if window is not None else fam.window
    x = np.linspace(a, b, n)
    h = x[1] - x[0]
    psi = np.asarray(fam.zero_mode(x))
    if math.isinf(fam.gamma_main):
        v = partner_potentials(fam.spec, x[1:-1])[0]
    else:
        v = fam.parametric_potential(x[1:-1])
    d2 = (psi[2:] - 2 * psi[1:-1] + psi[:-2]) / h**2
    return float(np.max(np.abs(-d2 + v * psi[1:-1])) / np.max(np.abs(psi)))


def intertwine_check(spec: SuperpotentialSpec, window, n: int = DEFAULT_N, mode_index: int = 1,
                     decay_tol: float | None = DECAY_TOL) -> float:
    """Check that ``A = d/dx + phi_p`` maps a V1 eigenvector to a V2 eigenvector.

    Returns the relative residual ``|H2 (A phi_n) - e_n A phi_n| / |A phi_n|``
    for ``mode_index >= 1``, and ``|A phi_0| / |phi_0|`` for the ground state.
    Modes at or above the lower of the two edge potentials are not bound and
    raise UnsupportedSpectrumError.
    """
    a, b = map(float, window)
    V1 = lambda x: partner_potentials(spec, x)[0]
    V2 = lambda x: partner_potentials(spec, x)[1]
    H1 = DiscretizedHamiltonian.from_potential(V1, a, b, n)
    edge = min(float(V1(np.array([a]))[0]), float(V1(np.array([b]))[0]))
    values = _eigenvalues_only(H1, mode_index + 1, EIG_TOL)
    eps = values[mode_index]
    if eps >= edge:
        raise UnsupportedSpectrumError(
            f"level {mode_index} (E={eps:.6g}) is not below the edge potential {edge:.6g}: "
            "no bound state"
        )
    s1 = solve(H1, mode_index + 1, decay_tol=decay_tol)
    phi = s1.vectors[:, mode_index]
    x = H1.x
    padded = np.concatenate([[0.0], phi, [0.0]])
    a_phi = (padded[2:] - padded[:-2]) / (2 * H1.h) + np.asarray(spec.phi(x)) * phi
    if mode_index == 0:
        return float(np.linalg.norm(a_phi) / np.linalg.norm(phi) * 1.0)
    H2 = DiscretizedHamiltonian.from_potential(V2, a, b, n)
    r = H2.apply(a_phi) - eps * a_phi
    return float(np.linalg.norm(r) / np.linalg.norm(a_phi))
