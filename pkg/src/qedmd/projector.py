"""Sign-polynomial projectors onto low-energy subspaces and amplitude amplification.

Polynomial transforms are applied as matrix functions in the eigenbasis of H.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.special import erf, erfcinv

from .lattice import SpectralDecomposition, Wavefunction

LOW = "low-energy"
COMPLEMENT = "complement"

GRID_POINTS = 10_000
MAX_DEGREE = 20_001


def _log(x: float, base: str) -> float:
    if base == "2":
        return math.log2(x)
    if base == "e":
        return math.log(x)
    raise ValueError(f"unknown log base {base!r}")


def qsp_degree(delta: float, eps: float, base: str = "2") -> int:
    """Sign-polynomial degree d(delta, eps) = ceil(2/5 sqrt((rho^2 + log 1/eps) log 1/eps)).

    rho = sqrt(2 log(2 / (pi eps^2))) / delta.  ``base`` selects log2 ("2") or the
    natural log ("e"); base 2 reproduces the published logical T-counts.
    """
    if not (0 < delta < 1 and 0 < eps < 1):
        raise ValueError("need 0 < delta, eps < 1")
    rho = math.sqrt(2 * _log(2 / (math.pi * eps**2), base)) / delta
    le = _log(1 / eps, base)
    return max(1, math.ceil(0.4 * math.sqrt((rho**2 + le) * le)))


@dataclass
class SignPolynomial:
    delta: float
    eps: float
    degree: int
    coefficients: np.ndarray = field(repr=False)
    steepness: float
    sup_norm: float
    band_error: float

    parity = "odd"

    def __call__(self, x):
        return C.chebval(np.asarray(x, dtype=float), self.coefficients)


class SignPolynomialError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


def _grid(delta: float) -> np.ndarray:
    g = np.linspace(-1.0, 1.0, GRID_POINTS)
    return np.unique(np.concatenate([g, [-1.0, -delta, 0.0, delta, 1.0]]))


def _extrema(coeffs: np.ndarray, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Grid local maxima of |S| polished by Newton steps on S'."""
    a = np.abs(s)
    idx = np.flatnonzero((a[1:-1] >= a[:-2]) & (a[1:-1] >= a[2:])) + 1
    if not len(idx):
        return np.zeros(0)
    d1, d2 = C.chebder(coeffs), C.chebder(coeffs, 2)
    lo, hi = x[idx - 1], x[idx + 1]
    z = x[idx].copy()
    for _ in range(8):
        curv = C.chebval(z, d2)
        step = np.divide(C.chebval(z, d1), curv, out=np.zeros_like(z), where=curv != 0)
        z = np.clip(z - step, lo, hi)
    return z


def verify_sign_poly(coeffs: np.ndarray, delta: float) -> tuple[float, float]:
    """(max |S| on [-1,1], max |S - sign| on [-1,-delta] u [delta,1]).

    Evaluated on the check grid plus every local extremum of S located between grid points.
    """
    x = _grid(delta)
    x = np.concatenate([x, _extrema(coeffs, x, C.chebval(x, coeffs))])
    s = C.chebval(x, coeffs)
    outside = np.abs(x) >= delta
    return float(np.max(np.abs(s))), float(np.max(np.abs(s[outside] - np.sign(x[outside]))))


def build_sign_poly(delta: float, eps: float, max_degree: int = MAX_DEGREE) -> SignPolynomial:
    """Odd Chebyshev approximation of erf(k x), rescaled so that |S| <= 1."""
    if not (0 < delta < 1 and 0 < eps < 1):
        raise ValueError("need 0 < delta, eps < 1")
    k = float(erfcinv(eps / 4)) / delta
    degree = qsp_degree(delta, eps, "e")
    degree += 1 - degree % 2
    best = math.inf
    while degree <= max_degree:
        coeffs = C.chebinterpolate(lambda x: erf(k * x), degree)
        coeffs[0::2] = 0.0
        sup, _ = verify_sign_poly(coeffs, delta)
        if sup > 1:
            coeffs = coeffs / sup
        sup, band = verify_sign_poly(coeffs, delta)
        best = min(best, band)
        if sup <= 1 and band <= eps:
            return SignPolynomial(delta, eps, degree, coeffs, k, sup, band)
        degree = int(degree * 1.25) | 1
    raise SignPolynomialError(f"sign polynomial not within eps={eps} at degree {max_degree}", best)


def exact_step(x: np.ndarray) -> np.ndarray:
    """Ideal sign function, with sign(0) = -1 so that E = cutoff counts as low energy."""
    return np.where(np.asarray(x) > 0, 1.0, -1.0)


@dataclass
class ProjectionOutcome:
    state: Wavefunction
    residual: float
    retained: float
    target: str
    shifted_cutoff: float
    gamma: float


def _scaled(decomp: SpectralDecomposition, cutoff: float, norm_bound: float) -> np.ndarray:
    if not -norm_bound <= cutoff <= norm_bound:
        raise ValueError("cutoff outside [-lambda, lambda]")
    return (decomp.eigenvalues - cutoff) / (norm_bound + abs(cutoff))


def multipliers(
    decomp: SpectralDecomposition, cutoff: float, norm_bound: float, poly, target: str = LOW
) -> np.ndarray:
    """Eigenvalue multipliers of 1/2 (I -/+ S[(H - cutoff)/(lambda + |cutoff|)])."""
    x = _scaled(decomp, cutoff, norm_bound)
    s = poly(x) if poly is not None else exact_step(x)
    if target == LOW:
        return 0.5 * (1 - s)
    if target == COMPLEMENT:
        return 0.5 * (1 + s)
    raise ValueError(f"unknown target {target!r}")


def apply_half_projector(
    decomp: SpectralDecomposition,
    cutoff: float,
    norm_bound: float,
    poly: SignPolynomial | None,
    psi: Wavefunction | np.ndarray,
    target: str = LOW,
) -> ProjectionOutcome:
    """Apply the half projector and measure the guarantees at the shifted cutoffs.

    For the low-energy target, ``residual`` is the weight above cutoff + delta (lambda + |cutoff|),
    ``retained`` the weight at or below it and ``gamma`` the input weight at or below
    cutoff - delta (lambda + |cutoff|).  The complement target mirrors all three.
    ``poly=None`` uses the exact step function.
    """
    vec = psi.amplitudes if isinstance(psi, Wavefunction) else np.asarray(psi)
    if abs(np.linalg.norm(vec) - 1) > 1e-12:
        raise ValueError("input state must be normalized")
    if not decomp.complete:
        raise ValueError("projector simulation needs the full spectrum")
    V = decomp.eigenvectors
    alpha = V.conj().T @ vec
    m = multipliers(decomp, cutoff, norm_bound, poly, target)
    beta = m * alpha
    out = V @ beta
    delta = poly.delta if poly is not None else 0.0
    width = delta * (norm_bound + abs(cutoff))
    E = decomp.eigenvalues
    if target == LOW:
        good_out, good_in = E <= cutoff + width, E <= cutoff - width
    else:
        good_out, good_in = E > cutoff - width, E > cutoff + width
    shifted = cutoff + width if target == LOW else cutoff - width
    return ProjectionOutcome(
        Wavefunction(decomp.basis, out, subnormalized=True),
        float(np.linalg.norm(beta[~good_out])),
        float(np.linalg.norm(beta[good_out])),
        target,
        shifted,
        float(np.linalg.norm(alpha[good_in])),
    )


def exact_projector(decomp: SpectralDecomposition, cutoff: float) -> np.ndarray:
    V = decomp.eigenvectors[:, decomp.eigenvalues <= cutoff]
    return V @ V.conj().T


# ---------------------------------------------------------------------------
# amplitude amplification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AmplificationPlan:
    gamma: float
    eps: float
    repetitions: int
    projector_queries: int
    appendix_iterations: int
    predicted_fidelity: float

    @property
    def formula_gap(self) -> int:
        """Difference between the resource-count bracket and the infidelity-based count."""
        return self.repetitions - self.appendix_iterations


def repetition_bracket(gamma: float, eps: float) -> int:
    """ceil(1 + (pi / (2 arcsin(gamma (1 - eps gamma))) - 1) / 2)."""
    a = gamma * (1 - eps * gamma)
    if not 0 < a <= 1:
        raise ValueError("need 0 < gamma (1 - eps gamma) <= 1")
    return math.ceil(1 + 0.5 * (math.pi / (2 * math.asin(a)) - 1) - 1e-12)


def iterations_from_infidelity(infidelity: float) -> int:
    """ceil((pi / arcsin sqrt(1 - I^2) - 1) / 2)."""
    if not 0 <= infidelity < 1:
        raise ValueError("infidelity must lie in [0, 1)")
    return math.ceil(0.5 * (math.pi / math.asin(math.sqrt(1 - infidelity**2)) - 1) - 1e-12)


def amplification_iterations(gamma: float, eps: float) -> AmplificationPlan:
    """Both repetition counts, plus the number of projector applications pi / (2 theta).

    The appendix count is evaluated at I = sqrt(1 - gamma^2).
    """
    if not 0 < gamma <= 1:
        raise ValueError("need 0 < gamma <= 1")
    a = gamma * (1 - eps * gamma)
    theta = math.asin(a)
    reps = repetition_bracket(gamma, eps)
    k = max(0, round(math.pi / (4 * theta) - 0.5))
    return AmplificationPlan(
        gamma,
        eps,
        reps,
        math.ceil(math.pi / (2 * theta) - 1e-12),
        iterations_from_infidelity(math.sqrt(max(0.0, 1 - gamma**2))),
        math.sin((2 * k + 1) * theta) ** 2,
    )


@dataclass
class AmplificationTrace:
    good_amplitude: np.ndarray
    infidelity: np.ndarray
    theta: float
    final_state: np.ndarray = field(repr=False)

    def predicted(self) -> np.ndarray:
        k = np.arange(len(self.good_amplitude))
        return np.sin((2 * k + 1) * self.theta)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "good_amplitude", "infidelity"])
            for k, (a, i) in enumerate(zip(self.good_amplitude, self.infidelity)):
                w.writerow([k, repr(float(a)), repr(float(i))])


def simulate_amplification(
    decomp: SpectralDecomposition,
    psi0: np.ndarray,
    multiplier: np.ndarray,
    good: np.ndarray,
    iterations: int,
) -> AmplificationTrace:
    """Brassard iterate Q = -A S_0 A^dag S_chi on flag (x) system, in the eigenbasis.

    A = U_theta (I (x) U_I) where U_theta is the unitary dilation
    [[P, sqrt(1 - P^2)], [sqrt(1 - P^2), -P]] of the diagonal multiplier P.  The good
    subspace is flag = 0.  ``infidelity`` is the weight of the flagged system state
    outside ``good`` (boolean mask over eigenstates), relative to its norm.
    """
    alpha = decomp.eigenvectors.conj().T @ np.asarray(psi0)
    p = np.asarray(multiplier, dtype=float)
    if np.any(np.abs(p) > 1 + 1e-12):
        raise ValueError("multipliers must lie in [-1, 1]")
    q = np.sqrt(np.clip(1 - p**2, 0.0, None))
    phi = np.concatenate([p * alpha, q * alpha])  # A |0>|0>
    dim = len(alpha)
    state = phi.copy()
    amps, infid = [], []

    def record(v):
        flagged = v[:dim]
        a = np.linalg.norm(flagged)
        amps.append(a)
        infid.append(np.linalg.norm(flagged[~good]) / a if a > 0 else 1.0)

    record(state)
    for _ in range(iterations):
        chi = state.copy()
        chi[dim:] *= -1  # S_chi: +1 on flag 0
        state = -(2 * phi * np.vdot(phi, chi) - chi)
        record(state)
    theta = math.asin(min(1.0, float(np.linalg.norm(phi[:dim]))))
    final = decomp.eigenvectors @ state[:dim]
    return AmplificationTrace(np.array(amps), np.array(infid), theta, final)


def random_state_with_overlap(
    decomp: SpectralDecomposition, good: np.ndarray, gamma_min: float, rng: np.random.Generator
) -> np.ndarray:
    """Haar-like random real state whose weight on ``good`` eigenstates is >= gamma_min."""
    n_good = int(good.sum())
    if n_good == 0:
        raise ValueError("empty good subspace")
    g = rng.uniform(gamma_min, 1.0)
    a = np.zeros(len(good))
    u = rng.normal(size=n_good)
    a[good] = g * u / np.linalg.norm(u)
    if n_good < len(good):
        w = rng.normal(size=len(good) - n_good)
        a[~good] = math.sqrt(max(0.0, 1 - g * g)) * w / np.linalg.norm(w)
    else:
        a[good] /= np.linalg.norm(a[good])
    return decomp.eigenvectors @ a
