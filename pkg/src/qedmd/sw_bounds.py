"""Strong-coupling band bounds, product-state infidelity series and their extrapolation.

Energies handed to these helpers are in units of ``t``; band intervals are in the
U-scaled units of H / U.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .lattice import (
    FockBasis,
    LatticeSpec,
    SpectralDecomposition,
    build_hubbard,
    diagonalize,
    hubbard_norm,
    neel_occupations,
    product_state,
    _double_occ_diag,
)
from .projector import iterations_from_infidelity

DENSE_LIMIT = 8192


@dataclass(frozen=True)
class BandBound:
    m: int
    lower: float
    upper: float

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack

    def distance(self, value: float) -> float:
        """Zero inside the interval, otherwise the distance to it."""
        return max(self.lower - value, value - self.upper, 0.0)


def band_bounds(m: int, sites: int, p: float, t: float, U: float) -> BandBound:
    """[m - 3(2m + pN) t/U, m + 3(2m + pN) t/U] for double-occupancy sector m."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if U <= 0 or t <= 0:
        raise ValueError("t and U must be positive")
    half = 3 * (2 * m + p * sites) * t / U
    return BandBound(m, m - half, m + half)


def containment_slack(
    eigenvalues: np.ndarray, sites: int, p: float, t: float, U: float, m_max: int | None = None
) -> np.ndarray:
    """Per eigenvalue, the scaled distance to the nearest band interval."""
    m_max = sites if m_max is None else m_max
    bands = [band_bounds(m, sites, p, t, U) for m in range(m_max + 1)]
    scaled = np.asarray(eigenvalues, dtype=float) / U
    return np.array([min(b.distance(e) for b in bands) for e in scaled])


def lower_band_edge(eigenvalues: np.ndarray, U: float) -> float:
    """Cutoff in the largest spectral gap whose midpoint lies within U of the ground energy.

    The window keeps the search on the gap between the lowest band and the first
    doubly-occupied band rather than a gap between higher bands.
    """
    w = np.sort(np.asarray(eigenvalues, dtype=float))
    if len(w) < 2:
        raise ValueError("need at least two eigenvalues")
    gaps = np.diff(w)
    mids = 0.5 * (w[1:] + w[:-1])
    gaps = np.where(mids <= w[0] + U, gaps, -np.inf)
    k = int(np.argmax(gaps))
    return float(mids[k])


def compute_infidelities(decomp: SpectralDecomposition, cutoff: float, states: np.ndarray) -> np.ndarray:
    """||(1 - P_cutoff) psi|| for each column (or basis index) in ``states``.

    ``states`` is either an integer index array of basis configurations or a
    matrix whose columns are normalized state vectors.
    """
    if not decomp.complete and decomp.eigenvalues.max() <= cutoff:
        raise ValueError("partial spectrum does not reach past the cutoff")
    keep = decomp.eigenvalues <= cutoff
    vecs = decomp.eigenvectors[:, keep]
    states = np.asarray(states)
    if states.ndim == 1 and np.issubdtype(states.dtype, np.integer):
        inside = np.linalg.norm(vecs[states, :], axis=1) ** 2
    else:
        inside = np.linalg.norm(vecs.conj().T @ states, axis=0) ** 2
    return np.sqrt(np.clip(1.0 - inside, 0.0, 1.0))


@dataclass(frozen=True)
class SizePoint:
    sites: int
    cutoff: float
    max_m0: float
    mean_m0: float
    min_m_positive: float
    n_m0: int


def _half_filled_sector(sites: int) -> FockBasis:
    return FockBasis.sector(sites, sites // 2, sites // 2)


def size_point(sites: int, U: float, t: float = 1.0, geometry: str = "ladder",
               boundary: str = "open") -> SizePoint:
    """Product-state infidelities at the lower band edge for one half-filled lattice (S_z = 0)."""
    spec = LatticeSpec(sites, geometry, boundary)
    basis = _half_filled_sector(sites)
    m = _double_occ_diag(basis)
    # the lowest band holds one state per m = 0 configuration; a few extra locate the gap
    k = int(np.count_nonzero(m == 0)) + 8
    decomp = diagonalize(build_hubbard(spec, t, U, basis=basis), k if k < basis.dim - 1 else None,
                         dense_limit=DENSE_LIMIT)
    cutoff = lower_band_edge(decomp.eigenvalues, U)
    inf = compute_infidelities(decomp, cutoff, np.arange(basis.dim))
    zero = inf[m == 0]
    pos = inf[m > 0]
    return SizePoint(sites, cutoff, float(zero.max()), float(zero.mean()),
                     float(pos.min()) if len(pos) else math.nan, int(len(zero)))


def edge_series(U: float, sizes: Sequence[int] = (2, 4, 6, 8), t: float = 1.0, geometry: str = "ladder",
                boundary: str = "open", jobs: int = 1) -> list[SizePoint]:
    """size_point over several lattice sizes, optionally in worker processes."""
    args = [(n, U, t, geometry, boundary) for n in sizes]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(size_point, *zip(*args)))
    return [size_point(*a) for a in args]


@dataclass(frozen=True)
class InfidelityFit:
    """Least-squares line I(N) = intercept + slope * N through the per-size maxima."""

    slope: float
    intercept: float
    residuals: tuple[float, ...]
    sizes: tuple[int, ...]
    values: tuple[float, ...]
    U_over_t: float | None = None
    cutoff_rule: str = "lower-band-edge"

    def __call__(self, sites: float) -> float:
        return self.intercept + self.slope * sites

    @property
    def c_estimate(self) -> float | None:
        """Slope expressed as the constant C in C N t / U."""
        return None if self.U_over_t is None else self.slope * self.U_over_t


def fit_upper_edge(sizes: Sequence[int], maxima: Sequence[float], U_over_t: float | None = None,
                   cutoff_rule: str = "lower-band-edge") -> InfidelityFit:
    x = np.asarray(sizes, dtype=float)
    y = np.asarray(maxima, dtype=float)
    if len(x) != len(y):
        raise ValueError("sizes and maxima differ in length")
    if len(x) < 3 or len(np.unique(x)) < 2:
        raise ValueError("degenerate series: need at least three points over distinct sizes")
    A = np.column_stack([np.ones_like(x), x])
    (c0, c1), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (c0 + c1 * x)
    return InfidelityFit(float(c1), float(c0), tuple(map(float, res)), tuple(int(s) for s in sizes),
                         tuple(map(float, y)), U_over_t, cutoff_rule)


@dataclass(frozen=True)
class ExtrapolationResult:
    target_sites: int
    infidelity: float
    n_iter: int | None
    out_of_range: bool
    gamma: float | None = None
    gap: float | None = None
    delta: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def extrapolate_niter(fit: InfidelityFit, target_sites: int) -> ExtrapolationResult:
    """Evaluate the edge line at ``target_sites`` and convert to amplification iterations.

    A negative prediction is clipped to zero; a prediction >= 1 is flagged out of range.
    """
    value = fit(target_sites)
    if value >= 1:
        return ExtrapolationResult(target_sites, float(value), None, True)
    value = max(0.0, float(value))
    return ExtrapolationResult(target_sites, value, iterations_from_infidelity(value), False)


# ---------------------------------------------------------------------------
# ground-state overlap and gap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroundPoint:
    sites: int
    gamma: float
    gap: float


def ground_point(sites: int, U: float, t: float = 1.0, geometry: str = "ladder",
                 boundary: str = "open") -> GroundPoint:
    """Neel overlap with the ground state and the gap to the first excited state (S_z = 0)."""
    spec = LatticeSpec(sites, geometry, boundary)
    basis = _half_filled_sector(sites)
    H = build_hubbard(spec, t, U, basis=basis)
    decomp = diagonalize(H, 2 if basis.dim > 2 else None)
    neel = product_state(basis, neel_occupations(spec)).amplitudes
    gamma = abs(float(decomp.eigenvectors[:, 0] @ neel))
    return GroundPoint(sites, gamma, float(decomp.eigenvalues[1] - decomp.eigenvalues[0]))


def ground_series(U: float, sizes: Sequence[int] = (2, 4, 6, 8), t: float = 1.0, geometry: str = "ladder",
                  boundary: str = "open", jobs: int = 1) -> list[GroundPoint]:
    args = [(n, U, t, geometry, boundary) for n in sizes]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(ground_point, *zip(*args)))
    return [ground_point(*a) for a in args]


@dataclass(frozen=True)
class GroundStateFit:
    """gamma(N) = a exp(-b N); gap(N) = c / N."""

    a: float
    b: float
    c: float
    target: ExtrapolationResult


def ground_state_extrapolation(
    sizes: Sequence[int], gammas: Sequence[float], gaps: Sequence[float], target_sites: int = 22,
    t: float = 1.0, U: float = 12.0,
) -> GroundStateFit:
    """Exponential fit for the overlap, 1/N fit for the gap, both evaluated at ``target_sites``.

    The reported delta is the gap divided by the block-encoding norm 4Nt + NU.
    """
    n = np.asarray(sizes, dtype=float)
    g = np.asarray(gammas, dtype=float)
    d = np.asarray(gaps, dtype=float)
    if not (len(n) == len(g) == len(d)):
        raise ValueError("series lengths differ")
    if len(n) < 3:
        raise ValueError("need at least three sizes")
    if np.any(n <= 0) or np.any(g <= 0) or np.any(d <= 0):
        raise ValueError("fit inputs must be positive")
    slope, intercept = np.polyfit(n, np.log(g), 1)
    a, b = math.exp(intercept), -float(slope)
    inv = 1.0 / n
    c = float(inv @ d / (inv @ inv))
    gamma = a * math.exp(-b * target_sites)
    gap = c / target_sites
    infid = math.sqrt(max(0.0, 1 - gamma**2))
    res = ExtrapolationResult(target_sites, infid, iterations_from_infidelity(infid) if infid < 1 else None,
                              infid >= 1, gamma, gap, gap / hubbard_norm(target_sites, t, U))
    return GroundStateFit(a, b, c, res)


# ---------------------------------------------------------------------------
# doping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DopingPoint:
    electrons: int
    doping: float
    cutoff: float
    max_m0: float
    mean_m0: float


def doping_point(sites: int, electrons: int, U: float, t: float = 1.0, geometry: str = "chain",
                 boundary: str = "open") -> DopingPoint:
    """m = 0 product-state infidelities at cutoff 3 p N t.

    At p = 0 that cutoff sits exactly on the flat lower band, so the lower band edge
    is used instead.
    """
    spec = LatticeSpec(sites, geometry, boundary, electrons=electrons)
    p = (sites - electrons) / sites
    basis = FockBasis.sector(sites, (electrons + 1) // 2, electrons // 2)
    decomp = diagonalize(build_hubbard(spec, t, U, basis=basis), dense_limit=DENSE_LIMIT)
    cutoff = 3 * p * sites * t if p > 0 else lower_band_edge(decomp.eigenvalues, U)
    zero = np.flatnonzero(_double_occ_diag(basis) == 0)
    inf = compute_infidelities(decomp, cutoff, zero)
    return DopingPoint(electrons, p, float(cutoff), float(inf.max()), float(inf.mean()))


def write_series_csv(points: Sequence, path) -> None:
    rows = [asdict(p) for p in points]
    if not rows:
        raise ValueError("empty series")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        keys = list(rows[0])
        w.writerow(keys + ["units"])
        for r in rows:
            w.writerow([repr(r[k]) if isinstance(r[k], float) else r[k] for k in keys] + ["t"])
