"""Density matrix downfolding: sampling, regression and the compressibility verdict loop."""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .lattice import (
    Basis,
    LatticeSpec,
    ManyBodyOperator,
    SpectralDecomposition,
    build_descriptor,
    expectations,
)

log = logging.getLogger(__name__)

COLLINEARITY_COND = 1e8
EQUIVALENCE_RTOL = 1e-8

LOW = "low-energy"
COMPLEMENT = "complement"

CASE_A = "A-true-negative"
CASE_B1_FEWER = "B1-fewer-descriptors"
CASE_B1_UNDERSAMPLING = "B1-undersampling"
CASE_B2 = "B2-true-positive"


@dataclass(frozen=True)
class DescriptorSpec:
    kind: str
    indices: tuple[int, ...] = ()
    label: str = ""

    def __post_init__(self):
        if not self.label:
            suffix = f"{self.indices}" if self.indices else ""
            object.__setattr__(self, "label", f"{self.kind}{suffix}")


class DescriptorPool:
    """Ordered, uniquely labelled descriptor pool bound to one lattice.

    Operators are built lazily per symmetry sector.  ``max_size`` bounds |Pi| by a
    polynomial in N (default (2N)^4, the size of a 2-RDM pool).
    """

    def __init__(
        self,
        lattice: LatticeSpec,
        descriptors: Sequence[DescriptorSpec | str],
        max_size: int | None = None,
    ):
        specs = tuple(d if isinstance(d, DescriptorSpec) else DescriptorSpec(d) for d in descriptors)
        labels = [d.label for d in specs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"descriptor labels must be unique: {labels}")
        bound = max_size if max_size is not None else (2 * lattice.sites) ** 4
        if len(specs) > bound:
            raise ValueError(f"pool size {len(specs)} exceeds polynomial bound {bound}")
        self.lattice = lattice
        self.descriptors = specs
        self._cache: dict[tuple, list[ManyBodyOperator]] = {}

    def __len__(self) -> int:
        return len(self.descriptors)

    def __iter__(self):
        return iter(self.descriptors)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(d.label for d in self.descriptors)

    def operators(self, basis: Basis) -> list[ManyBodyOperator]:
        key = (basis.sites, getattr(basis, "n_up", None), getattr(basis, "n_down", None))
        if key not in self._cache:
            self._cache[key] = [
                build_descriptor(self.lattice, d.kind, basis, d.indices) for d in self.descriptors
            ]
        return self._cache[key]

    def evaluate(self, basis: Basis, vecs: np.ndarray) -> np.ndarray:
        """Descriptor values, shape (n_states, |Pi|)."""
        vecs = vecs.reshape(basis.dim, -1)
        return np.column_stack([expectations(op, vecs) for op in self.operators(basis)])

    def subset(self, labels: Iterable[str]) -> "DescriptorPool":
        by_label = {d.label: d for d in self.descriptors}
        return DescriptorPool(self.lattice, [by_label[l] for l in labels])


@dataclass
class SampleRecord:
    state_id: str
    descriptors: np.ndarray
    energy: float
    membership: str
    labels: tuple[str, ...] = ()
    noise: dict | None = None
    vector: np.ndarray | None = field(default=None, repr=False, compare=False)
    basis: Basis | None = field(default=None, repr=False, compare=False)

    def to_json(self) -> dict:
        return {
            "state_id": self.state_id,
            "descriptors": [float(x) for x in self.descriptors],
            "labels": list(self.labels),
            "energy": float(self.energy),
            "energy_units": "t",
            "membership": self.membership,
            "noise": self.noise,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SampleRecord":
        return cls(
            data["state_id"],
            np.asarray(data["descriptors"], dtype=float),
            float(data["energy"]),
            data["membership"],
            tuple(data.get("labels", ())),
            data.get("noise"),
        )


@dataclass
class SampleSet:
    records: list[SampleRecord]
    warning: str | None = None

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]


def _as_list(spectra) -> list[SpectralDecomposition]:
    if isinstance(spectra, SpectralDecomposition):
        return [spectra]
    return list(spectra)


def _sector_tag(basis: Basis) -> str:
    return f"({getattr(basis, 'n_up', '-')},{getattr(basis, 'n_down', '-')})"


def _candidates(spectra, pool: DescriptorPool | None, keep) -> list[SampleRecord]:
    out = []
    for dec in _as_list(spectra):
        idx = [k for k, e in enumerate(dec.eigenvalues) if keep(e)]
        if not idx:
            continue
        vecs = dec.eigenvectors[:, idx]
        vals = pool.evaluate(dec.basis, vecs) if pool is not None else np.zeros((len(idx), 0))
        labels = pool.labels if pool is not None else ()
        for row, k in enumerate(idx):
            out.append(
                SampleRecord(
                    f"{_sector_tag(dec.basis)}#{k}",
                    vals[row],
                    float(dec.eigenvalues[k]),
                    "",
                    labels,
                    vector=vecs[:, row],
                    basis=dec.basis,
                )
            )
    out.sort(key=lambda r: (r.energy, r.state_id))
    return out


def _farthest_points(
    points: np.ndarray, count: int, anchor: np.ndarray | None = None
) -> list[int]:
    """Greedy max-min selection; ties go to the lowest index."""
    n = len(points)
    if count >= n:
        return list(range(n))
    span = points.max(axis=0) - points.min(axis=0) if n else np.ones(points.shape[1])
    span = np.where(span > 0, span, 1.0)
    z = points / span
    if anchor is None:
        chosen = [0]
        dist = np.linalg.norm(z - z[0], axis=1)
    else:
        a = anchor / span
        dist = np.min(np.linalg.norm(z[:, None, :] - a[None, :, :], axis=2), axis=1)
        chosen = []
    while len(chosen) < count:
        d = dist.copy()
        d[chosen] = -np.inf
        nxt = int(np.argmax(d))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(z - z[nxt], axis=1))
    return chosen


def _select(cands, count, policy, columns, anchor=None) -> list[SampleRecord]:
    if policy == "eigenstates":
        return cands[:count]
    if policy != "image-saturating":
        raise ValueError(f"unknown sampling policy {policy!r}")
    if not cands:
        return []
    pts = np.array([c.descriptors[columns] for c in cands]) if columns else np.array(
        [[c.energy] for c in cands]
    )
    return [cands[i] for i in sorted(_farthest_points(pts, count, anchor))]


def sample_low_energy(
    spectra,
    cutoff: float,
    count: int,
    policy: str = "eigenstates",
    pool: DescriptorPool | None = None,
    ansatz: Sequence[str] | None = None,
) -> SampleSet:
    """Eigenstates with E <= cutoff.

    ``eigenstates`` takes the lowest ``count``; ``image-saturating`` greedily picks
    states spread out in the ansatz descriptor coordinates (farthest-point order,
    seeded by the lowest-energy state).
    """
    cands = _candidates(spectra, pool, lambda e: e <= cutoff)
    columns = _columns(pool, ansatz)
    chosen = _select(cands, count, policy, columns)
    for r in chosen:
        r.membership = LOW
    warning = None
    if len(chosen) < count:
        warning = f"only {len(chosen)} states below cutoff {cutoff:g} (requested {count})"
        log.warning(warning)
    return SampleSet(chosen, warning)


def sample_complement(
    spectra,
    cutoff: float,
    count: int,
    policy: str = "eigenstates",
    pool: DescriptorPool | None = None,
    ansatz: Sequence[str] | None = None,
    low_samples: Sequence[SampleRecord] | None = None,
) -> SampleSet:
    """Eigenstates with E > cutoff.

    ``image-saturating`` prefers complement states whose descriptor coordinates lie
    closest to the sampled low-energy image, then spreads out from there.
    """
    cands = _candidates(spectra, pool, lambda e: e > cutoff)
    columns = _columns(pool, ansatz)
    if policy == "image-saturating" and low_samples and cands:
        pts = np.array([c.descriptors[columns] for c in cands])
        low = np.array([s.descriptors[columns] for s in low_samples])
        lo, hi = low.min(axis=0), low.max(axis=0)
        inside = np.all((pts >= lo - 1e-12) & (pts <= hi + 1e-12), axis=1)
        order = [i for i in range(len(cands)) if inside[i]] + [
            i for i in range(len(cands)) if not inside[i]
        ]
        cands = [cands[i] for i in order]
        chosen = cands[:count] if inside.sum() >= count else _select(cands, count, policy, columns)
    else:
        chosen = _select(cands, count, policy, columns)
    for r in chosen:
        r.membership = COMPLEMENT
    warning = None
    if len(chosen) < count:
        warning = f"only {len(chosen)} states above cutoff {cutoff:g} (requested {count})"
        log.warning(warning)
    return SampleSet(chosen, warning)


def _columns(pool: DescriptorPool | None, ansatz: Sequence[str] | None) -> list[int]:
    if pool is None:
        return []
    labels = pool.labels
    if ansatz is None:
        return list(range(len(labels)))
    return [labels.index(a) for a in ansatz]


def evaluate_design(
    samples: Sequence[SampleRecord], pool: DescriptorPool
) -> tuple[np.ndarray, np.ndarray]:
    """X[i, j] = d_j[psi_i], y[i] = F_H[psi_i], rows in sample order, columns in pool order."""
    rows = []
    for s in samples:
        if s.vector is not None and s.basis is not None:
            rows.append(pool.evaluate(s.basis, s.vector)[0])
        elif tuple(s.labels) == pool.labels:
            rows.append(np.asarray(s.descriptors, dtype=float))
        else:
            by_label = dict(zip(s.labels, s.descriptors))
            try:
                rows.append(np.array([by_label[l] for l in pool.labels], dtype=float))
            except KeyError as exc:
                raise ValueError(f"sample {s.state_id} lacks descriptor {exc}") from None
    X = np.array(rows, dtype=float).reshape(len(samples), len(pool))
    y = np.array([s.energy for s in samples], dtype=float)
    return X, y


# ---------------------------------------------------------------------------
# regression
# ---------------------------------------------------------------------------


@dataclass
class RegressionFit:
    labels: tuple[str, ...]
    couplings: np.ndarray | None
    intercept: float | None
    eps_hat: float
    rank: int
    condition_number: float
    n_samples: int
    residuals: np.ndarray = field(repr=False)
    rank_deficient: bool = False
    penalty_min: float | None = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.couplings is None:
            raise ValueError("rank-deficient fit has no couplings")
        return np.asarray(X, dtype=float) @ self.couplings + (self.intercept or 0.0)

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "couplings": None if self.couplings is None else [float(g) for g in self.couplings],
            "intercept": self.intercept,
            "eps_hat": self.eps_hat,
            "rank": self.rank,
            "condition_number": self.condition_number,
            "n_samples": self.n_samples,
            "rank_deficient": self.rank_deficient,
            "penalty_min": self.penalty_min,
            "units": "t",
        }


def _design_condition(A: np.ndarray) -> tuple[int, float]:
    if A.size == 0:
        return 0, 1.0
    scale = np.linalg.norm(A, axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    s = np.linalg.svd(A / scale, compute_uv=False)
    tol = s.max() * max(A.shape) * np.finfo(float).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    cond = float(s.max() / s.min()) if s.min() > 0 else math.inf
    return rank, cond


def fit_linear(
    X: np.ndarray,
    y: np.ndarray,
    with_intercept: bool = True,
    labels: Sequence[str] | None = None,
) -> RegressionFit:
    """Ordinary least squares with max-abs-residual error bound."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    labels = tuple(labels) if labels is not None else tuple(f"d{j}" for j in range(p))
    need = p + (1 if with_intercept else 0)
    if n < need:
        raise ValueError(f"{n} samples cannot determine {need} parameters")
    A = np.column_stack([X, np.ones(n)]) if with_intercept else X
    rank, cond = _design_condition(A)
    deficient = rank < A.shape[1]
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    eps_hat = float(np.max(np.abs(resid))) if n else 0.0
    if deficient:
        return RegressionFit(labels, None, None, eps_hat, rank, cond, n, resid, True)
    g = coef[:p]
    c = float(coef[p]) if with_intercept else 0.0
    return RegressionFit(labels, g, c, eps_hat, rank, cond, n, resid)


def minimax_residual(X: np.ndarray, y: np.ndarray, with_intercept: bool = True) -> float:
    """Smallest achievable max-abs residual over all couplings (Chebyshev fit, as an LP).

    Unlike the least-squares ``eps_hat`` it can only grow when samples are appended,
    and it lower-bounds ``eps_hat`` on the same data.
    """
    from scipy.optimize import linprog

    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    A = np.column_stack([X, np.ones(len(y))]) if with_intercept else X
    n, p = A.shape
    # variables (coef, s): minimize s subject to |y - A coef| <= s
    cost = np.zeros(p + 1)
    cost[-1] = 1.0
    ones = np.ones((n, 1))
    A_ub = np.vstack([np.hstack([A, -ones]), np.hstack([-A, -ones])])
    b_ub = np.concatenate([y, -y])
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * p + [(0, None)], method="highs")
    if res.status != 0:
        raise RuntimeError(f"minimax fit failed: {res.message}")
    return float(res.x[-1])


def fit_samples(
    samples: Sequence[SampleRecord], pool: DescriptorPool, ansatz: Sequence[str]
) -> RegressionFit:
    X, y = evaluate_design(samples, pool)
    cols = _columns(pool, ansatz)
    return fit_linear(X[:, cols], y, True, ansatz)


# ---------------------------------------------------------------------------
# augmented effective model and verdicts
# ---------------------------------------------------------------------------


@dataclass
class EffectiveModel:
    """H'' = P H' P + (1 - P)(cutoff + sigma)(1 - P) with P a box test in descriptor space.

    ``hull_labels`` are the coordinates of the membership box, ``fit.labels`` the
    coordinates of the fitted model; both index into ``labels``.
    """

    fit: RegressionFit
    labels: tuple[str, ...]
    hull_labels: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray
    cutoff: float
    sigma: float

    def inside(self, descriptors: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(descriptors)
        cols = [self.labels.index(l) for l in self.hull_labels]
        pts = d[:, cols]
        span = np.maximum(self.upper - self.lower, 1e-12)
        tol = 1e-9 * span
        return np.all((pts >= self.lower - tol) & (pts <= self.upper + tol), axis=1)

    def energy(self, descriptors: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(descriptors)
        cols = [self.labels.index(l) for l in self.fit.labels]
        fitted = self.fit.predict(d[:, cols])
        return np.where(self.inside(d), fitted, self.cutoff + self.sigma)

    def to_json(self) -> dict:
        return {
            "fit": self.fit.to_json(),
            "hull_labels": list(self.hull_labels),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "cutoff": self.cutoff,
            "sigma": self.sigma,
        }


def augment_effective(
    fit: RegressionFit,
    low_samples: Sequence[SampleRecord],
    cutoff: float,
    sigma: float,
    hull_labels: Sequence[str] | None = None,
) -> EffectiveModel:
    """Box hull of the sampled low-energy image; states outside get cutoff + sigma.

    By default the box spans every pool coordinate carried by the samples.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if not low_samples:
        raise ValueError("empty hull: no low-energy samples")
    labels = tuple(low_samples[0].labels)
    hull = tuple(hull_labels) if hull_labels is not None else labels
    cols = [labels.index(l) for l in hull]
    pts = np.array([s.descriptors[cols] for s in low_samples])
    return EffectiveModel(fit, labels, hull, pts.min(axis=0), pts.max(axis=0), cutoff, sigma)


def find_intruders(model: EffectiveModel, complement: Sequence[SampleRecord]) -> list[str]:
    """Complement states inside the hull whose modelled energy is not above the cutoff."""
    if not complement:
        return []
    D = np.array([s.descriptors for s in complement])
    e = model.energy(D)
    inside = model.inside(D)
    return [s.state_id for s, ins, en in zip(complement, inside, e) if ins and en <= model.cutoff]


@dataclass
class CompressibilityVerdict:
    case: str
    evidence: dict

    def to_json(self) -> dict:
        return {"case": self.case, "evidence": _jsonable(self.evidence)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _penalty(fit, low, comp, cutoff, sigma, hull_labels):
    if not comp:
        return math.inf, []
    model = augment_effective(fit, low, cutoff, sigma, hull_labels)
    D = np.array([s.descriptors for s in comp])
    return float(model.energy(D).min()), find_intruders(model, comp)


def classify_fit(
    fit: RegressionFit,
    low_samples: Sequence[SampleRecord],
    complement_samples: Sequence[SampleRecord],
    cutoff: float,
    eps_target: float,
    norm_bound: float,
    *,
    sigma: float | None = None,
    hull_labels: Sequence[str] | None = None,
    collinearity_cond: float = COLLINEARITY_COND,
) -> CompressibilityVerdict:
    """Assign case A / B1-fewer / B1-undersampling / B2 to a fitted ansatz.

    B1-fewer: dropping some descriptor keeps the residual below eps_target.
    B1-undersampling: ill-conditioned design, or another pool subset of the same size
    reproduces the ansatz predictions on the low-energy samples and is not separated
    from it by the complement samples.
    """
    sigma = sigma if sigma is not None else (norm_bound - cutoff) / 2.0
    low = list(low_samples)
    comp = list(complement_samples)
    labels = tuple(low[0].labels) if low else ()
    evidence: dict = {
        "ansatz": list(fit.labels),
        "eps_hat": fit.eps_hat,
        "eps_target": eps_target,
        "condition_number": fit.condition_number,
        "rank": fit.rank,
        "n_low": len(low),
        "n_complement": len(comp),
    }
    if fit.rank_deficient:
        evidence["collinear"] = list(fit.labels)
        return CompressibilityVerdict(CASE_B1_UNDERSAMPLING, evidence)
    if not fit.eps_hat < eps_target:
        return CompressibilityVerdict(CASE_A, evidence)

    X = np.array([s.descriptors for s in low])
    y = np.array([s.energy for s in low])
    col = {l: i for i, l in enumerate(labels)}

    removable = []
    if len(fit.labels) >= 1:
        for drop in fit.labels:
            rest = [l for l in fit.labels if l != drop]
            sub = fit_linear(X[:, [col[l] for l in rest]], y, True, rest)
            if sub.eps_hat < eps_target:
                removable.append(drop)
    evidence["removable"] = removable

    penalty_min, intruders = _penalty(fit, low, comp, cutoff, sigma, hull_labels)
    fit.penalty_min = penalty_min
    evidence["penalty_min"] = penalty_min
    evidence["intruders"] = intruders

    if removable:
        return CompressibilityVerdict(CASE_B1_FEWER, evidence)

    if fit.condition_number > collinearity_cond:
        evidence["collinear"] = list(fit.labels)
        return CompressibilityVerdict(CASE_B1_UNDERSAMPLING, evidence)

    equivalent = []
    pred = fit.predict(X[:, [col[l] for l in fit.labels]])
    scale = max(np.ptp(y), abs(fit.eps_hat), 1e-12)
    for alt in itertools.combinations(labels, len(fit.labels)):
        if set(alt) == set(fit.labels):
            continue
        alt_fit = fit_linear(X[:, [col[l] for l in alt]], y, True, alt)
        if alt_fit.rank_deficient:
            continue
        alt_pred = alt_fit.predict(X[:, [col[l] for l in alt]])
        if np.max(np.abs(alt_pred - pred)) > EQUIVALENCE_RTOL * scale:
            continue
        alt_penalty, _ = _penalty(alt_fit, low, comp, cutoff, sigma, hull_labels)
        if alt_penalty > cutoff:
            equivalent.append(list(alt))
    evidence["equivalent_subsets"] = equivalent
    if equivalent:
        return CompressibilityVerdict(CASE_B1_UNDERSAMPLING, evidence)

    if intruders or not penalty_min > cutoff:
        return CompressibilityVerdict(CASE_B1_UNDERSAMPLING, evidence)
    return CompressibilityVerdict(CASE_B2, evidence)


# ---------------------------------------------------------------------------
# iterative discovery
# ---------------------------------------------------------------------------


@dataclass
class DiscoveryResult:
    fit: RegressionFit | None
    verdict: CompressibilityVerdict | None
    trace: list[dict]
    samples: list[SampleRecord]
    exhausted: bool

    @property
    def report(self) -> str:
        if self.exhausted:
            return "not compressible at the requested (cutoff, kappa, eps) with this pool"
        return f"{self.verdict.case}: {', '.join(self.fit.labels)}"

    def trace_lines(self) -> list[str]:
        return [json.dumps(_jsonable(t), sort_keys=True) for t in self.trace]


def discover(
    pool: DescriptorPool,
    spectra,
    cutoff: float,
    eps_target: float,
    budget: int | None = None,
    *,
    norm_bound: float,
    samples_per_iteration: int | None = None,
    complement_per_iteration: int | None = None,
    max_kappa: int | None = None,
) -> DiscoveryResult:
    """Iterate ansatz subsets (increasing kappa, then lexicographic in pool order).

    Samples from every iteration are concatenated.  Stops at the first B2 verdict, or
    at a B1-fewer verdict whose every descriptor is removable (the intercept alone
    meets the target).
    """
    labels = pool.labels
    max_kappa = max_kappa or len(labels)
    total = sum(math.comb(len(labels), k) for k in range(1, max_kappa + 1))
    budget = total if budget is None else budget
    if budget > total:
        raise ValueError(f"budget {budget} exceeds the {total} available ansatz subsets")
    spectra = _as_list(spectra)
    low: dict[str, SampleRecord] = {}
    comp: dict[str, SampleRecord] = {}
    trace: list[dict] = []
    it = 0
    for kappa in range(1, max_kappa + 1):
        for ansatz in itertools.combinations(labels, kappa):
            if it >= budget:
                return DiscoveryResult(None, None, trace, list(low.values()) + list(comp.values()), True)
            it += 1
            n_low = samples_per_iteration or (2**kappa + kappa + 1)
            n_comp = complement_per_iteration or n_low
            new_low = sample_low_energy(spectra, cutoff, n_low, "image-saturating", pool, ansatz)
            for r in new_low:
                low.setdefault(r.state_id, r)
            new_comp = sample_complement(
                spectra, cutoff, n_comp, "image-saturating", pool, ansatz, list(low.values())
            )
            for r in new_comp:
                comp.setdefault(r.state_id, r)
            lows = sorted(low.values(), key=lambda r: (r.energy, r.state_id))
            comps = sorted(comp.values(), key=lambda r: (r.energy, r.state_id))
            if len(lows) < kappa + 1:
                trace.append({"iteration": it, "ansatz": ansatz, "case": "skipped-undersampled"})
                continue
            fit = fit_samples(lows, pool, ansatz)
            verdict = classify_fit(fit, lows, comps, cutoff, eps_target, norm_bound)
            trace.append(
                {
                    "iteration": it,
                    "ansatz": list(ansatz),
                    "case": verdict.case,
                    "eps_hat": fit.eps_hat,
                    "n_low": len(lows),
                    "n_complement": len(comps),
                    "couplings": None if fit.couplings is None else fit.couplings.tolist(),
                }
            )
            if verdict.case == CASE_B2:
                return DiscoveryResult(fit, verdict, trace, lows + comps, False)
            if verdict.case == CASE_B1_FEWER and set(verdict.evidence["removable"]) == set(ansatz):
                # a constant already meets the target: nothing smaller to search for
                return DiscoveryResult(fit, verdict, trace, lows + comps, False)
    return DiscoveryResult(None, None, trace, list(low.values()) + list(comp.values()), True)


# ---------------------------------------------------------------------------
# functional-matching consistency
# ---------------------------------------------------------------------------


def functional_matching_check(
    H: ManyBodyOperator,
    decomp: SpectralDecomposition,
    pool: DescriptorPool,
    fit: RegressionFit,
    states: Sequence[int] | None = None,
) -> dict[str, np.ndarray]:
    """Per-eigenstate |eps[psi_j]|, ||d eps / d<psi|||, and ||(H' + c - E_j) psi_j||.

    With statevector access the gradient of the error functional at an eigenstate is
    ((H - F_H) - (H' - F_H')) psi_j, so it is evaluated exactly.
    """
    idx = list(range(len(decomp))) if states is None else list(states)
    ops = {op.label: op for op in pool.operators(decomp.basis)}
    spec_by_label = {d.label: d for d in pool.descriptors}
    h_prime = None
    for g, lab in zip(fit.couplings, fit.labels):
        op = ops[build_descriptor(pool.lattice, spec_by_label[lab].kind, decomp.basis, spec_by_label[lab].indices).label]
        term = g * op.matrix
        h_prime = term if h_prime is None else h_prime + term
    c = fit.intercept
    eps, grad, resid = [], [], []
    for k in idx:
        v = decomp.eigenvectors[:, k]
        e = decomp.eigenvalues[k]
        hpv = h_prime @ v
        f_hp = float(np.vdot(v, hpv).real)
        eps.append(e - f_hp - c)
        gvec = (H.matrix @ v - e * v) - (hpv - f_hp * v)
        grad.append(np.linalg.norm(gvec))
        resid.append(np.linalg.norm(hpv + c * v - e * v))
    return {"eps": np.array(eps), "grad": np.array(grad), "residual": np.array(resid)}


def dump_samples(samples: Iterable[SampleRecord], path) -> None:
    with open(path, "w") as fh:
        json.dump([s.to_json() for s in samples], fh, indent=1)


def load_samples(path) -> list[SampleRecord]:
    with open(path) as fh:
        return [SampleRecord.from_json(d) for d in json.load(fh)]
