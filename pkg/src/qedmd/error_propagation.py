"""Propagation of observable-estimation and state-preparation errors into fitted couplings."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dmd import DescriptorPool, SampleRecord, evaluate_design, fit_linear

TRUNCATION_DIRECTION = "toward-zero"


@dataclass(frozen=True)
class ErrorBudget:
    """Error allowances: observable estimation (energy, descriptors), state preparation, rotations."""

    eps_oe_h: float
    eps_oe_d: float
    eps_sp: float
    eps_r: float
    mode: str = "explicit"

    def __post_init__(self):
        for name in ("eps_oe_h", "eps_oe_d", "eps_sp", "eps_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.mode == "preset-ratios":
            chain = (
                ("eps_oe_d", self.eps_oe_h / 10),
                ("eps_sp", self.eps_oe_h / 1000),
                ("eps_r", self.eps_oe_h / 10000),
            )
            for name, expect in chain:
                if not math.isclose(getattr(self, name), expect, rel_tol=1e-12):
                    raise ValueError(f"{name} breaks the preset ratio chain")
        elif self.mode != "explicit":
            raise ValueError(f"unknown budget mode {self.mode!r}")

    @classmethod
    def preset(cls, eps_oe_h: float) -> "ErrorBudget":
        """eps_d = eps_H/10, eps_sp = eps_d/100, eps_R = eps_sp/10."""
        eps_d = eps_oe_h / 10
        eps_sp = eps_d / 100
        return cls(eps_oe_h, eps_d, eps_sp, eps_sp / 10, "preset-ratios")


@dataclass(frozen=True)
class ParamErrorBound:
    labels: tuple[str, ...]
    ranges: tuple[float, ...]
    bounds: tuple[float, ...]

    @property
    def infinite(self) -> tuple[bool, ...]:
        return tuple(math.isinf(b) for b in self.bounds)


def truncate_b_bits(value: float, b: int) -> float:
    """Keep b binary fraction digits, rounding toward zero."""
    if b < 1:
        raise ValueError("b must be >= 1")
    scale = 2**b
    return math.trunc(value * scale) / scale


def bound_entry_errors(
    budget: ErrorBudget, lambda_h: float, lambda_d: float
) -> tuple[float, float]:
    """Worst-case errors on a response entry y_i and a design entry X_ij."""
    sp_term = 2 * budget.eps_sp + budget.eps_sp**2
    return budget.eps_oe_h + lambda_h * sp_term, budget.eps_oe_d + lambda_d * sp_term


def bound_param_error(
    eps_oe_h: float, samples: Sequence[SampleRecord] | np.ndarray, labels: Sequence[str] | None = None
) -> ParamErrorBound:
    """Per-coupling bound 2 eps / (max d_j - min d_j) over the low-energy samples."""
    X = _descriptor_matrix(samples)
    if X.shape[0] < 2:
        raise ValueError("at least two samples are needed")
    if labels is None:
        labels = tuple(samples[0].labels) if isinstance(samples[0], SampleRecord) else tuple(
            f"d{j}" for j in range(X.shape[1])
        )
    ranges = X.max(axis=0) - X.min(axis=0)
    bounds = tuple(2 * eps_oe_h / r if r > 0 else math.inf for r in ranges)
    return ParamErrorBound(tuple(labels), tuple(float(r) for r in ranges), bounds)


def _descriptor_matrix(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return np.atleast_2d(samples).astype(float)
    return np.array([s.descriptors for s in samples], dtype=float)


@dataclass(frozen=True)
class SweepRow:
    b: int
    label: str
    observed: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.observed / self.bound if self.bound > 0 else math.nan


def run_truncation_sweep(
    samples: Sequence[SampleRecord],
    pool: DescriptorPool,
    bits: Sequence[int] = range(5, 16),
    perturb_descriptors: bool = False,
) -> list[SweepRow]:
    """Refit with b-bit truncated energies and compare to the exact fit.

    Descriptors are left exact unless ``perturb_descriptors`` is set, in which case
    they are truncated to the same b bits.
    """
    X, y = evaluate_design(samples, pool)
    exact = fit_linear(X, y, True, pool.labels)
    if exact.couplings is None:
        raise ValueError("exact design is rank deficient")
    rows = []
    for b in bits:
        yb = np.array([truncate_b_bits(v, b) for v in y])
        Xb = np.vectorize(lambda v: truncate_b_bits(v, b))(X) if perturb_descriptors else X
        noisy = fit_linear(Xb, yb, True, pool.labels)
        bound = bound_param_error(2.0**-b, X, pool.labels)
        for j, label in enumerate(pool.labels):
            rows.append(
                SweepRow(b, label, float(abs(noisy.couplings[j] - exact.couplings[j])), bound.bounds[j])
            )
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["b", "coupling", "observed", "bound", "ratio", "units", "truncation"])
        for r in rows:
            w.writerow([r.b, r.label, repr(r.observed), repr(r.bound), repr(r.ratio), "t", TRUNCATION_DIRECTION])


def budget_from_target(
    target: float, samples: Sequence[SampleRecord] | np.ndarray
) -> tuple[float, int]:
    """Largest eps_oe_H meeting the coupling-error target on every descriptor, and its bit count."""
    if target <= 0:
        raise ValueError("target must be positive")
    X = _descriptor_matrix(samples)
    ranges = X.max(axis=0) - X.min(axis=0)
    if np.any(ranges <= 0):
        raise ValueError("descriptor with zero range: coupling not identifiable")
    eps = target * float(ranges.min()) / 2
    return eps, max(1, math.ceil(math.log2(1 / eps)))
