from __future__ import annotations

import math

import numpy as np
import pytest

from qedmd.dmd import DescriptorPool, fit_linear, sample_low_energy
from qedmd.error_propagation import (
    ErrorBudget,
    bound_entry_errors,
    bound_param_error,
    budget_from_target,
    run_truncation_sweep,
    truncate_b_bits,
    write_sweep_csv,
)
from qedmd.lattice import FockBasis, LatticeSpec, build_hubbard, diagonalize


@pytest.fixture(scope="module")
def dimer():
    spec, U = LatticeSpec(2), 8.0
    decomp = diagonalize(build_hubbard(spec, 1.0, U, basis=FockBasis.sector(2, 1, 1)))
    pool = DescriptorPool(spec, ["total-double-occupancy", "total-hopping"])
    return U, pool, list(sample_low_energy([decomp], 100.0, 4, pool=pool))


@pytest.mark.parametrize(
    "value, b, expected",
    [(0.75, 1, 0.5), (-0.75, 2, -0.75), (math.pi, 10, math.floor(math.pi * 1024) / 1024), (-math.pi, 3, -3.125),
     (0.0, 5, 0.0)],
)
def test_truncation(value, b, expected):
    assert truncate_b_bits(value, b) == expected


def test_truncation_error_is_below_one_unit():
    rng = np.random.default_rng(0)
    for v in rng.normal(scale=10, size=200):
        for b in (1, 5, 12):
            out = truncate_b_bits(v, b)
            assert abs(v - out) < 2.0**-b and abs(out) <= abs(v)
    with pytest.raises(ValueError):
        truncate_b_bits(1.0, 0)


def test_entry_error_bounds():
    budget = ErrorBudget(0.3, 0.05, 0.0, 0.0)
    assert bound_entry_errors(budget, 10.0, 2.0) == (0.3, 0.05)
    h, d = bound_entry_errors(ErrorBudget(0.0, 0.0, 0.1, 0.0), 10.0, 1.0)
    assert h == pytest.approx(10 * (0.2 + 0.01))
    assert d == pytest.approx(0.21)


def test_preset_budget_chain():
    b = ErrorBudget.preset(0.003 * 22)
    assert (b.eps_oe_h, b.eps_oe_d, b.eps_sp, b.eps_r) == pytest.approx((0.066, 0.0066, 6.6e-5, 6.6e-6))
    with pytest.raises(ValueError):
        ErrorBudget(0.066, 0.01, 6.6e-5, 6.6e-6, "preset-ratios")
    with pytest.raises(ValueError):
        ErrorBudget(-1.0, 0.0, 0.0, 0.0)


def test_coupling_bound_arithmetic():
    X = np.array([[0.0, 1.0], [4.0, 1.0]])
    bound = bound_param_error(0.1, X, ["a", "const"])
    assert bound.bounds[0] == pytest.approx(0.05)
    assert bound.infinite == (False, True)
    with pytest.raises(ValueError):
        bound_param_error(0.1, X[:1])


def test_dimer_descriptor_ranges(dimer):
    U, pool, samples = dimer
    r = math.hypot(U, 4.0)
    bound = bound_param_error(0.01, samples)
    # <D> spans 0 (triplet) to 1 (ionic odd state); <hop> spans the bonding/antibonding pair
    hop = [U * 0.5 * (1 - U / r) - (U - r) / 2, U * 0.5 * (1 + U / r) - (U + r) / 2]
    assert bound.ranges == pytest.approx((1.0, max(hop + [0.0]) - min(hop + [0.0])))
    assert bound.bounds == pytest.approx(tuple(0.02 / x for x in bound.ranges))


def test_sweep_stays_below_bound(dimer):
    U, pool, samples = dimer
    rows = run_truncation_sweep(samples, pool, range(5, 16))
    assert len(rows) == 11 * 2
    assert all(r.observed <= r.bound for r in rows)
    assert all(0 <= r.ratio <= 1 for r in rows)
    assert any(r.observed > 0 for r in rows)
    with_descr = run_truncation_sweep(samples, pool, range(5, 8), perturb_descriptors=True)
    assert len(with_descr) == 6


def test_sweep_vanishes_at_high_precision(dimer):
    U, pool, samples = dimer
    rows = run_truncation_sweep(samples, pool, [50])
    assert max(r.observed for r in rows) < 1e-12


def test_sweep_csv(tmp_path, dimer):
    U, pool, samples = dimer
    write_sweep_csv(run_truncation_sweep(samples, pool, [6]), tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "b,coupling,observed,bound,ratio,units,truncation"
    assert len(lines) == 3 and lines[1].endswith("t,toward-zero")


@pytest.mark.parametrize("target", [0.6, 0.05, 1e-3])
def test_target_inversion(dimer, target):
    U, pool, samples = dimer
    eps, bits = budget_from_target(target, samples)
    eps2, _ = budget_from_target(2 * target, samples)
    assert 1 / eps2 == pytest.approx(0.5 / eps)
    assert 2.0**-bits <= eps
    # refit with energies truncated to the derived bit count
    X = np.array([s.descriptors for s in samples])
    y = np.array([s.energy for s in samples])
    exact = fit_linear(X, y)
    noisy = fit_linear(X, [truncate_b_bits(v, bits) for v in y])
    assert np.max(np.abs(noisy.couplings - exact.couplings)) <= target


def test_target_inversion_rejects_constant_descriptor():
    with pytest.raises(ValueError):
        budget_from_target(0.1, np.array([[1.0], [1.0]]))
    with pytest.raises(ValueError):
        budget_from_target(0.0, np.array([[0.0], [1.0]]))
