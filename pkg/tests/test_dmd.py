from __future__ import annotations

import math

import numpy as np
import pytest

from qedmd import dmd
from qedmd.dmd import (
    CASE_A,
    CASE_B1_FEWER,
    CASE_B1_UNDERSAMPLING,
    CASE_B2,
    DescriptorPool,
    DescriptorSpec,
    SampleRecord,
    augment_effective,
    classify_fit,
    discover,
    evaluate_design,
    find_intruders,
    fit_linear,
    minimax_residual,
    sample_complement,
    sample_low_energy,
)
from qedmd.lattice import FockBasis, LatticeSpec, build_hubbard, diagonalize, hubbard_norm, hubbard_spectra

POOL = ["total-spin-spin", "total-double-occupancy", "total-hopping"]


@pytest.fixture(scope="module")
def chain4():
    """N=4 open chain at U/t=12 over every S_z sector, cutoff inside the Mott gap."""
    spec, U = LatticeSpec(4), 12.0
    spectra = hubbard_spectra(spec, 1.0, U)
    levels = np.sort(np.concatenate([d.eigenvalues for d in spectra]))
    cutoff = 0.5 * (levels[15] + levels[16])
    return spec, U, spectra, levels, cutoff


def records(X, y, membership=dmd.LOW, labels=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = labels or tuple(f"d{j}" for j in range(X.shape[1]))
    return [SampleRecord(f"s{i}", X[i], float(y[i]), membership, labels) for i in range(len(y))]


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_low_energy_samples_sit_below_the_gap(chain4):
    spec, U, spectra, levels, cutoff = chain4
    half = [d for d in spectra if d.basis.n_up == 2 and d.basis.n_down == 2]
    out = sample_low_energy(half, cutoff, 4)
    assert len(out) == 4 and out.warning is None
    E = np.sort(half[0].eigenvalues)
    assert [r.energy for r in out] == pytest.approx(E[:4])
    assert all(r.energy <= cutoff and r.membership == dmd.LOW for r in out)


def test_cutoff_below_ground_state_gives_warning(chain4):
    spec, U, spectra, levels, cutoff = chain4
    out = sample_low_energy(spectra, levels[0] - 1.0, 3)
    assert len(out) == 0 and "only 0" in out.warning


def test_cutoff_above_spectrum_samples_everything(chain4):
    spec, U, spectra, levels, cutoff = chain4
    lam = hubbard_norm(4, 1.0, U)
    out = sample_low_energy(spectra, lam, len(levels))
    assert len(out) == len(levels) == math.comb(8, 4) and out.warning is None
    comp = sample_complement(spectra, -lam, len(levels))
    assert len(comp) == len(levels)
    assert all(r.membership == dmd.COMPLEMENT for r in comp)


def test_complement_above_cutoff(chain4):
    spec, U, spectra, levels, cutoff = chain4
    comp = sample_complement(spectra, cutoff, 5)
    assert all(r.energy > cutoff for r in comp)
    assert sorted(r.energy for r in comp) == pytest.approx(levels[16:21])
    many = sample_complement(spectra, levels[-2], 10)
    assert len(many) < 10 and many.warning


def test_image_saturating_policy_spreads_out(chain4):
    spec, U, spectra, levels, cutoff = chain4
    pool = DescriptorPool(spec, POOL)
    out = sample_low_energy(spectra, cutoff, 4, "image-saturating", pool, ["total-spin-spin"])
    assert len(out) == 4
    vals = [r.descriptors[0] for r in out]
    first = sample_low_energy(spectra, cutoff, 4, "eigenstates", pool)
    assert np.ptp(vals) >= np.ptp([r.descriptors[0] for r in first])


# ---------------------------------------------------------------------------
# design matrix
# ---------------------------------------------------------------------------


def test_design_on_eigenstates(chain4):
    spec, U, spectra, levels, cutoff = chain4
    pool = DescriptorPool(spec, [DescriptorSpec("total-hopping", label="hop-a"),
                                 DescriptorSpec("total-hopping", label="hop-b"), "total-double-occupancy"])
    samples = list(sample_low_energy(spectra, cutoff, 16, pool=pool))
    X, y = evaluate_design(samples, pool)
    assert X.shape == (16, 3)
    assert np.array_equal(X[:, 0], X[:, 1])
    assert y == pytest.approx(levels[:16])
    # Hubbard energy is exactly -t <hop> + U <D> on eigenstates
    assert y == pytest.approx(-X[:, 0] + U * X[:, 2], abs=1e-10)


def test_dimer_design_matches_hellmann_feynman():
    spec, U = LatticeSpec(2), 8.0
    decomp = diagonalize(build_hubbard(spec, 1.0, U, basis=FockBasis.sector(2, 1, 1)))
    pool = DescriptorPool(spec, ["total-double-occupancy", "total-hopping"])
    X, y = evaluate_design(list(sample_low_energy([decomp], 100.0, 4, pool=pool)), pool)
    r = math.hypot(U, 4.0)
    # dE/dU gives <D>; E = -<hop> + U<D> then gives <hop>
    D = np.array([0.5 * (1 - U / r), 0.0, 1.0, 0.5 * (1 + U / r)])
    E = np.array([(U - r) / 2, 0.0, U, (U + r) / 2])
    order = np.argsort(E)
    assert y == pytest.approx(E[order], abs=1e-10)
    assert X[:, 0] == pytest.approx(D[order], abs=1e-10)
    assert X[:, 1] == pytest.approx((U * D - E)[order], abs=1e-10)


def test_pool_rejects_duplicate_labels_and_oversize():
    spec = LatticeSpec(2)
    with pytest.raises(ValueError):
        DescriptorPool(spec, ["total-hopping", "total-hopping"])
    with pytest.raises(ValueError):
        DescriptorPool(spec, POOL, max_size=2)


# ---------------------------------------------------------------------------
# regression
# ---------------------------------------------------------------------------


def test_exact_linear_model_is_recovered():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(12, 3))
    fit = fit_linear(X, X @ [1.5, -2.0, 0.25] + 3.0)
    assert fit.couplings == pytest.approx([1.5, -2.0, 0.25], abs=1e-10)
    assert fit.intercept == pytest.approx(3.0, abs=1e-10)
    assert fit.eps_hat < 1e-10


def test_constant_response_gives_zero_couplings():
    X = np.random.default_rng(2).normal(size=(8, 2))
    fit = fit_linear(X, np.full(8, -4.0))
    assert fit.couplings == pytest.approx([0, 0], abs=1e-12)
    assert fit.intercept == pytest.approx(-4.0)


def test_too_few_samples():
    with pytest.raises(ValueError):
        fit_linear(np.ones((2, 2)), np.ones(2))


def test_collinear_design_is_rank_deficient():
    d = np.linspace(0, 1, 6)
    fit = fit_linear(np.column_stack([d, 2 * d]), 3 * d)
    assert fit.rank_deficient and fit.couplings is None


@pytest.mark.parametrize("U", [12.0, 24.0])
def test_exchange_coupling_from_spin_band(U):
    spec = LatticeSpec(4)
    spectra = hubbard_spectra(spec, 1.0, U)
    levels = np.sort(np.concatenate([d.eigenvalues for d in spectra]))
    cutoff = 0.5 * (levels[15] + levels[16])
    pool = DescriptorPool(spec, ["total-spin-spin"])
    fit = dmd.fit_samples(list(sample_low_energy(spectra, cutoff, 16, pool=pool)), pool, ["total-spin-spin"])
    assert abs(fit.couplings[0] - 4 / U) <= 5 / U**2


def test_least_squares_max_residual_is_not_monotone():
    # appending samples can lower the least-squares max residual; the minimax residual cannot drop
    X = np.array([[0.0], [1.0], [2.0]])
    y = np.array([0.0, 1.2, 0.0])
    X2 = np.vstack([X, [[1.0]]])
    y2 = np.append(y, 1.2)
    assert fit_linear(X, y).eps_hat == pytest.approx(0.8)
    assert fit_linear(X2, y2).eps_hat == pytest.approx(0.6)
    assert minimax_residual(X2, y2) >= minimax_residual(X, y) - 1e-12


def test_minimax_residual_of_zigzag():
    X = np.array([[0.0], [1.0], [2.0]])
    assert minimax_residual(X, np.array([0.0, 1.0, 0.0])) == pytest.approx(0.5)
    assert minimax_residual(X, 2 * X[:, 0] + 1) == pytest.approx(0.0, abs=1e-9)


# ---------------------------------------------------------------------------
# augmented model and verdicts
# ---------------------------------------------------------------------------


def _separated_samples():
    x = np.linspace(0, 1, 6)
    low = records(x[:, None], 2 * x)
    comp = records([[5.0], [6.0]], [9.0, 10.0], dmd.COMPLEMENT)
    return low, comp


def test_effective_model_inside_and_outside():
    low, comp = _separated_samples()
    fit = fit_linear(np.array([[s.descriptors[0]] for s in low]), [s.energy for s in low], labels=["d0"])
    model = augment_effective(fit, low, cutoff=3.0, sigma=1.5)
    assert model.energy(np.array([[0.5]]))[0] == pytest.approx(1.0)
    assert model.energy(np.array([[5.0]]))[0] == pytest.approx(4.5)
    assert find_intruders(model, comp) == []
    with pytest.raises(ValueError):
        augment_effective(fit, low, 3.0, 0.0)


def test_perfect_separated_data_is_b2():
    low, comp = _separated_samples()
    fit = fit_linear(np.array([[s.descriptors[0]] for s in low]), [s.energy for s in low], labels=["d0"])
    verdict = classify_fit(fit, low, comp, cutoff=3.0, eps_target=0.1, norm_bound=20.0)
    assert verdict.case == CASE_B2


def test_complement_inside_hull_is_an_intruder():
    low, _ = _separated_samples()
    intruder = records([[0.5]], [4.0], dmd.COMPLEMENT)
    fit = fit_linear(np.array([[s.descriptors[0]] for s in low]), [s.energy for s in low], labels=["d0"])
    model = augment_effective(fit, low, 3.0, 1.0)
    assert find_intruders(model, intruder) == ["s0"]
    verdict = classify_fit(fit, low, intruder, 3.0, 0.1, 20.0)
    assert verdict.case == CASE_B1_UNDERSAMPLING and verdict.evidence["intruders"] == ["s0"]


def test_collinear_pool_is_undersampling():
    x = np.linspace(0, 1, 6)
    low = records(np.column_stack([x, 2 * x]), 3 * x)
    fit = fit_linear(np.column_stack([x, 2 * x]), 3 * x, labels=["d0", "d1"])
    assert classify_fit(fit, low, [], 5.0, 0.1, 20.0).case == CASE_B1_UNDERSAMPLING


def test_noise_with_tight_target_is_true_negative():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(20, 2))
    y = rng.normal(size=20)
    low = records(X, y)
    fit = fit_linear(X, y, labels=["d0", "d1"])
    assert fit.eps_hat > 0.1
    assert classify_fit(fit, low, [], 5.0, 1e-6, 20.0).case == CASE_A


def test_removable_descriptor_is_b1_fewer():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(10, 2))
    y = 2 * X[:, 0]
    fit = fit_linear(X, y, labels=["d0", "d1"])
    verdict = classify_fit(fit, records(X, y), [], 10.0, 1e-6, 20.0)
    assert verdict.case == CASE_B1_FEWER and verdict.evidence["removable"] == ["d1"]


# ---------------------------------------------------------------------------
# discovery
# ---------------------------------------------------------------------------


def test_discovery_selects_spin_spin(chain4):
    spec, U, spectra, levels, cutoff = chain4
    res = discover(DescriptorPool(spec, POOL), spectra, cutoff, 4 / U**2, norm_bound=hubbard_norm(4, 1.0, U))
    assert not res.exhausted
    assert res.verdict.case == CASE_B2
    assert res.fit.labels == ("total-spin-spin",)
    assert abs(res.fit.couplings[0] - 4 / U) <= 5 / U**2
    assert res.trace[-1]["case"] == CASE_B2


def test_discovery_without_the_true_descriptor_is_exhausted(chain4):
    spec, U, spectra, levels, cutoff = chain4
    pool = DescriptorPool(spec, [DescriptorSpec("spin-spin", (0, 1)), DescriptorSpec("spin-spin", (1, 2))])
    res = discover(pool, spectra, cutoff, 4 / U**2, norm_bound=hubbard_norm(4, 1.0, U))
    assert res.exhausted and res.fit is None
    assert "not compressible" in res.report
    assert all(t["case"] != CASE_B2 for t in res.trace)


def test_infinite_target_accepts_first_single_descriptor(chain4):
    spec, U, spectra, levels, cutoff = chain4
    res = discover(DescriptorPool(spec, POOL), spectra, cutoff, math.inf, norm_bound=hubbard_norm(4, 1.0, U))
    assert res.trace[0]["ansatz"] == ["total-spin-spin"]
    assert res.verdict.case in (CASE_B1_FEWER, CASE_B2)
    assert len(res.trace) == 1


def test_discovery_budget_is_bounded(chain4):
    spec, U, spectra, levels, cutoff = chain4
    pool = DescriptorPool(spec, POOL)
    with pytest.raises(ValueError):
        discover(pool, spectra, cutoff, 0.1, budget=8, norm_bound=64.0)
    res = discover(pool, spectra, cutoff, 1e-12, budget=2, norm_bound=64.0)
    assert res.exhausted and len(res.trace) == 2


def test_functional_matching_at_eigenstates(chain4):
    spec, U, spectra, levels, cutoff = chain4
    half = [d for d in spectra if d.basis.n_up == 2][0]
    pool = DescriptorPool(spec, ["total-hopping", "total-double-occupancy"])
    low = list(sample_low_energy([half], 1e3, 10, pool=pool))
    fit = dmd.fit_samples(low, pool, pool.labels)
    H = build_hubbard(spec, 1.0, U, basis=half.basis)
    out = dmd.functional_matching_check(H, half, pool, fit, range(6))
    # H is exactly -hop + U D, so the fitted model reproduces H as an operator
    assert np.max(np.abs(out["eps"])) < 1e-9
    assert np.max(out["grad"]) < 1e-9
    assert np.max(out["residual"]) < 1e-9


def test_sample_file_round_trip(tmp_path, chain4):
    spec, U, spectra, levels, cutoff = chain4
    pool = DescriptorPool(spec, POOL)
    samples = list(sample_low_energy(spectra, cutoff, 5, pool=pool))
    dmd.dump_samples(samples, tmp_path / "s.json")
    back = dmd.load_samples(tmp_path / "s.json")
    assert [b.state_id for b in back] == [s.state_id for s in samples]
    X1, y1 = evaluate_design(samples, pool)
    X2, y2 = evaluate_design(back, pool)
    assert np.allclose(X1, X2) and np.allclose(y1, y2)
