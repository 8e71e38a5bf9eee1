from __future__ import annotations

import json
import math

import numpy as np
import pytest

from qedmd import sw_bounds as swb
from qedmd.lattice import FockBasis, LatticeSpec, build_hubbard, diagonalize


@pytest.mark.parametrize(
    "m, sites, p, t, U, lower, upper",
    [
        (0, 8, 0.0, 1.0, 12.0, 0.0, 0.0),
        (0, 8, 0.125, 1.0, 12.0, -3 * 8 * 0.125 / 12, 3 * 8 * 0.125 / 12),
        (1, 8, 0.0, 1.0, 12.0, 1 - 6 / 12, 1 + 6 / 12),
        (2, 4, 0.25, 1.0, 20.0, 2 - 3 * 5 / 20, 2 + 3 * 5 / 20),
    ],
)
def test_band_bounds(m, sites, p, t, U, lower, upper):
    b = swb.band_bounds(m, sites, p, t, U)
    assert (b.lower, b.upper) == pytest.approx((lower, upper))


def test_band_width_sets_doped_cutoff():
    # the m = 0 band at doping p spans 6pNt/U, so a cutoff of 3pNt (in units of U) covers it
    b = swb.band_bounds(0, 22, 0.1, 1.0, 12.0)
    assert b.upper - b.lower == pytest.approx(6 * 0.1 * 22 / 12)
    assert b.upper * 12.0 == pytest.approx(3 * 0.1 * 22)


def test_band_bounds_input_checks():
    with pytest.raises(ValueError):
        swb.band_bounds(-1, 4, 0.0, 1.0, 8.0)
    with pytest.raises(ValueError):
        swb.band_bounds(0, 4, 0.0, 1.0, 0.0)


def test_band_interval_helpers():
    b = swb.band_bounds(1, 4, 0.0, 1.0, 12.0)
    assert b.contains(1.2) and not b.contains(2.0)
    assert b.contains(1.55, slack=0.1)
    assert b.distance(1.0) == 0.0
    assert b.distance(2.0) == pytest.approx(0.5)


def test_containment_for_exact_spectrum():
    spec, U = LatticeSpec(4, "ladder"), 16.0
    E = np.linalg.eigvalsh(build_hubbard(spec, 1.0, U, sector=(2, 2)).dense())
    slack = swb.containment_slack(E, 4, 0.0, 1.0, U)
    assert slack.shape == E.shape
    # the excess over the interval union is second order in t/U
    assert np.max(slack) <= 4 * 4 / U**2


def test_lower_band_edge():
    w = np.array([0.0, 0.1, 0.2, 5.0, 5.2, 30.0])
    assert swb.lower_band_edge(w, 8.0) == pytest.approx(2.6)
    with pytest.raises(ValueError):
        swb.lower_band_edge(np.array([1.0]), 8.0)


@pytest.fixture(scope="module")
def ladder_decomp():
    basis = FockBasis.sector(4, 2, 2)
    return basis, diagonalize(build_hubbard(LatticeSpec(4, "ladder"), 1.0, 24.0, basis=basis))


def test_infidelity_limits(ladder_decomp):
    basis, decomp = ladder_decomp
    idx = np.arange(basis.dim)
    assert np.allclose(swb.compute_infidelities(decomp, 1e3, idx), 0.0, atol=1e-7)
    assert np.allclose(swb.compute_infidelities(decomp, -1e3, idx), 1.0)
    vec = decomp.eigenvectors[:, :3]
    assert np.allclose(swb.compute_infidelities(decomp, decomp.eigenvalues[2], vec), 0.0, atol=1e-7)


def test_infidelity_needs_spectrum_past_cutoff(ladder_decomp):
    basis, decomp = ladder_decomp
    partial = diagonalize(build_hubbard(LatticeSpec(4, "ladder"), 1.0, 24.0, basis=basis), 3)
    with pytest.raises(ValueError):
        swb.compute_infidelities(partial, 1e3, np.arange(basis.dim))


def test_band_edge_separates_double_occupancy():
    pt = swb.size_point(4, 24.0)
    assert pt.n_m0 == 6
    assert pt.max_m0 < 0.2
    assert pt.min_m_positive > 0.95
    assert pt.mean_m0 <= pt.max_m0


def test_linear_fit_recovers_line():
    fit = swb.fit_upper_edge([2, 4, 6, 8], [0.1 + 0.05 * n for n in (2, 4, 6, 8)], 10.0)
    assert fit.slope == pytest.approx(0.05) and fit.intercept == pytest.approx(0.1)
    assert fit(22) == pytest.approx(1.2)
    assert fit.c_estimate == pytest.approx(0.5)
    assert max(map(abs, fit.residuals)) < 1e-12


def test_constant_series_has_zero_slope():
    fit = swb.fit_upper_edge([2, 4, 6], [0.3, 0.3, 0.3])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    assert fit.c_estimate is None


@pytest.mark.parametrize("sizes, values", [([2, 4], [0.1, 0.2]), ([4, 4, 4], [0.1, 0.2, 0.3]), ([2, 4, 6], [0.1])])
def test_degenerate_series_rejected(sizes, values):
    with pytest.raises(ValueError):
        swb.fit_upper_edge(sizes, values)


def test_slope_scales_inversely_with_interaction():
    slopes = {}
    for U in (8.0, 16.0, 24.0):
        pts = swb.edge_series(U, (2, 4, 6))
        slopes[U] = swb.fit_upper_edge([p.sites for p in pts], [p.max_m0 for p in pts], U)
    assert slopes[8.0].slope / slopes[16.0].slope == pytest.approx(2.0, rel=0.15)
    assert slopes[16.0].slope / slopes[24.0].slope == pytest.approx(1.5, rel=0.15)
    cs = [f.c_estimate for f in slopes.values()]
    assert max(cs) / min(cs) < 1.2


def test_edge_series_in_workers_matches_serial():
    assert swb.edge_series(12.0, (2, 4, 6), jobs=2) == swb.edge_series(12.0, (2, 4, 6))


def test_iteration_extrapolation():
    zero = swb.extrapolate_niter(swb.fit_upper_edge([2, 4, 6], [0.0, 0.0, 0.0]), 22)
    assert zero.n_iter == 1 and not zero.out_of_range
    neg = swb.extrapolate_niter(swb.fit_upper_edge([2, 4, 6], [0.3, 0.2, 0.1]), 22)
    assert neg.infidelity == 0.0 and neg.n_iter == 1
    high = swb.extrapolate_niter(swb.fit_upper_edge([2, 4, 6], [0.2, 0.4, 0.6]), 22)
    assert high.out_of_range and high.n_iter is None
    assert json.loads(high.to_json())["out_of_range"] is True


def test_iteration_count_from_infidelity():
    fit = swb.fit_upper_edge([2, 4, 6], [0.5, 0.5, 0.5])
    res = swb.extrapolate_niter(fit, 22)
    assert res.n_iter == math.ceil(0.5 * (math.pi / math.asin(math.sqrt(0.75)) - 1))


def test_ground_state_fit_recovers_exponential():
    sizes = np.array([2, 4, 6, 8])
    gammas = 0.9 * np.exp(-0.11 * sizes)
    gaps = 1.7 / sizes
    out = swb.ground_state_extrapolation(sizes, gammas, gaps, 22, 1.0, 12.0)
    assert (out.a, out.b, out.c) == pytest.approx((0.9, 0.11, 1.7))
    assert out.target.gamma == pytest.approx(0.9 * math.exp(-0.11 * 22))
    assert out.target.delta == pytest.approx(1.7 / 22 / (4 * 22 + 12 * 22))


def test_ground_state_fit_input_checks():
    with pytest.raises(ValueError):
        swb.ground_state_extrapolation([2, 4], [0.5, 0.4], [1.0, 0.5])
    with pytest.raises(ValueError):
        swb.ground_state_extrapolation([2, 4, 6], [0.5, 0.0, 0.3], [1.0, 0.5, 0.3])


def test_ground_point_dimer():
    pt = swb.ground_point(2, 8.0, geometry="chain")
    r = math.hypot(8.0, 4.0)
    # doubly/singly occupied amplitude ratio in the dimer ground state is E0 / 2t
    e0 = (8.0 - r) / 2
    singly = 0.5 / (1 + (e0 / 2) ** 2)
    assert pt.gamma == pytest.approx(math.sqrt(singly), abs=1e-10)
    assert pt.gap == pytest.approx(-e0, abs=1e-10)


def test_doping_point():
    half = swb.doping_point(4, 4, 8.0)
    doped = swb.doping_point(4, 3, 8.0)
    assert doped.doping == pytest.approx(0.25)
    assert doped.cutoff == pytest.approx(3 * 0.25 * 4)
    assert doped.max_m0 < half.max_m0


def test_series_csv(tmp_path):
    swb.write_series_csv([swb.GroundPoint(2, 0.5, 1.0)], tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines == ["sites,gamma,gap,units", "2,0.5,1.0,t"]
    with pytest.raises(ValueError):
        swb.write_series_csv([], tmp_path / "e.csv")
