import numpy as np
import pytest

from cases import xou_base
from oracles import xou_closed_form
from regime_futures.errors import (GridTooCoarse, InvalidInput, KappasDiffer, LengthNotPowerOfTwo,
                                   OutOfGrid, StepTooLarge)
from regime_futures.models import RegimeModelSpec
from regime_futures.pricing_xou import (SpaceTimeGrid, characteristic_factor, default_domain,
                                        default_grid, max_rel_diff_central, price_fdm, price_fst,
                                        price_identical_kappa, xou_single_regime_price)
from regime_futures.regime_chain import MeasurePair, iter_segments

T = 0.8


@pytest.fixture(scope="module")
def base_surfaces():
    spec = xou_base()
    grid = default_grid(spec, T)
    return spec, grid, price_fdm(spec, T, grid), price_fst(spec, T, grid)


@pytest.fixture(scope="module")
def single_regime():
    spec = xou_base().single_regime(1)
    grid = default_grid(spec, T)
    return spec, grid


def central_rel_error(surface, grid, exact, t=0.0, i=1):
    x = grid.x[grid.central_mask()]
    return np.max(np.abs(surface.price(t, x, i) - exact(x)) / exact(x))


def test_grid_validation():
    with pytest.raises(GridTooCoarse):
        SpaceTimeGrid(0.0, 1.0, 4, 10, 1.0)
    with pytest.raises(InvalidInput):
        SpaceTimeGrid(1.0, 0.0, 16, 10, 1.0)
    g = SpaceTimeGrid(-1.0, 1.0, 16, 10, 1.0)
    assert g.x[0] == -1.0 and g.x[-1] == 1.0 and g.t[-1] == 1.0
    assert g.central_mask().sum() > 0


def test_default_domain_spans_six_stationary_sds():
    spec = xou_base()
    lo, hi = default_domain(spec)
    sd = max(0.2 / np.sqrt(2.0), 0.3 / np.sqrt(4.0))
    assert lo == pytest.approx(2.5 - 6 * sd) and hi == pytest.approx(2.7 + 6 * sd)


def test_closed_form_against_monte_carlo():
    # exact OU transitions under Q; the oracle formula must reproduce E[e^{X_T}]
    k, th, s, x0, tau, n = 1.0, 2.5, 0.2, 2.2, 0.8, 200_000
    d = np.exp(-k * tau)
    sd = s * np.sqrt((1 - d * d) / (2 * k))
    xt = th + (x0 - th) * d + sd * np.random.default_rng(4).standard_normal(n)
    samples = np.exp(xt)
    se = samples.std(ddof=1) / np.sqrt(n)
    assert abs(samples.mean() - xou_closed_form(k, th, s, tau, x0)) < 3 * se
    assert xou_single_regime_price(k, th, s, T, T - tau, x0) == pytest.approx(
        xou_closed_form(k, th, s, tau, x0), rel=1e-14)


def test_terminal_layer_is_exact(base_surfaces):
    spec, grid, fdm, fst = base_surfaces
    for surf in (fdm, fst):
        for i in range(spec.m):
            assert np.max(np.abs(surf.layer(grid.n_t)[i] - np.exp(grid.x))) == 0.0


def test_fdm_single_regime_matches_closed_form(single_regime):
    spec, grid = single_regime
    surf = price_fdm(spec, T, grid)
    err = central_rel_error(surf, grid, lambda x: xou_closed_form(1.0, 2.5, 0.2, T, x))
    assert err < 1e-3


def test_fst_single_regime_matches_closed_form(single_regime):
    spec, grid = single_regime
    surf = price_fst(spec, T, grid)
    err = central_rel_error(surf, grid, lambda x: xou_closed_form(1.0, 2.5, 0.2, T, x))
    assert err < 1e-3


def test_fst_linear_resampling_option_runs(single_regime):
    spec, grid = single_regime
    surf = price_fst(spec, T, grid, resample="linear")
    assert np.all(np.isfinite(surf.layer(0)))
    with pytest.raises(InvalidInput):
        price_fst(spec, T, grid, resample="cubic")


def test_fdm_and_fst_agree_two_regimes(base_surfaces):
    spec, grid, fdm, fst = base_surfaces
    assert max_rel_diff_central(fdm, fst, grid) <= 1e-3
    for i in (1, 2):
        assert fdm.price(0.0, 2.5, i) == pytest.approx(fst.price(0.0, 2.5, i), rel=1e-3)


def test_interior_prices_positive(base_surfaces):
    _, _, fdm, fst = base_surfaces
    assert fdm.values.min() > 0 and fst.values.min() > 0


def test_fst_frozen_dynamics_limit():
    spec = RegimeModelSpec.rs_xou([1e-4, 1e-4], [2.5, 2.7], [1e-3, 1e-3], [0.0, 0.0],
                                  MeasurePair.from_rates([[-2.0, 2.0], [4.0, -4.0]]))
    grid = SpaceTimeGrid(1.5, 3.5, 512, 100, T)
    surf = price_fst(spec, T, grid)
    x = grid.x[grid.central_mask()]
    for i in (1, 2):
        assert np.max(np.abs(surf.price(0.0, x, i) / np.exp(x) - 1)) < 1e-3


def test_characteristic_factor_is_one_at_zero_frequency_and_step():
    assert characteristic_factor(1.0, 2.5, 0.2, 0.0, 3.0) == pytest.approx(1.0)
    assert characteristic_factor(1.0, 2.5, 0.2, 0.01, 0.0) == pytest.approx(np.exp(0.01))


def test_fst_errors():
    spec = xou_base()
    with pytest.raises(LengthNotPowerOfTwo):
        price_fst(spec, T, SpaceTimeGrid(1.0, 4.0, 1000, 50, T))
    fast = xou_base(q_tilde=[[-2000.0, 2000.0], [4.0, -4.0]]).with_measures(
        MeasurePair.from_rates([[-2000.0, 2000.0], [4.0, -4.0]]))
    with pytest.raises(StepTooLarge):
        price_fst(fast, T, SpaceTimeGrid(1.0, 4.0, 64, 4, T))


def test_separable_single_regime_rk4_accuracy():
    spec = xou_base(kappa=(1.0, 1.0)).single_regime(1)
    surf = price_identical_kappa(spec, T, n_t=1000)
    for t in (0.0, 0.3, 0.79):
        for x in (2.0, 2.5, 3.1):
            exact = xou_closed_form(1.0, 2.5, 0.2, T - t, x)
            assert surf.price(t, x, 1) == pytest.approx(exact, rel=1e-8)
    assert surf.h_at(T)[0] == pytest.approx(1.0, abs=1e-15)
    assert surf.price(T, 0.4, 1) == pytest.approx(np.exp(0.4), rel=1e-14)


def test_separable_matches_fdm_identical_kappa():
    spec = xou_base(kappa=(1.5, 1.5))
    grid = default_grid(spec, T)
    sep = price_identical_kappa(spec, T)
    assert max_rel_diff_central(sep, price_fdm(spec, T, grid), grid) <= 1e-3
    assert np.all(sep.h > 0)


def test_separable_rejects_differing_kappa():
    with pytest.raises(KappasDiffer):
        price_identical_kappa(xou_base(), T)


def test_separable_derivative_ratio():
    sep = price_identical_kappa(xou_base(kappa=(1.5, 1.5)), T)
    for t in (0.0, 0.5):
        r = sep.price_dx(t, 2.6, 2) / sep.price(t, 2.6, 2)
        assert r == pytest.approx(np.exp(-1.5 * (T - t)), rel=1e-14)


def test_surface_derivative_checks(base_surfaces):
    spec, grid, fdm, _ = base_surfaces
    x = grid.x[grid.n_x // 2 + 3]
    assert fdm.surface_dx(T, x, 1) == pytest.approx(np.exp(x), rel=1e-6)
    fd = (fdm.price(0.0, x + grid.dx, 2) - fdm.price(0.0, x - grid.dx, 2)) / (2 * grid.dx)
    assert fd == pytest.approx(fdm.price_dx(0.0, x, 2), rel=1e-4)


def test_out_of_grid(base_surfaces):
    _, grid, fdm, _ = base_surfaces
    with pytest.raises(OutOfGrid):
        fdm.price(0.0, grid.x_max + 0.1, 1)
    with pytest.raises(OutOfGrid):
        fdm.price_dx(T + 0.1, 2.5, 1)


def test_fdm_refinement_order(single_regime):
    spec, _ = single_regime
    lo, hi = default_domain(spec)
    errs = []
    for nx, nt in [(129, 50), (257, 100), (513, 200)]:
        grid = SpaceTimeGrid(lo, hi, nx, nt, T)
        surf = price_fdm(spec, T, grid)
        x = grid.x[grid.central_mask()]
        exact = xou_closed_form(1.0, 2.5, 0.2, T, x)
        errs.append(np.max(np.abs(surf.layer(0)[0][grid.central_mask()] - exact) / exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders.min() >= 1.8


def test_boundary_insensitive_to_domain_widening():
    spec = xou_base()
    narrow = price_fdm(spec, T, default_grid(spec, T, n_x=513, n_t=200))
    lo, hi = default_domain(spec, width=8.0)
    wide_grid = SpaceTimeGrid(lo, hi, 685, 200, T)
    wide = price_fdm(spec, T, wide_grid)
    x = np.linspace(2.2, 3.0, 9)
    for i in (1, 2):
        np.testing.assert_allclose(narrow.price(0.0, x, i), wide.price(0.0, x, i), rtol=1e-5)


def test_martingale_under_q(base_surfaces):
    spec, _, fdm, _ = base_surfaces
    n, tau, x0, i0 = 40_000, 0.3, 2.6, 1
    rng = np.random.default_rng(21)
    x = np.full(n, x0)
    for state, dur, _ in iter_segments(spec.measures.q_gen, 0.0, tau, i0, n, rng):
        z = rng.standard_normal(n)
        x = np.where(dur > 0, spec.exact_step(x, state, dur, z, measure="Q"), x)
        final = state
    f = fdm.price(tau, x, final)
    se = f.std(ddof=1) / np.sqrt(n)
    assert abs(f.mean() - fdm.price(0.0, x0, i0)) < 3 * se
