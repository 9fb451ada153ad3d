import math

import numpy as np
import pytest

import nschlab


def test_grid_and_fields():
    g = nschlab.GridSpec.unit(8)
    assert g.nx == 8 and g.h == pytest.approx(0.125)
    f = nschlab.FieldSet(g)
    assert f.c.shape == (8, 8)
    assert f.u.shape == (8, 9)
    assert f.finite()
    c = np.linspace(-1.0, 1.0, 64).reshape(8, 8)
    f.c = c
    assert np.array_equal(f.c, c)


def test_perturbed_interface_is_seeded():
    a = nschlab.perturbed_interface(16, 0.04, seed=3)
    b = nschlab.perturbed_interface(16, 0.04, seed=3)
    assert np.array_equal(a.c, b.c)
    assert np.abs(a.c).max() <= 1.001


def test_cfl_law_prediction_closed_form():
    got = nschlab.cfl_law_prediction(sigma=1e3, gamma=1e-6, eps=0.04, rho=1.0)
    want = 7.0 * 0.04 * 1e3 ** (-1 / 3) * 1e-6 ** (1 / 3)
    assert got == pytest.approx(want)


def test_probe_converges_well_below_the_limit():
    pred = nschlab.cfl_law_prediction(sigma=1e2, gamma=1e-5, eps=0.08)
    out = nschlab.probe_single_step(
        sigma=1e2, gamma=1e-5, eps=0.08, h=0.16, tau=pred / 100.0
    )
    assert out["converged"]
    assert out["iterations"] >= 1


def test_fit_recovers_synthetic_exponents():
    cases = []
    for sigma in (1e2, 1e3):
        for gamma in (1e-5, 1e-6):
            for eps in (0.08, 0.04):
                for rho in (0.1, 1.0):
                    cases.append(
                        dict(
                            sigma=sigma,
                            gamma=gamma,
                            eps=eps,
                            rho=rho,
                            h=2 * eps,
                            tau_max=7.0 * eps * sigma ** (-1 / 3) * gamma ** (1 / 3) * rho ** (2 / 3),
                        )
                    )
    fit = nschlab.fit_exponents(cases)
    assert fit["prefactor"] == pytest.approx(7.0)
    assert fit["alpha_sigma"] == pytest.approx(-1 / 3)
    assert fit["alpha_gamma"] == pytest.approx(1 / 3)
    assert fit["alpha_rho"] == pytest.approx(2 / 3)
    assert fit["residual_rms"] < 1e-10


def test_roc_table_matches_reference_rates():
    roc = nschlab.roc_table(
        [0.50904344, 0.50910657, 0.50911533, 0.50911762],
        [0.1, 0.04, 0.02, 0.01],
        0.50911799,
    )
    assert roc == pytest.approx([2.05, 2.10, 2.84], abs=0.01)


def test_spinodal_energy_decays():
    e = nschlab.run_spinodal(n=16, eps=0.06, mobility=1.0, tau=1e-4, steps=10, seed=7)
    assert len(e) == 10
    assert all(b <= a + 1e-12 for a, b in zip(e, e[1:]))
    assert not math.isnan(e[-1])


def test_rank_deficient_fit_raises():
    with pytest.raises(nschlab.RankDeficient):
        nschlab.fit_exponents(
            [dict(sigma=1.0, gamma=1.0, eps=0.1, rho=1.0, h=0.2, tau_max=1.0)] * 3
        )
