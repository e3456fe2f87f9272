import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfgm import (
    EnvelopeState,
    EvolutionConfig,
    Grid,
    KFGState,
    MajoranaKind,
    PhysicalParams,
    ScalarPotential,
    ValidationError,
    b11_residual,
    b13_identity_defect,
    evolve_trajectory,
    extract_envelope,
    nonrel_deviation,
    nonrel_ladder,
    preset,
    step_schrodinger,
)
from kfgm.nonrel import SchrodingerPropagator, doubling_ladder, restore_phase


def test_extract_envelope_examples(unit_grid):
    params = PhysicalParams(mass=3.0)
    f = np.exp(1j * unit_grid.x) * (1 + unit_grid.x)
    t = 0.7
    phi = f * np.exp(-1j * params.mc2 * t / params.hbar)
    np.testing.assert_allclose(extract_envelope(phi, t, params, unit_grid).phi_nr, f, atol=1e-14)
    assert np.array_equal(extract_envelope(f, 0.0, params, unit_grid).phi_nr, f)


@settings(max_examples=40, deadline=None)
@given(st.floats(-50, 50), st.floats(0.1, 100), st.integers(0, 2**31))
def test_extraction_inverts(t, mc2, seed):
    params = PhysicalParams(mass=mc2)
    grid = Grid(0.0, 1.0, 9)
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    env = extract_envelope(phi, t, params, grid)
    np.testing.assert_allclose(restore_phase(env, params), phi, rtol=1e-14, atol=1e-14)
    there = extract_envelope(phi, t, params, grid).phi_nr
    back = extract_envelope(there, -t, params, grid).phi_nr
    np.testing.assert_allclose(back, phi, rtol=1e-14, atol=1e-14)
    assert b13_identity_defect(env, params) == 0.0


def test_schrodinger_constant_neumann(natural):
    grid = Grid(0.0, 1.0, 33)
    env = EnvelopeState(grid, np.full(grid.n, 0.5 + 0.2j))
    out = step_schrodinger(env, ScalarPotential.zero(), preset("neumann"), 0.1, natural)
    np.testing.assert_allclose(out.phi_nr, env.phi_nr, atol=1e-12)
    assert out.t == pytest.approx(0.1)


def test_schrodinger_dirichlet_phase(natural):
    grid = Grid(0.0, math.pi, 257)
    prop = SchrodingerPropagator(grid, natural, ScalarPotential.zero(), preset("dirichlet"))
    traj = prop.evolve(EnvelopeState(grid, np.sin(grid.x)), 0.01, 100)
    expected = np.sin(grid.x) * np.exp(-0.5j * traj[-1].t)
    assert np.abs(traj[-1].phi_nr - expected).max() < 1e-4


def test_schrodinger_norm_conserved(natural):
    grid = Grid(0.0, math.pi, 129)
    S = ScalarPotential.sinusoidal_t(0.3, 3.0)
    prop = SchrodingerPropagator(grid, natural, S, preset("robin"))
    start = EnvelopeState(grid, np.exp(-((grid.x - 1.0) ** 2) / 0.1) * np.exp(2j * grid.x))
    traj = prop.evolve(start, 0.005, 1000, record_every=100)
    norms = np.array([e.norm() for e in traj])
    assert np.abs(norms - norms[0]).max() < 1e-12 * norms[0]


def test_schrodinger_rejects_non_admissible(natural, unit_grid):
    with pytest.raises(ValidationError):
        SchrodingerPropagator(unit_grid, natural, ScalarPotential.zero(), preset("case_vi_minus"))


def test_b11_constant_envelope_zero(natural):
    grid = Grid(0.0, 1.0, 20)
    traj = [EnvelopeState(grid, np.ones(grid.n), 0.1 * k) for k in range(6)]
    assert np.array_equal(b11_residual(traj, natural, ScalarPotential.zero()), np.zeros((2, grid.n - 4)))


def test_b11_converges(natural):
    S = ScalarPotential.sinusoidal_t(0.2, 2.0)
    errors = []
    for n in (65, 129, 257):
        grid = Grid(0.0, math.pi, n)
        dt = 0.5 * grid.h
        prop = SchrodingerPropagator(grid, natural, S, preset("dirichlet"))
        traj = prop.evolve(EnvelopeState(grid, np.sin(grid.x) + 0.5j * np.sin(2 * grid.x)), dt, int(round(1 / dt)))
        errors.append(np.abs(b11_residual(traj, natural, S)).max())
    assert min(math.log2(errors[i] / errors[i + 1]) for i in range(2)) >= 1.9


def test_b11_shrinks_with_rest_energy():
    grid = Grid(0.0, math.pi, 129)
    values = []
    for mc2 in (50.0, 100.0, 200.0):
        params = PhysicalParams(mass=1.0, c=math.sqrt(mc2))
        dt = 0.02
        cfg = EvolutionConfig(dt, 50, "majorana_phi", preset("dirichlet"), params=params,
                              kind=MajoranaKind.STANDARD, integrator="spectral")
        rel = evolve_trajectory(KFGState(grid, np.sin(grid.x), np.zeros(grid.n)), cfg)
        env = [extract_envelope(s.phi, s.t, params, grid) for s in rel.states]
        values.append(np.abs(b11_residual(env, params, ScalarPotential.zero())).max())
    assert values[0] > values[1] > values[2]


def _rel_and_ref(grid, params, bc, f, steps=20, dt=0.05):
    cfg = EvolutionConfig(dt, steps, "majorana_phi", bc, params=params, kind=MajoranaKind.STANDARD,
                          integrator="spectral")
    rel = evolve_trajectory(KFGState(grid, 2 * f, np.zeros(grid.n)), cfg)
    ref = SchrodingerPropagator(grid, params, ScalarPotential.zero(), bc).evolve(EnvelopeState(grid, f + 0j), dt, steps)
    return rel, ref


def test_deviation_zero_kinetic():
    grid = Grid(0.0, 1.0, 33)
    params = PhysicalParams(mass=1.0, c=10.0)
    rel, ref = _rel_and_ref(grid, params, preset("neumann"), np.ones(grid.n))
    assert nonrel_deviation(rel, ref, params).max() < 1e-10


def test_deviation_errors():
    grid = Grid(0.0, 1.0, 33)
    params = PhysicalParams(mass=1.0, c=10.0)
    rel, ref = _rel_and_ref(grid, params, preset("neumann"), np.ones(grid.n))
    with pytest.raises(ValueError):
        nonrel_deviation(rel, ref[:-1], params)
    shifted = [EnvelopeState(e.grid, e.phi_nr, e.t + 0.01) for e in ref]
    with pytest.raises(ValueError):
        nonrel_deviation(rel, shifted, params)
    kfg = evolve_trajectory(KFGState(grid, np.ones(grid.n), np.zeros(grid.n)), EvolutionConfig(0.05, 20, "kfg", preset("neumann"), params=params, integrator="spectral"))
    with pytest.raises(ValueError):
        nonrel_deviation(kfg, ref, params)


def test_ladder_scaling():
    grid = Grid(0.0, math.pi, 129)
    result = nonrel_ladder(grid, np.sin(grid.x), preset("dirichlet"), ScalarPotential.zero(), doubling_ladder(50.0, 3))
    assert result.status == "ok" and result.monotone
    assert 0.8 <= result.alpha <= 1.2
    rms = [r.rms for r in result.rungs]
    for a, b in zip(rms, rms[1:]):
        assert 0.4 <= b / a <= 0.6
    assert result.rungs[0].epsilon == pytest.approx(0.01, rel=0.01)


def test_ladder_zero_kinetic_and_short():
    grid = Grid(0.0, 1.0, 33)
    flat = nonrel_ladder(grid, np.ones(grid.n), preset("neumann"), ScalarPotential.zero(), [50.0, 100.0])
    assert all(r.deviation.max() < 1e-10 for r in flat.rungs)
    assert flat.status == "degenerate"
    single = nonrel_ladder(Grid(0.0, math.pi, 65), np.sin(np.linspace(0, math.pi, 65)), preset("dirichlet"),
                           ScalarPotential.zero(), [50.0])
    assert single.status == "insufficient_data" and math.isnan(single.alpha)


def test_ladder_relativistic_regime():
    grid = Grid(0.0, math.pi, 65)
    result = nonrel_ladder(grid, np.sin(3 * grid.x), preset("dirichlet"), ScalarPotential.zero(), [9.0, 18.0])
    assert result.rungs[0].epsilon == pytest.approx(0.5, rel=0.02)
    assert result.rungs[0].deviation.max() > 0.1
    assert np.all(np.isfinite(result.rungs[0].deviation))


def test_doubling_ladder():
    assert doubling_ladder(50.0, 3) == [50.0, 100.0, 200.0, 400.0]
    with pytest.raises(ValueError):
        doubling_ladder(50.0, -1)
