"""Acceptance criteria, one test each, at their stated tolerances.

Each test prints a single PASS/FAIL line; the lines are repeated in the
terminal summary under "acceptance criteria".
"""

import math

import numpy as np

from conftest import ACCEPTANCE_LINES
from kfgm import (
    PRESET_NAMES,
    EnvelopeState,
    EvolutionConfig,
    FVState,
    Grid,
    KFGState,
    MajoranaKind,
    PhysicalParams,
    ScalarPotential,
    analytic_reference_spectrum,
    b11_residual,
    b13_identity_defect,
    build_hamiltonian,
    c_parity,
    charge_conjugate,
    evolve_trajectory,
    extract_envelope,
    fv_spectrum_symmetry_check,
    fv_to_kfg,
    generalized_adjoint,
    is_majorana_admissible,
    kfg_to_fv,
    nonrel_ladder,
    preset,
    pseudo_hermiticity_defect,
    pseudo_inner_product,
    real_constraint_rank,
    second_order_majorana_residual,
    stationary_modes,
)
from kfgm.evolution import kfg_residual
from kfgm.nonrel import SchrodingerPropagator, doubling_ladder

NATURAL = PhysicalParams()
HALVING = (129, 257, 513, 1025)
ADMISSIBLE = [n for n in PRESET_NAMES if is_majorana_admissible(preset(n))]
STD, NON = MajoranaKind.STANDARD, MajoranaKind.NONSTANDARD


def report(number, passed, detail):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert passed, line


def orders(errors):
    return [math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)]


def pi_grid(n):
    return Grid(0.0, math.pi, n)


def test_criterion_01_spectrum_oracle():
    analytic = np.array(analytic_reference_spectrum("dirichlet", math.pi, NATURAL, 3))
    E2 = stationary_modes(pi_grid(1024), NATURAL, None, preset("dirichlet"), 3).E_squared
    rel = float(np.max(np.abs(E2 - analytic) / analytic))
    errors = [np.abs(stationary_modes(pi_grid(n), NATURAL, None, preset("dirichlet"), 3).E_squared - analytic).max()
              for n in HALVING]
    order = min(orders(errors))
    report(1, rel < 1e-3 and order >= 1.9,
           f"E^2 = {np.round(E2, 6).tolist()}, max rel err {rel:.2e} (< 1e-3), order {order:.3f} (>= 1.9)")


def test_criterion_02_pseudo_self_adjointness():
    grid = pi_grid(128)
    S = ScalarPotential(lambda x, t: 0.5 * np.cos(2 * x), True, "cos")
    constrained, free = {}, {}
    for name in PRESET_NAMES:
        H = build_hamiltonian(grid, NATURAL, S, 0.0, preset(name))
        constrained[name] = pseudo_hermiticity_defect(H, trials=100)
        free[name] = pseudo_hermiticity_defect(H, trials=100, project=False)
    worst = max(constrained.values())
    loudest = max(free.values())
    report(2, worst < 1e-9 and loudest > 1e-3,
           f"max constrained defect {worst:.2e} (< 1e-9) over 9 presets, unconstrained max {loudest:.2e} (> 1e-3)")


def test_criterion_03_majorana_admissibility():
    table = {n: (is_majorana_admissible(preset(n)), real_constraint_rank(preset(n))) for n in PRESET_NAMES}
    expected = {n: ((True, 2) if i < 5 else (False, 4)) for i, n in enumerate(PRESET_NAMES)}
    bad = [n for n in PRESET_NAMES if table[n] != expected[n]]
    report(3, not bad, "presets (i)-(v) admissible rank 2, (vi)-(vii) rank 4" + (f"; mismatched {bad}" if bad else ""))


def test_criterion_04_conservation():
    grid = pi_grid(128)
    x = grid.x
    S = ScalarPotential.sinusoidal_t(0.1, 2.0)
    drift, pair_drift = 0.0, 0.0
    for name in ADMISSIBLE:
        cfg = EvolutionConfig(0.5 * grid.h, 1000, "fv", preset(name), S, NATURAL, record_every=50)
        a = evolve_trajectory(FVState(grid, np.exp(-(x - 1.2) ** 2 / 0.1) * np.exp(3j * x), 0.3 * np.exp(-(x - 2.0) ** 2 / 0.2)), cfg)
        b = evolve_trajectory(FVState(grid, 0.5 * np.exp(-(x - 1.8) ** 2 / 0.2), 0.4j * np.exp(-(x - 1.0) ** 2 / 0.1)), cfg)
        pn = a.pseudo_norm
        drift = max(drift, float(np.max(np.abs(pn - pn[0])) / abs(pn[0])))
        pairs = np.array([pseudo_inner_product(p, q) for p, q in zip(a.states, b.states)])
        pair_drift = max(pair_drift, float(np.max(np.abs(pairs - pairs[0]))))
    report(4, drift < 1e-10 and pair_drift < 1e-9,
           f"1000 CN steps, 5 admissible presets: pseudo-norm drift {drift:.2e} (< 1e-10), pairwise {pair_drift:.2e} (< 1e-9)")


def test_criterion_05_majorana_preservation():
    grid = pi_grid(128)
    x = grid.x
    S = ScalarPotential.sinusoidal_t(0.1, 2.0)
    u, u_t = np.sin(x) + 0.4 * np.sin(3 * x), 0.5 * np.sin(2 * x)
    worst = {}
    for kind in (STD, NON):
        unit = 1.0 if kind is STD else 1j
        start = kfg_to_fv(KFGState(grid, unit * u, unit * u_t), NATURAL)
        fv = evolve_trajectory(start, EvolutionConfig(0.5 * grid.h, 1000, "fv", preset("robin"), S, NATURAL, kind, 100))
        split = evolve_trajectory(start, EvolutionConfig(0.5 * grid.h, 1000, "majorana_chi", preset("robin"), S, NATURAL, kind, 100))
        assert fv.majorana_defect[0] == 0.0 and split.majorana_defect[0] == 0.0
        worst[kind.value] = max(max(fv.majorana_defect), max(split.majorana_defect))
    top = max(worst.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(5, top < 1e-8, f"max defect over 1000 steps, FV and split routes: {detail} (< 1e-8)")


def test_criterion_06_impenetrability():
    grid = pi_grid(128)
    x = grid.x
    S = ScalarPotential.sinusoidal_t(0.1, 2.0)
    exact, rho = True, 0.0
    for name in ADMISSIBLE:
        for form in ("majorana_phi", "majorana_chi"):
            for kind in (STD, NON):
                f = np.exp(-(x - 1.3) ** 2 / 0.1)
                f = f if kind is STD else 1j * f
                cfg = EvolutionConfig(0.5 * grid.h, 100, form, preset(name), S, NATURAL, kind, 10)
                traj = evolve_trajectory(KFGState(grid, f, np.zeros(grid.n)), cfg)
                exact &= all(v == 0.0 for v in traj.j_a + traj.j_b)
                rho = max(rho, max(float(np.abs(o.rho).max()) for o in traj.observables))
    pgrid = Grid(0.0, 2 * math.pi, 128)
    psi = np.exp(1j * pgrid.x) + 0.5 * np.exp(-2j * pgrid.x)
    cfg = EvolutionConfig(0.5 * pgrid.h, 400, "kfg", preset("periodic"), ScalarPotential(lambda x, t: 0.2 * np.cos(x), True, "c"), NATURAL)
    control = evolve_trajectory(KFGState(pgrid, psi, -1j * math.sqrt(2) * psi), cfg)
    gap = float(np.max(np.abs(np.array(control.j_a) - np.array(control.j_b))))
    size = float(np.max(np.abs(control.j_a)))
    passed = exact and rho < 1e-14 and gap < 1e-8 and size > 0
    report(6, passed, f"Majorana j(a)=j(b)=0.0 bitwise: {exact}, max|rho| {rho:.1e} (< 1e-14); "
                      f"periodic control |j(a)-j(b)| {gap:.1e} (< 1e-8) with max|j(a)| {size:.3f}")


def _route_psi(n, formulation, kind=None):
    grid = pi_grid(n)
    dt = 0.5 * grid.h
    cfg = EvolutionConfig(dt, int(round(1.0 / dt)), formulation, preset("dirichlet"), params=NATURAL, kind=kind)
    traj = evolve_trajectory(KFGState(grid, np.sin(grid.x) + 0.5 * np.sin(2 * grid.x), np.zeros(grid.n)), cfg)
    t = traj.times[-1]
    exact = np.sin(grid.x) * math.cos(math.sqrt(2) * t) + 0.5 * np.sin(2 * grid.x) * math.cos(math.sqrt(5) * t)
    return traj.field("psi")[-1], exact


def test_criterion_07_cross_formulation():
    routes = {"kfg": None, "fv": None, "majorana_phi": STD}
    oracle = {r: [] for r in routes}
    pair_errors = []
    for n in HALVING:
        psi = {}
        for route, kind in routes.items():
            psi[route], exact = _route_psi(n, route, kind)
            oracle[route].append(np.abs(psi[route] - exact).max())
        pair_errors.append(max(np.abs(psi[a] - psi[b]).max() for a in routes for b in routes if a < b))
    route_order = min(min(orders(e)) for e in oracle.values())
    pair_order = min(orders(pair_errors))
    psi = {route: _route_psi(1024, route, kind)[0] for route, kind in routes.items()}
    agree = max(np.abs(psi[a] - psi[b]).max() for a in routes for b in routes if a < b)
    passed = route_order >= 1.9 and pair_order >= 1.9 and agree < 1e-5
    report(7, passed, f"oracle order {route_order:.3f}, pairwise order {pair_order:.3f} (>= 1.9); "
                      f"n=1024 max pairwise L_inf {agree:.2e} (< 1e-5)")


def _a1_run(n, S):
    grid = pi_grid(n)
    dt = 0.5 * grid.h
    cfg = EvolutionConfig(dt, int(round(1.0 / dt)), "majorana_phi", preset("dirichlet"), S, NATURAL, STD)
    traj = evolve_trajectory(KFGState(grid, np.sin(grid.x) + 0.3 * np.sin(2 * grid.x), 0.5 * np.sin(3 * grid.x)), cfg)
    return traj, cfg


def test_criterion_08_second_order_residuals():
    ratios = {}
    for label, S in (("static", ScalarPotential(lambda x, t: 0.3 * np.cos(2 * x), True, "cos")),
                     ("0.1 sin(2t)", ScalarPotential.sinusoidal_t(0.1, 2.0))):
        errors = [np.abs(second_order_majorana_residual(*_a1_run(n, S), "phi_standard")).max() for n in HALVING[:3]]
        ratios[label] = float(min(errors[i] / errors[i + 1] for i in range(2)))
    traj, cfg = _a1_run(257, ScalarPotential.sinusoidal_t(0.1, 2.0))
    total = second_order_majorana_residual(traj, cfg, "phi_standard") + second_order_majorana_residual(traj, cfg, "chi_standard")
    sum_gap = float(np.abs(total - kfg_residual(traj, cfg)).max())
    passed = min(ratios.values()) >= 3.5 and sum_gap < 1e-10
    detail = ", ".join(f"{k} {v:.3f}" for k, v in ratios.items())
    report(8, passed, f"phi residual halving ratios {detail} (>= 3.5); |phi + chi - psi residuals| {sum_gap:.1e} (< 1e-10)")


def test_criterion_09_nonrel_limit():
    grid = pi_grid(129)
    envelope = np.sin(grid.x)
    result = nonrel_ladder(grid, envelope, preset("dirichlet"), ScalarPotential.zero(), doubling_ladder(50.0, 3))
    eps0 = result.rungs[0].epsilon

    params = PhysicalParams(mass=1.0, c=math.sqrt(50.0))
    cfg = EvolutionConfig(0.02, 50, "majorana_phi", preset("dirichlet"), params=params, kind=STD, integrator="spectral")
    rel = evolve_trajectory(KFGState(grid, 2 * envelope, np.zeros(grid.n)), cfg)
    envs = [extract_envelope(s.phi, s.t, params, grid) for s in rel.states]
    b13 = max(b13_identity_defect(e, params) for e in envs)

    S = ScalarPotential.sinusoidal_t(0.2, 2.0)
    errors = []
    for n in HALVING[:3]:
        g = pi_grid(n)
        dt = 0.5 * g.h
        traj = SchrodingerPropagator(g, NATURAL, S, preset("dirichlet")).evolve(
            EnvelopeState(g, np.sin(g.x) + 0.5j * np.sin(2 * g.x)), dt, int(round(1.0 / dt)))
        errors.append(np.abs(b11_residual(traj, NATURAL, S)).max())
    order = min(orders(errors))
    passed = result.ok and 0.8 <= result.alpha <= 1.2 and b13 == 0.0 and order >= 1.9
    report(9, passed, f"eps0 {eps0:.4f}, alpha {result.alpha:.3f} in [0.8, 1.2] (monotone {result.monotone}); "
                      f"b13 identity defect {b13:.1e} at every node; b11 order {order:.3f} (>= 1.9)")


def test_criterion_10_structural_identities():
    rng = np.random.default_rng(2024)
    grid = pi_grid(128)
    z = lambda: rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)

    f = FVState(grid, z(), z())
    cc = charge_conjugate(charge_conjugate(f))
    cc_exact = np.array_equal(cc.phi, f.phi) and np.array_equal(cc.chi, f.chi)

    adj = 0.0
    for _ in range(10):
        M = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
        adj = max(adj, np.abs(generalized_adjoint(generalized_adjoint(M)) - M).max() / np.abs(M).max())

    trip = 0.0
    for params in (NATURAL, PhysicalParams(mass=2.5, c=3.0, hbar=0.7)):
        s = KFGState(grid, z(), z())
        back = fv_to_kfg(kfg_to_fv(s, params), params)
        kappa = params.hbar / params.mc2
        scale = max(np.abs(s.psi).max(), kappa * np.abs(s.psi_t).max())
        trip = max(trip, np.abs(back.psi - s.psi).max() / scale, kappa * np.abs(back.psi_t - s.psi_t).max() / scale)

    S = ScalarPotential(lambda x, t: 0.4 * np.cos(2 * x), True, "cos")
    pairing = max(fv_spectrum_symmetry_check(build_hamiltonian(pi_grid(96), NATURAL, S, 0.0, preset(n))).pairing_defect
                  for n in PRESET_NAMES)
    parity_ok = c_parity(FVState(grid, f.phi, np.conj(f.phi))) == 1
    passed = cc_exact and adj < 1e-12 and trip < 1e-12 and pairing < 1e-8 and parity_ok
    report(10, passed, f"C involution exact: {cc_exact}; adjoint involution {adj:.1e} (< 1e-12); "
                       f"round trip {trip:.1e} (< 1e-12); FV pairing defect {pairing:.1e} (< 1e-8) over 9 presets")
