"""The invariant suite behind ``kfgm check``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary import PRESET_NAMES, is_majorana_admissible, preset, real_constraint_rank
from .core import (
    FVState,
    Grid,
    KFGState,
    MajoranaKind,
    PhysicalParams,
    charge_conjugate,
    fv_to_kfg,
    kfg_to_fv,
)
from .evolution import EvolutionConfig, evolve_trajectory, kfg_residual, second_order_majorana_residual
from .nonrel import EnvelopeState, SchrodingerPropagator, b11_residual, b13_identity_defect
from .operators import (
    ScalarPotential,
    build_hamiltonian,
    continuity_residual,
    generalized_adjoint,
    pseudo_hermiticity_defect,
)
from .spectrum import fv_spectrum_symmetry_check


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{status} {self.name}: {self.value:.3e} vs {self.threshold:.1e}{extra}"


def _below(name, value, threshold, detail=""):
    return CheckResult(name, bool(value < threshold), float(value), threshold, detail)


def _above(name, value, threshold, detail=""):
    return CheckResult(name, bool(value > threshold), float(value), threshold, detail)


def _halving_ratios(errors):
    return [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]


def check_rank_classification() -> CheckResult:
    bad = []
    for name in PRESET_NAMES:
        p = preset(name)
        expect = (True, 2) if name in PRESET_NAMES[:5] else (False, 4)
        if (is_majorana_admissible(p), real_constraint_rank(p)) != expect:
            bad.append(name)
    return CheckResult("rank classification", not bad, float(len(bad)), 1.0, ", ".join(bad))


def check_pseudo_hermiticity(grid, params, S, trials, seed) -> list[CheckResult]:
    worst, loudest = 0.0, 0.0
    for name in PRESET_NAMES:
        H = build_hamiltonian(grid, params, S, 0.0, preset(name, params.lam))
        worst = max(worst, pseudo_hermiticity_defect(H, trials=trials, seed=seed))
        loudest = max(loudest, pseudo_hermiticity_defect(H, trials=trials, project=False, seed=seed))
    return [
        _below("pseudo-hermiticity on constrained states", worst, 1e-9, "max over presets"),
        _above("boundary term without constraints", loudest, 1e-3, "max over presets"),
    ]


def check_adjoint(grid, params, S, bc) -> list[CheckResult]:
    H = build_hamiltonian(grid, params, S, 0.0, bc)
    M = H.reduced.toarray()
    twice = generalized_adjoint(generalized_adjoint(M))
    involution = np.abs(twice - M).max() / np.abs(M).max()
    equal = np.abs(generalized_adjoint(M) - M).max() / np.abs(M).max()
    return [
        _below("generalized adjoint involution", involution, 1e-12),
        _below("generalized adjoint equals H on the constrained space", equal, 1e-10),
    ]


def check_round_trips(grid, params, seed) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    z = lambda: rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)
    s = KFGState(grid, z(), z(), 0.3)
    back = fv_to_kfg(kfg_to_fv(s, params), params)
    scale = max(np.abs(s.psi).max(), np.abs(s.psi_t).max())
    err = max(np.abs(back.psi - s.psi).max(), np.abs(back.psi_t - s.psi_t).max()) / scale
    f = FVState(grid, z(), z())
    cc = charge_conjugate(charge_conjugate(f))
    exact = np.array_equal(cc.phi, f.phi) and np.array_equal(cc.chi, f.chi)
    return [
        _below("psi <-> Psi round trip", err, 1e-12),
        CheckResult("charge conjugation involution", exact, 0.0 if exact else 1.0, 0.0, "bitwise"),
    ]


def check_fv_pairing(grid, params, S, bc) -> CheckResult:
    if grid.n > 256:
        grid = Grid(grid.a, grid.b, 256)
    H = build_hamiltonian(grid, params, S if S.static else ScalarPotential.zero(), 0.0, bc)
    report = fv_spectrum_symmetry_check(H)
    return _below("FV spectrum closed under E -> -E*", report.pairing_defect, 1e-8,
                  f"{report.nonreal_count} non-real")


def _two_mode_state(grid):
    x = grid.x
    return KFGState(grid, np.sin(x) + 0.5j * np.sin(2 * x), -1j * math.sqrt(2) * np.sin(x) + 0.5 * math.sqrt(5) * np.sin(2 * x))


def check_continuity_convergence() -> CheckResult:
    params = PhysicalParams()
    errors = []
    for n in (64, 128, 256):
        grid = Grid(0.0, math.pi, n)
        dt = 0.5 * grid.h
        cfg = EvolutionConfig(dt, int(round(1.0 / dt)), "kfg", preset("dirichlet"), params=params)
        traj = evolve_trajectory(_two_mode_state(grid), cfg)
        errors.append(np.abs(continuity_residual(traj.kfg_states(), grid, params)).max())
    ratio = min(_halving_ratios(errors))
    return _above("continuity residual halving ratio", ratio, 3.5, f"errors {errors[-1]:.2e}")


def _majorana_run(n, S, component="phi", kind=MajoranaKind.STANDARD):
    params = PhysicalParams()
    grid = Grid(0.0, math.pi, n)
    x = grid.x
    dt = 0.5 * grid.h
    cfg = EvolutionConfig(dt, int(round(1.0 / dt)), f"majorana_{component}", preset("dirichlet"), S, params, kind)
    psi = np.sin(x) + 0.3 * np.sin(2 * x)
    vel = 0.5 * np.sin(3 * x)
    if kind is MajoranaKind.NONSTANDARD:
        psi, vel = 1j * psi, 1j * vel
    return evolve_trajectory(KFGState(grid, psi, vel), cfg), cfg


def check_second_order_residuals() -> list[CheckResult]:
    out = []
    for label, S in (("static", ScalarPotential(lambda x, t: 0.3 * np.cos(2 * x), True, "cos")),
                     ("time dependent", ScalarPotential.sinusoidal_t(0.1, 2.0))):
        errors = []
        for n in (64, 128, 256):
            traj, cfg = _majorana_run(n, S)
            errors.append(np.abs(second_order_majorana_residual(traj, cfg, "phi_standard")).max())
        out.append(_above(f"second-order phi residual halving ratio ({label})", min(_halving_ratios(errors)), 3.5))
    traj, cfg = _majorana_run(128, ScalarPotential.sinusoidal_t(0.1, 2.0))
    total = second_order_majorana_residual(traj, cfg, "phi_standard") + second_order_majorana_residual(traj, cfg, "chi_standard")
    out.append(_below("phi + chi residuals reproduce the psi residual", np.abs(total - kfg_residual(traj, cfg)).max(), 1e-10))
    return out


def check_nonrel_residuals() -> list[CheckResult]:
    params = PhysicalParams()
    S = ScalarPotential(lambda x, t: 0.3 * np.cos(2 * x), True, "cos")
    errors, b13 = [], 0.0
    for n in (64, 128, 256):
        grid = Grid(0.0, math.pi, n)
        dt = 0.5 * grid.h
        env = EnvelopeState(grid, np.sin(grid.x) + 0.5 * np.sin(2 * grid.x))
        traj = SchrodingerPropagator(grid, params, S, preset("dirichlet")).evolve(env, dt, int(round(1.0 / dt)))
        errors.append(np.abs(b11_residual(traj, params, S)).max())
        b13 = max(b13, max(b13_identity_defect(e, params) for e in traj))
    order = min(math.log2(r) for r in _halving_ratios(errors))
    return [
        _above("b11_residual convergence order", order, 1.9),
        CheckResult("b13 phase identity", b13 == 0.0, b13, 0.0, "every node"),
    ]


def check_config_run(cfg, initial) -> list[CheckResult]:
    """Short runs of the configured problem: conservation and impenetrability."""
    grid = initial.grid
    out = []
    evo = cfg.evolution
    steps = min(evo.steps, 200)
    fv_cfg = EvolutionConfig(0.5 * grid.h / cfg.params.c, steps, "fv", cfg.bc, cfg.potential, cfg.params)
    fv0 = kfg_to_fv(initial, cfg.params)
    start = FVState(grid, fv0.phi + 0.25 * np.abs(fv0.phi), fv0.chi)
    traj = evolve_trajectory(start, fv_cfg)
    pn = traj.pseudo_norm
    scale = max(abs(pn[0]), 1e-300)
    out.append(_below("FV pseudo-norm drift", abs(pn[-1] - pn[0]) / scale, 1e-10, f"{steps} steps"))
    if is_majorana_admissible(cfg.bc):
        maj = EvolutionConfig(0.5 * grid.h / cfg.params.c, steps, "majorana_phi", cfg.bc, cfg.potential, cfg.params,
                              MajoranaKind.STANDARD)
        u = initial.psi.real
        run = evolve_trajectory(KFGState(grid, u, np.zeros(grid.n)), maj)
        zero_j = all(v == 0.0 for v in run.j_a + run.j_b)
        rho = max(np.abs(o.rho).max() for o in run.observables)
        out.append(CheckResult("Majorana impenetrability j(a)=j(b)=0", zero_j, 0.0 if zero_j else 1.0, 0.0, "bitwise"))
        out.append(_below("Majorana density vanishes", rho, 1e-14))
        out.append(_below("Majorana defect", max(run.majorana_defect), 1e-8))
    return out


def run_suite(cfg) -> list[CheckResult]:
    """All checks for a validated :class:`RunConfig`."""
    grid, params, bc = cfg.grid, cfg.params, cfg.bc
    S = cfg.potential if cfg.potential.static else ScalarPotential.zero()
    coarse = grid if grid.n <= 256 else Grid(grid.a, grid.b, 256)
    results = [check_rank_classification()]
    results += check_pseudo_hermiticity(coarse, params, S, cfg.check_trials, cfg.seed)
    results += check_adjoint(coarse, params, S, bc)
    results += check_round_trips(grid, params, cfg.seed)
    results.append(check_fv_pairing(coarse, params, S, bc))
    results.append(check_continuity_convergence())
    results += check_second_order_residuals()
    results += check_nonrel_residuals()
    results += check_config_run(cfg, cfg.initial_state())
    return results
