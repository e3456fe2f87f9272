"""Nonrelativistic limit of the standard Majorana equation for ``phi``.

The envelope ``phi_NR = phi exp(+i mc^2 t / hbar)`` of a relativistic run is
compared with a Schrodinger reference ``i hbar d_t phi_NR = (p^2/2m + S) phi_NR``
integrated by Crank-Nicolson on the same constrained subspace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .boundary import BoundaryParams, is_majorana_admissible
from .core import Grid, KFGState, MajoranaKind, PhysicalParams, ValidationError
from .evolution import (
    EvolutionConfig,
    NumericalError,
    ReducedOperators,
    Trajectory,
    _cn_factors,
    _cn_solve,
    _d2_fourth,
    evolve_trajectory,
)
from .operators import ScalarPotential, uniform_step


@dataclass(frozen=True)
class EnvelopeState:
    grid: Grid
    phi_nr: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.phi_nr, dtype=complex)
        if values.shape != (self.grid.n,):
            raise ValueError(f"phi_nr has shape {values.shape}, expected ({self.grid.n},)")
        if not np.all(np.isfinite(values)):
            raise ValueError("phi_nr contains non-finite values")
        object.__setattr__(self, "phi_nr", values)

    def norm(self) -> float:
        return self.grid.norm(self.phi_nr)


def rest_phase(t: float, params: PhysicalParams) -> complex:
    """``exp(-i mc^2 t / hbar)``."""
    return complex(np.exp(-1j * params.mc2 * t / params.hbar))


def extract_envelope(phi: np.ndarray, t: float, params: PhysicalParams, grid: Grid) -> EnvelopeState:
    """``phi_NR = phi * exp(+i mc^2 t / hbar)``."""
    return EnvelopeState(grid, np.asarray(phi, dtype=complex) * np.conj(rest_phase(t, params)), t)


def restore_phase(env: EnvelopeState, params: PhysicalParams) -> np.ndarray:
    """Inverse of :func:`extract_envelope`."""
    return env.phi_nr * rest_phase(env.t, params)


# ---------------------------------------------------------------------------
# Schrodinger reference
# ---------------------------------------------------------------------------


class SchrodingerPropagator:
    """Crank-Nicolson for ``i hbar d_t f = (p^2/2m + S) f`` in reduced coordinates."""

    def __init__(self, grid: Grid, params: PhysicalParams, S: ScalarPotential, bc: BoundaryParams):
        if not is_majorana_admissible(bc):
            raise ValidationError("boundary", f"{bc.name or 'custom'} is not Majorana admissible")
        self.ops = ReducedOperators(grid, params, bc, S)
        self.params = params
        self._cache: dict[float, tuple] = {}

    def factors(self, t_mid: float, dt: float):
        if self.ops.S.static and dt in self._cache:
            return self._cache[dt]
        out = _cn_factors(self.ops.scalar(t_mid), dt, self.params.hbar)
        if self.ops.S.static:
            self._cache[dt] = out
        return out

    def step(self, y: np.ndarray, t: float, dt: float) -> np.ndarray:
        lu, rhs = self.factors(t + 0.5 * dt, dt)
        return _cn_solve(lu, rhs, y)

    def evolve(self, env: EnvelopeState, dt: float, steps: int, record_every: int = 1) -> list[EnvelopeState]:
        if dt <= 0 or steps < 1 or record_every < 1:
            raise ValueError("need dt > 0, steps >= 1 and record_every >= 1")
        space = self.ops.space
        y = space.to_reduced(env.phi_nr)
        out = [EnvelopeState(env.grid, space.from_reduced(y), env.t)]
        for k in range(1, steps + 1):
            y = self.step(y, env.t + (k - 1) * dt, dt)
            if k % record_every == 0:
                out.append(EnvelopeState(env.grid, space.from_reduced(y), env.t + k * dt))
        return out


def step_schrodinger(env: EnvelopeState, S: ScalarPotential, bc: BoundaryParams, dt: float,
                     params: PhysicalParams) -> EnvelopeState:
    """One Crank-Nicolson step of the Schrodinger equation with the same boundary condition."""
    return SchrodingerPropagator(env.grid, params, S, bc).evolve(env, dt, 1)[-1]


# ---------------------------------------------------------------------------
# Residuals and identities
# ---------------------------------------------------------------------------


def b11_residual(env_traj: Sequence[EnvelopeState], params: PhysicalParams, S: ScalarPotential) -> np.ndarray:
    """``Re[exp(-i mc^2 t/hbar) (-i hbar d_t + p^2/2m + S) phi_NR]`` per record.

    Fourth-order five-point stencils in time and space; returns shape
    ``(T - 4, n - 4)`` for records ``2..T-3`` at nodes ``2..n-3``.
    """
    if len(env_traj) < 5:
        raise ValueError("need at least 5 envelope records")
    times = [e.t for e in env_traj]
    dt = uniform_step(times)
    grid = env_traj[0].grid
    f = np.array([e.phi_nr for e in env_traj])
    f_t = (-f[4:, 2:-2] + 8 * f[3:-1, 2:-2] - 8 * f[1:-3, 2:-2] + f[:-4, 2:-2]) / (12 * dt)
    f_xx = _d2_fourth(f[2:-2], grid.h, 1)
    core = f[2:-2, 2:-2]
    x = grid.x[2:-2]
    mid = times[2:-2]
    s = np.array([S(x, t) for t in mid])
    bracket = -1j * params.hbar * f_t - params.hbar**2 / (2 * params.mass) * f_xx + s * core
    phase = np.array([rest_phase(t, params) for t in mid])[:, None]
    return np.real(phase * bracket)


def b13_identity_defect(env: EnvelopeState, params: PhysicalParams) -> float:
    """``max |Im z - Re(-i z)|`` with ``z = phi_NR exp(-i mc^2 t/hbar)``; always zero."""
    z = restore_phase(env, params)
    return float(np.max(np.abs(np.imag(z) - np.real(-1j * z))))


# ---------------------------------------------------------------------------
# Comparison and the limit study
# ---------------------------------------------------------------------------


def nonrel_deviation(rel_traj: Trajectory, schro_traj: Sequence[EnvelopeState], params: PhysicalParams,
                     time_tol: float = 1e-9) -> np.ndarray:
    """Relative L2 distance between the relativistic envelope and the Schrodinger one, per record."""
    if rel_traj.formulation != "majorana_phi" or rel_traj.kind is not MajoranaKind.STANDARD:
        raise ValueError("the relativistic trajectory must be a standard majorana_phi run")
    if len(rel_traj) != len(schro_traj):
        raise ValueError(f"record count mismatch: {len(rel_traj)} vs {len(schro_traj)}")
    grid = rel_traj.grid
    out = np.empty(len(rel_traj))
    for i, (state, env) in enumerate(zip(rel_traj.states, schro_traj)):
        if env.grid != grid:
            raise ValueError("grids differ")
        if abs(state.t - env.t) > time_tol * max(1.0, abs(env.t)):
            raise ValueError(f"time samples differ at record {i}: {state.t} vs {env.t}")
        rel = extract_envelope(state.phi, state.t, params, grid)
        ref = env.norm()
        if ref == 0:
            raise ValueError("reference envelope has zero norm")
        out[i] = grid.norm(rel.phi_nr - env.phi_nr) / ref
    return out


def kinetic_ratio(phi_nr: np.ndarray, ops: ReducedOperators) -> float:
    """``<p^2/2m> / mc^2`` of an envelope (trapezoidal expectation value)."""
    y = ops.space.to_reduced(np.asarray(phi_nr, dtype=complex))
    norm2 = float(np.vdot(y, y).real)
    if norm2 == 0:
        raise ValueError("envelope has zero norm")
    return float(np.vdot(y, ops.kin @ y).real) / norm2 / ops.params.mc2


@dataclass(frozen=True)
class LadderRung:
    mc2: float
    epsilon: float
    times: np.ndarray
    deviation: np.ndarray

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.deviation[1:] ** 2))) if len(self.deviation) > 1 else 0.0


@dataclass(frozen=True)
class LadderResult:
    rungs: list[LadderRung]
    alpha: float
    intercept: float
    monotone: bool
    status: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"


ROUNDING_FLOOR = 1e-12


def _fit_exponent(rungs: Sequence[LadderRung]) -> tuple[float, float, str]:
    if len(rungs) < 2:
        return math.nan, math.nan, "insufficient_data"
    eps = np.array([r.epsilon for r in rungs])
    rms = np.array([r.rms for r in rungs])
    # rounding-level data (e.g. a zero-kinetic envelope) carries no scaling information
    if np.any(eps <= ROUNDING_FLOOR) or np.any(rms <= ROUNDING_FLOOR) or np.any(~np.isfinite(rms)):
        return math.nan, math.nan, "degenerate"
    slope, intercept = np.polyfit(np.log(eps), np.log(rms), 1)
    return float(slope), float(intercept), "ok"


def nonrel_ladder(
    grid: Grid,
    envelope: np.ndarray,
    bc: BoundaryParams,
    S: ScalarPotential,
    mc2_values: Sequence[float],
    t_final: float = 1.0,
    samples: int = 50,
    mass: float = 1.0,
    hbar: float = 1.0,
    schrodinger_substeps: int = 20,
    phase_tol: float = 1e-2,
) -> LadderResult:
    """Scaling study of the envelope deviation at fixed envelope, grid and time window.

    Each rung sets ``c = sqrt(mc2 / m)``.  Static potentials use exact
    spectral propagation of the split Majorana form; otherwise position
    Verlet with a step small enough that its fast-phase error stays a
    fraction ``phase_tol`` of the expected ``epsilon``-sized deviation.
    """
    if samples < 4:
        raise ValueError("samples must be >= 4")
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    if not mc2_values:
        raise ValidationError("mc2", "ladder needs at least one rest energy")
    sample_dt = t_final / samples
    rungs = []
    for mc2 in mc2_values:
        if mc2 <= 0:
            raise ValidationError("mc2", f"rest energies must be positive, got {mc2!r}")
        params = PhysicalParams(mass=mass, c=math.sqrt(mc2 / mass), hbar=hbar)
        ops = ReducedOperators(grid, params, bc, S)
        f = ops.space.project(np.asarray(envelope, dtype=complex))
        eps = kinetic_ratio(f, ops)
        if S.static:
            cfg = EvolutionConfig(sample_dt, samples, "majorana_phi", bc, S, params, MajoranaKind.STANDARD,
                                  integrator="spectral")
        else:
            omega = mc2 / hbar
            dt = math.sqrt(24 * phase_tol * max(eps, 1e-6) / (omega**3 * t_final))
            dt = min(dt, 0.5 * grid.h / params.c)
            per = max(1, math.ceil(sample_dt / dt))
            cfg = EvolutionConfig(sample_dt / per, samples * per, "majorana_phi", bc, S, params,
                                  MajoranaKind.STANDARD, record_every=per)
        cfg._ops[grid] = ops
        # phi(0) = f with zero velocity: u = Re f, Im phi = kappa u_t = 0
        initial = KFGState(grid, 2 * f.real, np.zeros(grid.n), 0.0)
        if np.any(f.imag):
            raise ValidationError("envelope", "the standard Majorana envelope must start real")
        rel = evolve_trajectory(initial, cfg)
        schro = SchrodingerPropagator(grid, params, S, bc)
        env0 = EnvelopeState(grid, f, 0.0)
        ref = schro.evolve(env0, sample_dt / schrodinger_substeps, samples * schrodinger_substeps,
                           schrodinger_substeps)
        dev = nonrel_deviation(rel, ref, params)
        rungs.append(LadderRung(float(mc2), eps, np.array(rel.times), dev))
    alpha, intercept, status = _fit_exponent(rungs)
    rms = [r.rms for r in rungs]
    order = np.argsort([r.mc2 for r in rungs])
    monotone = all(rms[order[i + 1]] <= rms[order[i]] for i in range(len(rungs) - 1))
    return LadderResult(rungs, alpha, intercept, monotone, status)


def doubling_ladder(mc2_start: float, doublings: int) -> list[float]:
    """``[mc2_start * 2**k for k in 0..doublings]``."""
    if doublings < 0:
        raise ValueError("doublings must be >= 0")
    return [mc2_start * 2.0**k for k in range(doublings + 1)]
