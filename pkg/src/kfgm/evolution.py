"""Time integrators for the KFG, FV and first-order Majorana formulations.

All steppers work in the reduced coordinates of :class:`ConstrainedSpace`, so
every recorded field satisfies the discrete boundary condition.

* ``kfg``: position Verlet (drift, kick, drift) for
  ``hbar^2 psi_tt = hbar^2 c^2 psi_xx - (mc^2)^2 psi - 2 mc^2 S psi``.
* ``fv``: Crank-Nicolson on the reduced FV Hamiltonian.
* ``majorana_phi`` / ``majorana_chi``: the split form.  The real part (standard
  kind) or imaginary part (nonstandard kind) of the selected component obeys
  the real KFG equation; the other part is ``+-(hbar/mc^2)`` times its time
  derivative, and the partner component follows from the Majorana condition.
  A complex component therefore carries its own velocity, no extra state is
  needed.

With ``integrator="spectral"`` and a static potential the second-order routes
are propagated exactly in time through the eigenbasis of the reduced operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .boundary import BoundaryParams, is_majorana_admissible, preset
from .core import (
    FVState,
    Grid,
    KFGState,
    MajoranaKind,
    PhysicalParams,
    ValidationError,
    fv_to_kfg,
    kfg_to_fv,
    majorana_defect,
)
from .operators import (
    ConstrainedSpace,
    DiscreteHamiltonian,
    Observables,
    ScalarPotential,
    _fv_from_scalar,
    charge_density,
    current_density,
    kinetic_operator,
    pseudo_inner_product,
    uniform_step,
)

FORMULATIONS = ("kfg", "fv", "majorana_phi", "majorana_chi")
INTEGRATORS = ("default", "spectral")


class NumericalError(RuntimeError):
    """A solver failed or produced non-finite values."""


# ---------------------------------------------------------------------------
# Reduced operators
# ---------------------------------------------------------------------------


class ReducedOperators:
    """Compressed kinetic and potential operators for one (grid, params, bc, S)."""

    def __init__(self, grid: Grid, params: PhysicalParams, bc: BoundaryParams, S: ScalarPotential,
                 space: ConstrainedSpace | None = None):
        self.grid = grid
        self.params = params
        self.bc = bc
        self.S = S
        self.space = ConstrainedSpace(grid, bc) if space is None else space
        self.kin = self.space.compress(kinetic_operator(grid, params))
        self.eye = sp.identity(self.space.dim, format="csr")
        self._static_pot = self._compress_potential(0.0) if S.static else None
        self._static_kfg = None
        self._cn_cache: dict[float, tuple] = {}

    def _compress_potential(self, t: float) -> sp.csr_matrix:
        s = self.S(self.grid.x, t)
        return (self.space.QhW.multiply(s[None, :]) @ self.space.Q).tocsr()

    def potential(self, t: float) -> sp.csr_matrix:
        return self._static_pot if self._static_pot is not None else self._compress_potential(t)

    def scalar(self, t: float) -> sp.csr_matrix:
        """Reduced ``p^2/2m + S``."""
        return (self.kin + self.potential(t)).tocsr()

    def kfg_operator(self, t: float) -> sp.csr_matrix:
        """``[2 mc^2 (p^2/2m + S) + (mc^2)^2] / hbar^2``, so that ``y_tt = -op y``."""
        if self._static_pot is not None and self._static_kfg is not None:
            return self._static_kfg
        mc2, hbar = self.params.mc2, self.params.hbar
        op = ((2 * mc2 * self.scalar(t) + mc2**2 * self.eye) / hbar**2).tocsr()
        if self._static_pot is not None:
            self._static_kfg = op
        return op

    def kfg_apply(self, t: float, y: np.ndarray) -> np.ndarray:
        """``kfg_operator(t) @ y`` without assembling a time dependent potential."""
        if self._static_pot is not None:
            return self.kfg_operator(t) @ y
        mc2, hbar = self.params.mc2, self.params.hbar
        s = self.S(self.grid.x, t)
        pot_y = self.space.QhW @ (s * (self.space.Q @ y))
        return (2 * mc2 * (self.kin @ y + pot_y) + mc2**2 * y) / hbar**2

    def fv_operator(self, t: float) -> sp.csr_matrix:
        return _fv_from_scalar(self.scalar(t), self.params.mc2)

    def cn_factors(self, t: float, dt: float):
        """LU of ``1 + i dt H / 2 hbar`` and the explicit ``1 - i dt H / 2 hbar``."""
        if self._static_pot is not None and dt in self._cn_cache:
            return self._cn_cache[dt]
        factors = _cn_factors(self.fv_operator(t), dt, self.params.hbar)
        if self._static_pot is not None:
            self._cn_cache[dt] = factors
        return factors

    def real_lift(self, values: np.ndarray) -> np.ndarray:
        """Reduced coordinates of a field that must stay real when the basis is real."""
        y = self.space.to_reduced(values)
        return y.real.copy() if self.space.real and np.isrealobj(values) else y


def _cn_factors(H: sp.spmatrix, dt: float, hbar: float):
    eye = sp.identity(H.shape[0], format="csc")
    a = (0.5j * dt / hbar) * H
    try:
        lu = spla.splu((eye + a).tocsc())
    except RuntimeError as exc:
        raise NumericalError(f"Crank-Nicolson matrix is singular: {exc}") from exc
    return lu, (eye - a).tocsr()


# ---------------------------------------------------------------------------
# Configuration and trajectory
# ---------------------------------------------------------------------------


@dataclass
class EvolutionConfig:
    dt: float
    steps: int
    formulation: str = "kfg"
    bc: BoundaryParams = field(default_factory=lambda: preset("dirichlet"))
    S: ScalarPotential = field(default_factory=ScalarPotential.zero)
    params: PhysicalParams = field(default_factory=PhysicalParams)
    kind: MajoranaKind | None = None
    record_every: int = 1
    integrator: str = "default"
    _ops: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind is not None:
            self.kind = MajoranaKind.parse(self.kind)

    @property
    def is_majorana(self) -> bool:
        return self.formulation.startswith("majorana")

    @property
    def component(self) -> str | None:
        return self.formulation.split("_", 1)[1] if self.is_majorana else None

    def cfl(self, grid: Grid) -> float:
        return self.params.c * self.dt / grid.h

    def validate(self, grid: Grid) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError("dt", f"must be positive, got {self.dt!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValidationError("steps", f"must be an integer >= 1, got {self.steps!r}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValidationError("record_every", f"must be an integer >= 1, got {self.record_every!r}")
        if self.formulation not in FORMULATIONS:
            raise ValidationError("formulation", f"must be one of {', '.join(FORMULATIONS)}, got {self.formulation!r}")
        if self.integrator not in INTEGRATORS:
            raise ValidationError("integrator", f"must be one of {', '.join(INTEGRATORS)}, got {self.integrator!r}")
        if self.is_majorana:
            if self.kind is None:
                raise ValidationError("kind", "majorana formulations need a Majorana kind")
            if not is_majorana_admissible(self.bc):
                raise ValidationError(
                    "boundary",
                    f"{self.bc.name or 'custom'} (m2={self.bc.m2:.3g}) is not Majorana admissible",
                )
        if self.integrator == "spectral":
            if self.formulation == "fv":
                raise ValidationError("integrator", "spectral propagation is available for kfg and majorana routes only")
            if not self.S.static:
                raise ValidationError("integrator", "spectral propagation needs a static potential")
        elif self.formulation != "fv" and self.cfl(grid) > 1.0 + 1e-12:
            raise ValidationError("dt", f"CFL number c*dt/h = {self.cfl(grid):.4g} exceeds 1")

    def operators(self, grid: Grid) -> ReducedOperators:
        ops = self._ops.get(grid)
        if ops is None:
            ops = ReducedOperators(grid, self.params, self.bc, self.S)
            self._ops[grid] = ops
        return ops


@dataclass
class Trajectory:
    """Recorded states (always as FV pairs) and their observables.

    Record 0 is the initial state; then one record every ``record_every`` steps.
    """

    grid: Grid
    params: PhysicalParams
    formulation: str
    kind: MajoranaKind | None
    times: list[float] = field(default_factory=list)
    states: list[FVState] = field(default_factory=list)
    observables: list[Observables] = field(default_factory=list)
    majorana_defect: list[float] = field(default_factory=list)
    j_a: list[float] = field(default_factory=list)
    j_b: list[float] = field(default_factory=list)
    l2_psi: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    def append(self, state: FVState, kfg: KFGState | None = None) -> None:
        if self.times and not state.t > self.times[-1]:
            raise ValueError("trajectory times must increase strictly")
        kfg = fv_to_kfg(state, self.params) if kfg is None else kfg
        j = current_density(kfg.psi, self.grid, self.params)
        rho = charge_density(kfg, self.params)
        pn = pseudo_inner_product(state, state)
        self.times.append(state.t)
        self.states.append(state)
        self.observables.append(Observables(rho, j, pn, state.t))
        self.majorana_defect.append(majorana_defect(state, self.kind or MajoranaKind.STANDARD))
        self.j_a.append(float(j[0]))
        self.j_b.append(float(j[-1]))
        self.l2_psi.append(self.grid.norm(kfg.psi))

    @property
    def pseudo_norm(self) -> np.ndarray:
        return np.array([o.pseudo_norm for o in self.observables])

    def kfg_states(self) -> list[KFGState]:
        return [fv_to_kfg(s, self.params) for s in self.states]

    def field(self, name: str) -> np.ndarray:
        """Stacked ``(T, n)`` array of ``phi``, ``chi`` or ``psi``."""
        if name == "psi":
            return np.array([s.phi + s.chi for s in self.states])
        if name in ("phi", "chi"):
            return np.array([getattr(s, name) for s in self.states])
        raise KeyError(f"unknown field {name!r}")

    @property
    def final(self) -> FVState:
        return self.states[-1]


# ---------------------------------------------------------------------------
# Single steps
# ---------------------------------------------------------------------------


def _verlet(ops: ReducedOperators, y: np.ndarray, v: np.ndarray, t: float, dt: float):
    y = y + 0.5 * dt * v
    v = v - dt * ops.kfg_apply(t + 0.5 * dt, y)
    y = y + 0.5 * dt * v
    return y, v


def step_kfg(state: KFGState, cfg: EvolutionConfig) -> KFGState:
    """One position-Verlet step; real input stays real."""
    cfg.validate(state.grid)
    ops = cfg.operators(state.grid)
    y, v = _lift_kfg(ops, state)
    y, v = _verlet(ops, y, v, state.t, cfg.dt)
    return KFGState(state.grid, ops.space.from_reduced(y), ops.space.from_reduced(v), state.t + cfg.dt)


def step_fv(state: FVState, H: DiscreteHamiltonian, dt: float) -> FVState:
    """One Crank-Nicolson step with the reduced matrix of ``H``.

    For a time dependent potential ``H`` should be built at ``t + dt/2``.
    """
    if H.space is None or H.params is None:
        raise ValueError("step_fv needs a Hamiltonian from build_hamiltonian")
    space = H.space
    lu, rhs = _cn_factors(H.reduced, dt, H.params.hbar)
    z = np.concatenate([space.to_reduced(state.phi), space.to_reduced(state.chi)])
    z = _cn_solve(lu, rhs, z)
    m = space.dim
    return FVState(state.grid, space.from_reduced(z[:m]), space.from_reduced(z[m:]), state.t + dt)


def _cn_solve(lu, rhs, z):
    out = lu.solve(rhs @ z)
    if not np.all(np.isfinite(out)):
        raise NumericalError("Crank-Nicolson step produced non-finite values")
    return out


# Split-form bookkeeping: which part of the component is the KFG field and
# the sign of its velocity in the other part.
def _split(component: str, kind: MajoranaKind) -> tuple[str, float]:
    if kind is MajoranaKind.STANDARD:
        return "real", (1.0 if component == "phi" else -1.0)
    return "imag", (-1.0 if component == "phi" else 1.0)


def component_to_field(values: np.ndarray, component: str, kind: MajoranaKind, params: PhysicalParams):
    """Real KFG field ``q`` and its velocity ``q_t`` carried by a Majorana component."""
    part, sign = _split(component, MajoranaKind.parse(kind))
    kappa = params.hbar / params.mc2
    values = np.asarray(values, dtype=complex)
    if part == "real":
        return values.real.copy(), sign * values.imag / kappa
    return values.imag.copy(), sign * values.real / kappa


def field_to_component(q: np.ndarray, q_t: np.ndarray, component: str, kind: MajoranaKind,
                       params: PhysicalParams) -> np.ndarray:
    part, sign = _split(component, MajoranaKind.parse(kind))
    kappa = params.hbar / params.mc2
    if part == "real":
        return q + 1j * (sign * kappa * q_t)
    return (sign * kappa * q_t) + 1j * q


def assemble_majorana(values: np.ndarray, component: str, kind: MajoranaKind, grid: Grid, t: float) -> FVState:
    """Complete ``Psi`` from one component using ``Psi = +-Psi_c``."""
    kind = MajoranaKind.parse(kind)
    partner = np.conj(values) if kind is MajoranaKind.STANDARD else -np.conj(values)
    if component == "phi":
        return FVState(grid, values, partner, t)
    return FVState(grid, partner, values, t)


def step_majorana_first_order(values: np.ndarray, cfg: EvolutionConfig, grid: Grid, t: float = 0.0) -> np.ndarray:
    """Advance ``phi`` (or ``chi``) by one step of its first-order Majorana equation."""
    cfg.validate(grid)
    if not cfg.is_majorana:
        raise ValidationError("formulation", "step_majorana_first_order needs a majorana_* formulation")
    ops = cfg.operators(grid)
    q, q_t = component_to_field(values, cfg.component, cfg.kind, cfg.params)
    y, v = _verlet(ops, ops.real_lift(q), ops.real_lift(q_t), t, cfg.dt)
    return field_to_component(ops.space.from_reduced(y), ops.space.from_reduced(v), cfg.component, cfg.kind, cfg.params)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


def _lift_kfg(ops: ReducedOperators, state: KFGState):
    psi, psi_t = state.psi, state.psi_t
    if ops.space.real and not np.any(psi.imag) and not np.any(psi_t.imag):
        psi, psi_t = psi.real, psi_t.real
    return ops.real_lift(psi), ops.real_lift(psi_t)


def _as_kfg(initial, params) -> KFGState:
    return initial if isinstance(initial, KFGState) else fv_to_kfg(initial, params)


def _as_fv(initial, params) -> FVState:
    return initial if isinstance(initial, FVState) else kfg_to_fv(initial, params)


class _SpectralPropagator:
    """Exact solution of ``y_tt = -A y`` for constant Hermitian ``A > 0``."""

    def __init__(self, A: sp.spmatrix, y0: np.ndarray, v0: np.ndarray):
        w2, vecs = la.eigh(A.toarray())
        if w2[0] <= 0:
            raise NumericalError(f"spectral propagation needs E^2 > 0, lowest is {w2[0] * 1.0:.6g}")
        self.omega = np.sqrt(w2)
        self.vecs = vecs
        self.a = vecs.conj().T @ y0
        self.b = (vecs.conj().T @ v0) / self.omega

    def __call__(self, tau: float):
        c, s = np.cos(self.omega * tau), np.sin(self.omega * tau)
        y = self.vecs @ (c * self.a + s * self.b)
        v = self.vecs @ (self.omega * (c * self.b - s * self.a))
        return y, v


def _second_order_records(ops, cfg, y, v, t0) -> Iterator[tuple[float, np.ndarray, np.ndarray]]:
    """Yield (t, y, v) at every record, the initial one included."""
    yield t0, y, v
    if cfg.integrator == "spectral":
        prop = _SpectralPropagator(ops.kfg_operator(t0), y, v)
        for k in range(cfg.record_every, cfg.steps + 1, cfg.record_every):
            yield (t0 + k * cfg.dt, *prop(k * cfg.dt))
        return
    for k in range(1, cfg.steps + 1):
        y, v = _verlet(ops, y, v, t0 + (k - 1) * cfg.dt, cfg.dt)
        if k % cfg.record_every == 0:
            if not (np.all(np.isfinite(y)) and np.all(np.isfinite(v))):
                raise NumericalError(f"non-finite field at step {k}")
            yield t0 + k * cfg.dt, y, v


def evolve_trajectory(initial: KFGState | FVState, cfg: EvolutionConfig) -> Trajectory:
    """Evolve ``initial`` with ``cfg`` and record observables every ``record_every`` steps."""
    grid = initial.grid
    cfg.validate(grid)
    ops = cfg.operators(grid)
    params = cfg.params
    traj = Trajectory(grid, params, cfg.formulation, cfg.kind)
    space = ops.space
    t0 = float(initial.t)

    if cfg.formulation == "kfg":
        y, v = _lift_kfg(ops, _as_kfg(initial, params))
        for t, y, v in _second_order_records(ops, cfg, y, v, t0):
            kfg = KFGState(grid, space.from_reduced(y), space.from_reduced(v), t)
            traj.append(kfg_to_fv(kfg, params), kfg)
        return traj

    if cfg.is_majorana:
        fv = _as_fv(initial, params)
        start = fv.phi if cfg.component == "phi" else fv.chi
        q, q_t = component_to_field(start, cfg.component, cfg.kind, params)
        y, v = ops.real_lift(q), ops.real_lift(q_t)
        for t, y, v in _second_order_records(ops, cfg, y, v, t0):
            values = field_to_component(space.from_reduced(y), space.from_reduced(v), cfg.component, cfg.kind, params)
            traj.append(assemble_majorana(values, cfg.component, cfg.kind, grid, t))
        return traj

    fv = _as_fv(initial, params)
    m = space.dim
    z = np.concatenate([space.to_reduced(fv.phi), space.to_reduced(fv.chi)])

    def record(t, z):
        traj.append(FVState(grid, space.from_reduced(z[:m]), space.from_reduced(z[m:]), t))

    record(t0, z)
    for k in range(1, cfg.steps + 1):
        t_mid = t0 + (k - 0.5) * cfg.dt
        lu, rhs = ops.cn_factors(t_mid, cfg.dt)
        z = _cn_solve(lu, rhs, z)
        if k % cfg.record_every == 0:
            record(t0 + k * cfg.dt, z)
    return traj


# ---------------------------------------------------------------------------
# Second-order residuals
# ---------------------------------------------------------------------------

# equation -> (field, sign of the (E S) term, conjugate sign inside the bracket)
RESIDUAL_EQUATIONS = {
    "phi_standard": ("phi", 1.0, 1.0),
    "chi_standard": ("chi", -1.0, 1.0),
    "psi": ("psi", 0.0, 0.0),
    "phi_nonstandard": ("phi", 1.0, -1.0),
    "chi_nonstandard": ("chi", -1.0, -1.0),
}


def default_equation(formulation: str, kind: MajoranaKind | None) -> str:
    component = formulation.split("_", 1)[1] if formulation.startswith("majorana") else "phi"
    standard = kind is None or MajoranaKind.parse(kind) is MajoranaKind.STANDARD
    if component == "phi":
        return "phi_standard" if standard else "phi_nonstandard"
    return "chi_standard" if standard else "chi_nonstandard"


def potential_rate(S: ScalarPotential, x: np.ndarray, t: float, delta: float) -> np.ndarray:
    """Fourth-order central-difference ``dS/dt``; zero for static potentials."""
    if S.static:
        return np.zeros_like(x)
    return (-S(x, t + 2 * delta) + 8 * S(x, t + delta) - 8 * S(x, t - delta) + S(x, t - 2 * delta)) / (12 * delta)


def _d2_fourth(values: np.ndarray, step: float, axis: int) -> np.ndarray:
    """Five-point second derivative on the interior ``[2:-2]`` of ``axis``."""
    v = np.moveaxis(values, axis, 0)
    d2 = (-v[4:] + 16 * v[3:-1] - 30 * v[2:-2] + 16 * v[1:-3] - v[:-4]) / (12 * step**2)
    return np.moveaxis(d2, 0, axis)


def second_order_majorana_residual(traj: Trajectory, cfg: EvolutionConfig, equation: str | None = None) -> np.ndarray:
    """Residual of ``[E^2 - (c p)^2 - (mc^2)^2 - 2 mc^2 S] f - (E S)(...)`` with ``E = i hbar d/dt``.

    Derivatives use five-point fourth-order stencils, independent of the
    second-order operators inside the steppers, so the residual of a
    numerical trajectory measures the scheme's own truncation error.
    Returns shape ``(len(traj) - 4, n - 4)``: records ``2..T-3`` at nodes
    ``2..n-3``.
    """
    equation = default_equation(traj.formulation, traj.kind) if equation is None else equation.lower()
    if equation not in RESIDUAL_EQUATIONS:
        raise KeyError(f"unknown equation {equation!r}; choose from {', '.join(RESIDUAL_EQUATIONS)}")
    if len(traj) < 5:
        raise ValueError("need at least 5 records")
    name, es_sign, conj_sign = RESIDUAL_EQUATIONS[equation]
    dt = uniform_step(traj.times)
    grid, params = traj.grid, traj.params
    hbar, c, mc2 = params.hbar, params.c, params.mc2
    f = traj.field(name)
    core = f[2:-2, 2:-2]
    f_tt = _d2_fourth(f[:, 2:-2], dt, 0)
    f_xx = _d2_fourth(f[2:-2], grid.h, 1)
    x = grid.x[2:-2]
    times = traj.times[2:-2]
    s = np.array([cfg.S(x, t) for t in times])
    lhs = -(hbar**2) * f_tt + (hbar * c) ** 2 * f_xx - mc2**2 * core - 2 * mc2 * s * core
    if es_sign == 0.0:
        return lhs
    s_t = np.array([potential_rate(cfg.S, x, t, dt) for t in times])
    rhs = es_sign * 1j * hbar * s_t * (core + conj_sign * np.conj(core))
    return lhs - rhs


def kfg_residual(traj: Trajectory, cfg: EvolutionConfig) -> np.ndarray:
    """The plain KFG residual on ``psi = phi + chi``."""
    return second_order_majorana_residual(traj, cfg, "psi")
