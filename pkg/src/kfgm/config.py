"""JSON run configuration, validated before any computation.

Every error is a :class:`ValidationError` whose ``key`` is the dotted path of
the offending entry, e.g. ``boundary.m`` or ``evolution.dt``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .boundary import PRESET_NAMES, BoundaryParams, BoundaryParamsError, preset
from .core import Grid, KFGState, MajoranaKind, PhysicalParams, ValidationError
from .evolution import FORMULATIONS, INTEGRATORS, EvolutionConfig, ReducedOperators
from .operators import ScalarPotential

POTENTIAL_FORMS = {
    "zero": (),
    "constant": ("s",),
    "gaussian_well": ("depth", "center", "width"),
    "sinusoidal_t": ("s0", "omega"),
}
INITIAL_FORMS = {
    "gaussian": ("center", "width"),
    "modes": ("coefficients",),
    "constant": ("value",),
}
VELOCITIES = ("zero", "positive_energy")

SECTIONS = ("params", "grid", "boundary", "potential", "evolution", "initial", "spectrum", "nonrel", "check", "seed")


def _number(section: dict, key: str, path: str, default=None, positive=False, integer=False):
    if key not in section:
        if default is None:
            raise ValidationError(f"{path}.{key}", "is required")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{path}.{key}", f"must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(f"{path}.{key}", "must be finite")
    if integer and int(value) != value:
        raise ValidationError(f"{path}.{key}", f"must be an integer, got {value!r}")
    if positive and value <= 0:
        raise ValidationError(f"{path}.{key}", f"must be positive, got {value!r}")
    return int(value) if integer else float(value)


def _section(raw: dict, name: str, allowed: tuple[str, ...]) -> dict:
    section = raw.get(name, {})
    if not isinstance(section, dict):
        raise ValidationError(name, "must be an object")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ValidationError(f"{name}.{unknown[0]}", f"unknown key; allowed: {', '.join(allowed)}")
    return section


@dataclass(frozen=True)
class InitialSpec:
    form: str = "gaussian"
    center: float | None = None
    width: float | None = None
    k0: float = 0.0
    amplitude: float = 1.0
    coefficients: tuple[float, ...] = ()
    value: complex = 1.0
    velocity: str = "zero"


@dataclass(frozen=True)
class NonrelSpec:
    mc2_start: float = 50.0
    doublings: int = 3
    t_final: float = 1.0
    samples: int = 50
    envelope: str = "lowest_mode"


@dataclass
class RunConfig:
    params: PhysicalParams
    grid: Grid
    bc: BoundaryParams
    potential: ScalarPotential
    potential_spec: dict
    evolution: EvolutionConfig
    initial: InitialSpec
    spectrum_k: int = 10
    snapshot_every: int = 1
    nonrel: NonrelSpec = field(default_factory=NonrelSpec)
    check_trials: int = 100
    seed: int = 0

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ValidationError("config", f"cannot read {path}: {exc.strerror}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError("config", f"invalid JSON: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: Any) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ValidationError("config", "top level must be a JSON object")
        unknown = sorted(set(raw) - set(SECTIONS))
        if unknown:
            raise ValidationError(unknown[0], f"unknown section; allowed: {', '.join(SECTIONS)}")

        p = _section(raw, "params", ("mass", "c", "hbar", "lambda", "V"))
        if p.get("V", 0) != 0:
            raise ValidationError("params.V", "the electric potential must be 0")
        mass = _number(p, "mass", "params", 1.0, positive=True)
        c = _number(p, "c", "params", 1.0, positive=True)
        hbar = _number(p, "hbar", "params", 1.0, positive=True)
        lam = _number(p, "lambda", "params", positive=True) if "lambda" in p else None
        params = PhysicalParams(mass, c, hbar, lam)

        g = _section(raw, "grid", ("a", "b", "n"))
        a = _number(g, "a", "grid", 0.0) if "a" in g else 0.0
        b = _number(g, "b", "grid", math.pi)
        n = _number(g, "n", "grid", 256, integer=True)
        if not b > a:
            raise ValidationError("grid.b", f"must exceed grid.a={a}")
        if n < 7:
            raise ValidationError("grid.n", f"must be >= 7 so both boundary stencils fit, got {n}")
        if n > 4096:
            raise ValidationError("grid.n", f"must be <= 4096, got {n}")
        grid = Grid(a, b, n)

        bc = _boundary(_section(raw, "boundary", ("preset", "mu", "m0", "m1", "m2", "m3", "lambda")), params)
        pot_spec = _section(raw, "potential", ("form", "s", "depth", "center", "width", "s0", "omega"))
        potential = _potential(pot_spec)

        e = _section(raw, "evolution", ("formulation", "kind", "dt", "steps", "record_every", "integrator", "snapshot_every"))
        formulation = e.get("formulation", "kfg")
        if formulation not in FORMULATIONS:
            raise ValidationError("evolution.formulation", f"must be one of {', '.join(FORMULATIONS)}, got {formulation!r}")
        kind = e.get("kind")
        if kind is not None:
            try:
                kind = MajoranaKind.parse(kind)
            except ValueError as exc:
                raise ValidationError("evolution.kind", str(exc)) from None
        elif formulation.startswith("majorana"):
            raise ValidationError("evolution.kind", "majorana formulations need 'standard' or 'nonstandard'")
        integrator = e.get("integrator", "default")
        if integrator not in INTEGRATORS:
            raise ValidationError("evolution.integrator", f"must be one of {', '.join(INTEGRATORS)}")
        dt = _number(e, "dt", "evolution", 0.5 * grid.h / c, positive=True)
        steps = _number(e, "steps", "evolution", 100, positive=True, integer=True)
        record_every = _number(e, "record_every", "evolution", 1, positive=True, integer=True)
        snapshot_every = _number(e, "snapshot_every", "evolution", 1, positive=True, integer=True)
        evo = EvolutionConfig(dt, steps, formulation, bc, potential, params, kind, record_every, integrator)
        try:
            evo.validate(grid)
        except ValidationError as exc:
            key = "boundary" if exc.key == "boundary" else f"evolution.{exc.key}"
            raise ValidationError(key, str(exc).split(": ", 1)[1]) from None

        initial = _initial(_section(raw, "initial", ("form", "center", "width", "k0", "amplitude", "coefficients",
                                                     "value", "velocity")), grid, potential)
        if evo.is_majorana and initial.velocity != "zero":
            raise ValidationError("initial.velocity", "majorana runs need real data; use 'zero'")

        s = _section(raw, "spectrum", ("k",))
        k = _number(s, "k", "spectrum", 10, positive=True, integer=True)
        if k > grid.n - 2:
            raise ValidationError("spectrum.k", f"must be <= n - 2 = {grid.n - 2}")

        nr = _section(raw, "nonrel", ("mc2_start", "doublings", "t_final", "samples", "envelope"))
        nonrel = NonrelSpec(
            _number(nr, "mc2_start", "nonrel", 50.0, positive=True),
            _number(nr, "doublings", "nonrel", 3, integer=True),
            _number(nr, "t_final", "nonrel", 1.0, positive=True),
            _number(nr, "samples", "nonrel", 50, positive=True, integer=True),
            nr.get("envelope", "lowest_mode"),
        )
        if nonrel.doublings < 0:
            raise ValidationError("nonrel.doublings", "must be >= 0")
        if nonrel.samples < 4:
            raise ValidationError("nonrel.samples", "must be >= 4")
        if nonrel.envelope not in ("lowest_mode", "initial"):
            raise ValidationError("nonrel.envelope", "must be 'lowest_mode' or 'initial'")

        ch = _section(raw, "check", ("trials",))
        trials = _number(ch, "trials", "check", 100, positive=True, integer=True)
        seed = raw.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ValidationError("seed", f"must be a non-negative integer, got {seed!r}")
        return cls(params, grid, bc, potential, dict(pot_spec), evo, initial, k, snapshot_every, nonrel, trials, seed)

    def initial_state(self) -> KFGState:
        return build_initial_state(self.initial, self.grid, self.params, self.bc, self.potential, self.evolution)


def _boundary(section: dict, params: PhysicalParams) -> BoundaryParams:
    lam = _number(section, "lambda", "boundary", params.lam, positive=True)
    if "preset" in section:
        extra = sorted(set(section) - {"preset", "lambda"})
        if extra:
            raise ValidationError(f"boundary.{extra[0]}", "cannot be combined with a preset")
        name = section["preset"]
        if not isinstance(name, str) or name.lower() not in PRESET_NAMES:
            raise ValidationError("boundary.preset", f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
        return preset(name, lam)
    if not section:
        return preset("dirichlet", lam)
    values = {k: _number(section, k, "boundary", 0.0) for k in ("mu", "m0", "m1", "m2", "m3")}
    if "mu" not in section:
        raise ValidationError("boundary.mu", "is required for a raw boundary condition")
    try:
        return BoundaryParams(values["mu"], values["m0"], values["m1"], values["m2"], values["m3"], lam)
    except BoundaryParamsError as exc:
        raise ValidationError(f"boundary.{exc.key}", str(exc).split(": ", 1)[1]) from None


def _potential(section: dict) -> ScalarPotential:
    form = section.get("form", "zero")
    if form not in POTENTIAL_FORMS:
        raise ValidationError("potential.form", f"must be one of {', '.join(POTENTIAL_FORMS)}, got {form!r}")
    extra = sorted(set(section) - {"form", *POTENTIAL_FORMS[form]})
    if extra:
        raise ValidationError(f"potential.{extra[0]}", f"not used by form {form!r}")
    args = [_number(section, key, "potential") for key in POTENTIAL_FORMS[form]]
    if form == "gaussian_well" and args[2] <= 0:
        raise ValidationError("potential.width", "must be positive")
    return getattr(ScalarPotential, form)(*args)


def _initial(section: dict, grid: Grid, potential: ScalarPotential) -> InitialSpec:
    form = section.get("form", "gaussian")
    if form not in INITIAL_FORMS:
        raise ValidationError("initial.form", f"must be one of {', '.join(INITIAL_FORMS)}, got {form!r}")
    velocity = section.get("velocity", "zero")
    if velocity not in VELOCITIES:
        raise ValidationError("initial.velocity", f"must be one of {', '.join(VELOCITIES)}")
    if form == "gaussian":
        center = _number(section, "center", "initial", 0.5 * (grid.a + grid.b))
        width = _number(section, "width", "initial", 0.1 * grid.length, positive=True)
        k0 = _number(section, "k0", "initial", 0.0) if "k0" in section else 0.0
        amp = _number(section, "amplitude", "initial", 1.0)
        return InitialSpec("gaussian", center, width, k0, amp, velocity=velocity)
    if form == "modes":
        coeffs = section.get("coefficients")
        if not isinstance(coeffs, list) or not coeffs or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in coeffs
        ):
            raise ValidationError("initial.coefficients", "must be a non-empty list of finite numbers")
        if len(coeffs) > grid.n - 2:
            raise ValidationError("initial.coefficients", f"at most {grid.n - 2} modes")
        if not potential.static:
            raise ValidationError("initial.form", "modes need a static potential")
        return InitialSpec("modes", coefficients=tuple(float(v) for v in coeffs), velocity=velocity)
    value = _number(section, "value", "initial", 1.0)
    return InitialSpec("constant", value=value, velocity=velocity)


def build_initial_state(spec: InitialSpec, grid: Grid, params: PhysicalParams, bc: BoundaryParams,
                        S: ScalarPotential, evo: EvolutionConfig) -> KFGState:
    """Initial KFG data, projected onto the constrained subspace."""
    ops = evo.operators(grid)
    x = grid.x
    if spec.form == "gaussian":
        psi = spec.amplitude * np.exp(-0.5 * ((x - spec.center) / spec.width) ** 2) * np.exp(1j * spec.k0 * x)
    elif spec.form == "modes":
        from .spectrum import stationary_modes

        modes = stationary_modes(grid, params, S, bc, len(spec.coefficients), ops=ops)
        psi = np.asarray(spec.coefficients) @ modes.modes
    else:
        psi = np.full(grid.n, spec.value, dtype=complex)
    psi = ops.space.project(np.asarray(psi, dtype=complex))
    if evo.is_majorana:
        psi = psi.real if evo.kind is MajoranaKind.STANDARD else 1j * psi.real
    psi_t = np.zeros(grid.n, dtype=complex)
    if spec.velocity == "positive_energy":
        psi_t = positive_energy_velocity(psi, ops)
    return KFGState(grid, psi, psi_t, 0.0)


def positive_energy_velocity(psi: np.ndarray, ops: ReducedOperators) -> np.ndarray:
    """``psi_t = -i sqrt(A) psi`` so that only positive frequencies are present."""
    import scipy.linalg as la

    A = ops.kfg_operator(0.0).toarray()
    w2, vecs = la.eigh(0.5 * (A + A.conj().T))
    if w2[0] <= 0:
        raise ValidationError("initial.velocity", "positive_energy needs E^2 > 0 for every mode")
    y = ops.space.to_reduced(psi)
    y_t = -1j * (vecs @ (np.sqrt(w2) * (vecs.conj().T @ y)))
    return ops.space.from_reduced(y_t)
