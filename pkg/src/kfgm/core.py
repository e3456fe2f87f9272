"""Physical parameters, grids, field states and the charge-conjugation toolkit.

Field values are plain ``numpy`` complex arrays aligned with the nodes of a
:class:`Grid`.  The two-component Feshbach-Villars state is ``Psi = [phi, chi]``;
the one-component Klein-Fock-Gordon data is ``(psi, d psi / dt)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

ComplexField = np.ndarray


class ValidationError(ValueError):
    """Invalid input; ``key`` names the offending parameter."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class PhysicalParams:
    """Mass, light speed, Planck constant and the boundary length scale.

    ``lam`` defaults to the Compton wavelength ``hbar / (m c)``.  The electric
    potential is stored only to document that it vanishes: a Majorana state
    forces it to be imaginary and pseudo-hermiticity forces it to be real.
    """

    mass: float = 1.0
    c: float = 1.0
    hbar: float = 1.0
    lam: float | None = None
    V: float = 0.0

    def __post_init__(self):
        for name in ("mass", "c", "hbar"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if self.V != 0:
            raise ValueError("the electric potential V must be 0 for a KFGM particle")
        if self.lam is None:
            object.__setattr__(self, "lam", self.hbar / (self.mass * self.c))
        elif not (math.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lam must be positive, got {self.lam!r}")

    @property
    def mc2(self) -> float:
        return self.mass * self.c**2

    @property
    def compton(self) -> float:
        return self.hbar / (self.mass * self.c)


@dataclass(frozen=True)
class Grid:
    """Uniform nodes ``x_i = a + i h`` on ``[a, b]``, ends included."""

    a: float
    b: float
    n: int

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"need b > a, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"need an integer n >= 3 nodes, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n - 1)

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def x(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.n)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def integrate(self, values: np.ndarray) -> complex | float:
        return np.dot(self.weights, values)

    def norm(self, *fields: np.ndarray) -> float:
        """Trapezoidal L2 norm of one or several stacked fields."""
        total = sum(self.integrate(np.abs(f) ** 2) for f in fields)
        return float(np.sqrt(total))


def _as_field(values, grid: Grid, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=complex)
    if arr.ndim == 0:
        arr = np.full(grid.n, arr, dtype=complex)
    if arr.shape != (grid.n,):
        raise ValueError(f"{name} has shape {arr.shape}, expected ({grid.n},)")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class FVState:
    """Two-component state ``Psi = [phi, chi]`` at time ``t``."""

    grid: Grid
    phi: np.ndarray
    chi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "phi", _as_field(self.phi, self.grid, "phi"))
        object.__setattr__(self, "chi", _as_field(self.chi, self.grid, "chi"))

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.phi, self.chi])

    @classmethod
    def from_stacked(cls, grid: Grid, values: np.ndarray, t: float = 0.0) -> "FVState":
        return cls(grid, values[: grid.n], values[grid.n :], t)

    def norm(self) -> float:
        return self.grid.norm(self.phi, self.chi)


@dataclass(frozen=True)
class KFGState:
    """Klein-Fock-Gordon field ``psi`` and its time derivative at time ``t``."""

    grid: Grid
    psi: np.ndarray
    psi_t: np.ndarray = field(default=None)
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "psi", _as_field(self.psi, self.grid, "psi"))
        psi_t = np.zeros(self.grid.n) if self.psi_t is None else self.psi_t
        object.__setattr__(self, "psi_t", _as_field(psi_t, self.grid, "psi_t"))


class MajoranaKind(enum.Enum):
    """``STANDARD``: Psi = Psi_c (C-parity +1); ``NONSTANDARD``: Psi = -Psi_c."""

    STANDARD = "standard"
    NONSTANDARD = "nonstandard"

    @property
    def c_parity(self) -> int:
        return 1 if self is MajoranaKind.STANDARD else -1

    @classmethod
    def parse(cls, value) -> "MajoranaKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown Majorana kind {value!r}; use 'standard' or 'nonstandard'") from None


def kfg_to_fv(state: KFGState, params: PhysicalParams) -> FVState:
    """Split ``psi`` into ``phi = (psi + i hbar psi_t / mc^2) / 2`` and ``chi``."""
    energy_term = 1j * params.hbar * state.psi_t / params.mc2
    phi = 0.5 * (state.psi + energy_term)
    chi = 0.5 * (state.psi - energy_term)
    return FVState(state.grid, phi, chi, state.t)


def fv_to_kfg(state: FVState, params: PhysicalParams) -> KFGState:
    psi = state.phi + state.chi
    psi_t = (params.mc2 / (1j * params.hbar)) * (state.phi - state.chi)
    return KFGState(state.grid, psi, psi_t, state.t)


def charge_conjugate(state: FVState) -> FVState:
    """``Psi_c = tau_1 Psi^*``, i.e. ``(phi, chi) -> (chi^*, phi^*)``."""
    return FVState(state.grid, np.conj(state.chi), np.conj(state.phi), state.t)


def majorana_defect(state: FVState, kind: MajoranaKind | str, grid: Grid | None = None) -> float:
    """L2 norm of ``Psi - Psi_c`` (standard) or ``Psi + Psi_c`` (nonstandard)."""
    kind = MajoranaKind.parse(kind)
    grid = state.grid if grid is None else grid
    sign = -kind.c_parity
    d_phi = state.phi + sign * np.conj(state.chi)
    d_chi = state.chi + sign * np.conj(state.phi)
    return grid.norm(d_phi, d_chi)


def c_parity(state: FVState, tol: float = 1e-10) -> int | None:
    """+1 or -1 when ``Psi`` is a charge-conjugation eigenstate, else ``None``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    scale = tol * state.norm()
    standard = majorana_defect(state, MajoranaKind.STANDARD) <= scale
    nonstandard = majorana_defect(state, MajoranaKind.NONSTANDARD) <= scale
    if standard and not nonstandard:
        return 1
    if nonstandard and not standard:
        return -1
    return None


def impose_majorana(state: FVState, kind: MajoranaKind | str) -> FVState:
    """Project onto the Majorana subspace: ``(Psi + Psi_c)/2`` or ``(Psi - Psi_c)/2``."""
    kind = MajoranaKind.parse(kind)
    conj = charge_conjugate(state)
    s = kind.c_parity
    return FVState(state.grid, 0.5 * (state.phi + s * conj.phi), 0.5 * (state.chi + s * conj.chi), state.t)
