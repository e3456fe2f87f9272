"""Three-parameter family of pseudo self-adjoint boundary conditions.

A condition is fixed by a 2x2 unitary matrix

    U = exp(i mu) [[m0 - i m3, -m2 - i m1],
                   [m2 - i m1,  m0 + i m3]],   m0^2 + m1^2 + m2^2 + m3^2 = 1,

through

    [psi(b) - i lam psi'(b), psi(a) + i lam psi'(a)]^T
        = U [psi(b) + i lam psi'(b), psi(a) - i lam psi'(a)]^T.

Real (Majorana) solutions survive only when ``U`` is complex symmetric, which
for this parametrization means ``m2 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ValidationError

# Re-normalize onto the unit 3-sphere within this distance, reject beyond it.
NORM_SNAP_TOL = 1e-6
RANK_RTOL = 1e-10

PRESET_NAMES = (
    "dirichlet",
    "neumann",
    "robin",
    "periodic",
    "antiperiodic",
    "case_vi_plus",
    "case_vi_minus",
    "case_vii_plus",
    "case_vii_minus",
)


class BoundaryParamsError(ValidationError):
    pass


@dataclass(frozen=True)
class BoundaryParams:
    mu: float
    m0: float = 0.0
    m1: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    lam: float = 1.0
    name: str | None = None

    def __post_init__(self):
        m = np.array([self.m0, self.m1, self.m2, self.m3], dtype=float)
        if not np.all(np.isfinite(m)):
            raise BoundaryParamsError("m", "components must be finite")
        norm = float(np.sqrt(np.sum(m**2)))
        if abs(norm - 1.0) > NORM_SNAP_TOL:
            raise BoundaryParamsError("m", f"m0^2+m1^2+m2^2+m3^2 must be 1, got norm {norm:.6g}")
        m = m / norm
        for key, value in zip(("m0", "m1", "m2", "m3"), m):
            object.__setattr__(self, key, float(value))
        # mu = pi is kept because the Dirichlet preset is written that way.
        if not (0.0 <= self.mu <= math.pi):
            raise BoundaryParamsError("mu", f"must lie in [0, pi], got {self.mu!r}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise BoundaryParamsError("lambda", f"must be positive, got {self.lam!r}")

    @property
    def m(self) -> np.ndarray:
        return np.array([self.m0, self.m1, self.m2, self.m3])

    def with_lambda(self, lam: float) -> "BoundaryParams":
        return BoundaryParams(self.mu, self.m0, self.m1, self.m2, self.m3, lam, self.name)

    def describe(self) -> str:
        label = self.name or "custom"
        return (
            f"{label}: mu={self.mu:.6g} m0={self.m0:.6g} m1={self.m1:.6g} "
            f"m2={self.m2:.6g} m3={self.m3:.6g} lambda={self.lam:.6g}"
        )


@dataclass(frozen=True)
class BoundaryConstraints:
    """Rows ``C`` with ``C @ [psi(b), psi(a), psi'(b), psi'(a)] = 0``."""

    rows: np.ndarray

    def residual(self, boundary_data: np.ndarray) -> np.ndarray:
        return self.rows @ np.asarray(boundary_data)


_PRESETS = {
    "dirichlet": dict(mu=math.pi, m0=1.0),
    "neumann": dict(mu=0.0, m0=1.0),
    "robin": dict(mu=math.pi / 2, m0=1.0),
    "periodic": dict(mu=math.pi / 2, m1=1.0),
    "antiperiodic": dict(mu=math.pi / 2, m1=-1.0),
    "case_vi_plus": dict(mu=math.pi / 2, m2=1.0),
    "case_vi_minus": dict(mu=math.pi / 2, m2=-1.0),
    "case_vii_plus": dict(mu=0.0, m2=1.0),
    "case_vii_minus": dict(mu=0.0, m2=-1.0),
}


def preset(name: str, lam: float = 1.0) -> BoundaryParams:
    key = name.lower()
    if key not in _PRESETS:
        raise KeyError(f"unknown boundary preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    return BoundaryParams(lam=lam, name=key, **_PRESETS[key])


def unitary_2x2(p: BoundaryParams) -> np.ndarray:
    m0, m1, m2, m3 = p.m
    core = np.array([[m0 - 1j * m3, -m2 - 1j * m1], [m2 - 1j * m1, m0 + 1j * m3]])
    return np.exp(1j * p.mu) * core


# Fixed permutation/sign matrix relating the one- and two-component families.
_S4 = np.array(
    [
        [1, 0, 0, 0],
        [0, 0, 1, 0],
        [0, -1, 0, 0],
        [0, 0, 0, -1],
    ],
    dtype=float,
)


def unitary_4x4(p: BoundaryParams) -> np.ndarray:
    u2 = unitary_2x2(p)
    block = np.zeros((4, 4), dtype=complex)
    block[:2, :2] = u2
    block[2:, 2:] = u2
    return _S4.T @ block @ _S4


def is_majorana_admissible(p: BoundaryParams, tol: float = 1e-12) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return abs(p.m2) <= tol


def constraint_rows(p: BoundaryParams) -> BoundaryConstraints:
    """Linear form of the boundary condition on ``[psi(b), psi(a), psi'(b), psi'(a)]``.

    ``(1 - U) [psi(b), psi(a)] = i lam (1 + U) [psi'(b), -psi'(a)]``; the sign
    matrix turns ``psi'(a)`` into the outward derivative at ``a``.
    """
    u = unitary_2x2(p)
    eye = np.eye(2)
    outward = np.diag([1.0, -1.0])
    rows = np.hstack([eye - u, -1j * p.lam * (eye + u) @ outward])
    return BoundaryConstraints(rows)


def real_rank(rows: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Rank of the real system obtained by stacking real and imaginary parts."""
    stacked = np.vstack([rows.real, rows.imag])
    sv = np.linalg.svd(stacked, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def real_constraint_rank(p: BoundaryParams) -> int:
    """2 when a two-real-parameter family of real boundary data survives, 4 when
    the condition forces real solutions to vanish at the ends."""
    return real_rank(constraint_rows(p).rows)
