"""Discrete Feshbach-Villars Hamiltonian, pseudo inner product and observables.

Spatial discretization
----------------------
The formal second derivative is the summation-by-parts operator

    D2 = W^{-1} (-A + e_b S_b - e_a S_a)

with ``W`` the trapezoidal weights, ``A`` the P1 stiffness matrix and
``S_a``, ``S_b`` the second-order one-sided (3-point) boundary derivatives.
Interior rows are the usual ``(1, -2, 1) / h^2`` stencil, and for any node
vectors ``u``, ``v``

    <u, D2 v>_W - <D2 u, v>_W = [u^* S v - (S u)^* v]_a^b

holds exactly: the discrete twin of the boundary term the pseudo self-adjoint
family cancels.  The boundary condition is imposed by restricting every
component to the null space ``V`` of two linear constraints on
``[u(b), u(a), S_b u, S_a u]``.  On ``V`` the boundary form vanishes
identically, so the compression of the formal operator onto ``V`` is exactly
self-adjoint in the trapezoidal inner product.  ``V`` is parametrized by a
``W``-orthonormal basis ``Q`` so that the compressed (reduced) matrices are
plain Hermitian matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .boundary import BoundaryParams, constraint_rows, real_rank
from .core import FVState, Grid, KFGState, PhysicalParams

# tau_3 + i tau_2 and tau_3 on the [phi; chi] layout
TAU3_PLUS_ITAU2 = np.array([[1.0, 1.0], [-1.0, -1.0]])
TAU3 = np.diag([1.0, -1.0])


# ---------------------------------------------------------------------------
# Scalar potential
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarPotential:
    """Real Lorentz scalar potential ``S(x, t)`` in energy units."""

    func: Callable[[np.ndarray, float], np.ndarray]
    static: bool = True
    label: str = "custom"

    def __call__(self, x: np.ndarray, t: float = 0.0) -> np.ndarray:
        values = np.broadcast_to(np.asarray(self.func(x, t), dtype=float), np.shape(x)).copy()
        if not np.all(np.isfinite(values)):
            raise ValueError(f"potential {self.label} produced non-finite values at t={t}")
        return values

    @classmethod
    def zero(cls) -> "ScalarPotential":
        return cls(lambda x, t: np.zeros_like(x), True, "zero")

    @classmethod
    def constant(cls, s: float) -> "ScalarPotential":
        return cls(lambda x, t: np.full_like(x, s, dtype=float), True, f"constant({s})")

    @classmethod
    def gaussian_well(cls, depth: float, center: float, width: float) -> "ScalarPotential":
        if width <= 0:
            raise ValueError("gaussian_well width must be positive")
        return cls(
            lambda x, t: -depth * np.exp(-0.5 * ((x - center) / width) ** 2),
            True,
            f"gaussian_well({depth}, {center}, {width})",
        )

    @classmethod
    def sinusoidal_t(cls, s0: float, omega: float) -> "ScalarPotential":
        return cls(lambda x, t: np.full_like(x, s0 * math.sin(omega * t), dtype=float), False, f"sinusoidal_t({s0}, {omega})")

    @property
    def is_zero(self) -> bool:
        return self.label == "zero"


# ---------------------------------------------------------------------------
# Stencils and constrained subspace
# ---------------------------------------------------------------------------


def boundary_derivative_rows(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """One-sided 3-point derivative rows ``(S_b, S_a)``."""
    n, h = grid.n, grid.h
    s_b = np.zeros(n)
    s_a = np.zeros(n)
    s_b[[n - 3, n - 2, n - 1]] += np.array([1.0, -4.0, 3.0]) / (2 * h)
    s_a[[0, 1, 2]] += np.array([-3.0, 4.0, -1.0]) / (2 * h)
    return s_b, s_a


def second_derivative(grid: Grid) -> sp.csr_matrix:
    """Summation-by-parts second derivative (one-sided rows at both ends)."""
    n, h = grid.n, grid.h
    main = np.full(n, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    off = np.full(n - 1, -1.0 / h)
    stiffness = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    s_b, s_a = boundary_derivative_rows(grid)
    boundary = sp.lil_matrix((n, n))
    boundary[n - 1, :] = s_b
    boundary[0, :] = -s_a
    return (sp.diags(1.0 / grid.weights) @ (-stiffness.tocsr() + boundary.tocsr())).tocsr()


class ConstrainedSpace:
    """Node vectors obeying the discrete boundary condition, with a W-orthonormal basis.

    ``Q`` has ``n - 2`` columns: unit vectors on the nodes untouched by the
    constraints and an orthonormal null-space block on the six nodes next to
    the ends.  For Majorana-admissible conditions the constraints span a
    conjugation-invariant space and a real basis is used.
    """

    def __init__(self, grid: Grid, bc: BoundaryParams):
        self.grid = grid
        self.bc = bc
        n = grid.n
        c = constraint_rows(bc).rows
        s_b, s_a = boundary_derivative_rows(grid)
        e_b = np.zeros(n)
        e_b[-1] = 1.0
        e_a = np.zeros(n)
        e_a[0] = 1.0
        g = c @ np.vstack([e_b, e_a, s_b, s_a])
        self.real = real_rank(g) == 2
        if self.real:
            _, _, vt = np.linalg.svd(np.vstack([g.real, g.imag]), full_matrices=False)
            g = vt[:2]
        self.G = g

        w = grid.weights
        self.weights = w
        edge = sorted({0, 1, 2, n - 3, n - 2, n - 1})
        free = [i for i in range(n) if i not in set(edge)]
        sqrt_w = np.sqrt(w)
        block = la.null_space(g[:, edge] / sqrt_w[edge])
        if block.shape[1] != len(edge) - 2:
            raise ValueError("boundary constraints must have rank 2")
        dtype = float if self.real else complex
        q = np.zeros((n, n - 2), dtype=dtype)
        q[free, np.arange(len(free))] = 1.0 / sqrt_w[free]
        q[np.ix_(edge, np.arange(len(free), n - 2))] = block / sqrt_w[edge][:, None]
        self.Q = sp.csr_matrix(q)
        self.QhW = sp.csr_matrix(q.conj().T * w[None, :])
        self.dim = n - 2

    @property
    def dtype(self):
        return float if self.real else complex

    def to_reduced(self, u: np.ndarray) -> np.ndarray:
        """Coordinates of the W-orthogonal projection of ``u`` onto V."""
        return self.QhW @ u

    def from_reduced(self, y: np.ndarray) -> np.ndarray:
        return self.Q @ y

    def project(self, u: np.ndarray) -> np.ndarray:
        return self.Q @ (self.QhW @ u)

    def residual(self, u: np.ndarray) -> np.ndarray:
        return self.G @ u

    def compress(self, op: sp.spmatrix) -> sp.csr_matrix:
        """``Q^H W op Q``: the operator restricted to V in reduced coordinates."""
        return (self.QhW @ op @ self.Q).tocsr()


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------


def kinetic_operator(grid: Grid, params: PhysicalParams) -> sp.csr_matrix:
    """``p^2 / 2m = -(hbar^2 / 2m) d^2/dx^2`` on node values."""
    return (-(params.hbar**2) / (2 * params.mass) * second_derivative(grid)).tocsr()


def _fv_from_scalar(scalar_op: sp.spmatrix, mc2: float) -> sp.csr_matrix:
    dim = scalar_op.shape[0]
    return (sp.kron(TAU3_PLUS_ITAU2, scalar_op) + mc2 * sp.kron(TAU3, sp.identity(dim))).tocsr()


@dataclass
class DiscreteHamiltonian:
    """FV Hamiltonian on the stacked ``[phi; chi]`` node layout.

    ``matrix`` is the formal operator (no boundary condition built in);
    ``reduced`` is its compression onto the constrained subspace in
    W-orthonormal coordinates, the matrix actually used for dynamics and
    spectra.  ``weights`` are the quadrature weights of ``matrix``'s inner
    product (identity for ``reduced``).
    """

    matrix: sp.csr_matrix
    reduced: sp.csr_matrix
    grid: Grid | None = None
    params: PhysicalParams | None = None
    bc: BoundaryParams | None = None
    t: float = 0.0
    space: ConstrainedSpace | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)

    def apply(self, state: FVState) -> FVState:
        return FVState.from_stacked(state.grid, self.matrix @ state.stacked, state.t)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def reduced_dense(self) -> np.ndarray:
        return self.reduced.toarray()


def build_hamiltonian(
    grid: Grid,
    params: PhysicalParams,
    S: ScalarPotential | None,
    t: float,
    bc: BoundaryParams,
    space: ConstrainedSpace | None = None,
) -> DiscreteHamiltonian:
    if grid.n < 3:
        raise ValueError("grid needs at least 3 nodes")
    S = ScalarPotential.zero() if S is None else S
    space = ConstrainedSpace(grid, bc) if space is None else space
    kin = kinetic_operator(grid, params)
    pot = sp.diags(S(grid.x, t))
    formal = _fv_from_scalar(kin + pot, params.mc2)
    reduced = _fv_from_scalar(space.compress(kin + pot), params.mc2)
    return DiscreteHamiltonian(formal, reduced, grid, params, bc, t, space, np.tile(grid.weights, 2))



def generalized_adjoint(H, weights: np.ndarray | None = None):
    """``tau_3 H^dagger tau_3`` taken in the (weighted) pseudo inner product.

    For a plain matrix with ``weights=None`` this is ``T3 H^H T3``.  For a
    :class:`DiscreteHamiltonian` the formal matrix uses the trapezoidal weights
    and the reduced matrix, living in W-orthonormal coordinates, uses none.
    """
    if isinstance(H, DiscreteHamiltonian):
        return replace(
            H,
            matrix=sp.csr_matrix(generalized_adjoint(H.matrix, H.weights)),
            reduced=sp.csr_matrix(generalized_adjoint(H.reduced)),
        )
    dense = not sp.issparse(H)
    H = np.asarray(H) if dense else H
    dim = H.shape[0] // 2
    t3 = np.concatenate([np.ones(dim), -np.ones(dim)])
    left = t3 if weights is None else t3 / weights
    right = t3 if weights is None else t3 * weights
    if dense:
        return left[:, None] * H.conj().T * right[None, :]
    return sp.csr_matrix(sp.diags(left) @ H.conj().T @ sp.diags(right))


def pseudo_inner_product(P: FVState, Q: FVState, grid: Grid | None = None) -> complex:
    """Trapezoidal ``int Psi^dagger tau_3 Phi dx``."""
    grid = P.grid if grid is None else grid
    if P.grid != Q.grid:
        raise ValueError("states live on different grids")
    integrand = np.conj(P.phi) * Q.phi - np.conj(P.chi) * Q.chi
    return complex(grid.integrate(integrand))


def _stacked_pseudo(w2: np.ndarray, u: np.ndarray, v: np.ndarray) -> complex:
    dim = u.size // 2
    sign = np.concatenate([np.ones(dim), -np.ones(dim)])
    return complex(np.sum(w2 * sign * np.conj(u) * v))


def operator_norm_bound(H: sp.spmatrix, weights: np.ndarray) -> float:
    """``sqrt(||B||_1 ||B||_inf)`` for the W-similar ``B``; bounds the W-operator 2-norm."""
    sw = np.sqrt(weights)
    B = sp.diags(sw) @ H @ sp.diags(1.0 / sw)
    absb = abs(B)
    return float(math.sqrt(absb.sum(axis=0).max() * absb.sum(axis=1).max()))


def pseudo_hermiticity_defect(
    H: DiscreteHamiltonian,
    bc: BoundaryParams | None = None,
    grid: Grid | None = None,
    trials: int = 100,
    project: bool = True,
    seed: int = 0,
) -> float:
    """Max ``|<<H Psi, Phi>> - <<Psi, H Phi>>| / (|Psi| |Phi| |H|)`` over random pairs.

    With ``project=True`` the random states are first projected onto the
    subspace allowed by ``bc``; without it the boundary term survives.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    grid = H.grid if grid is None else grid
    bc = H.bc if bc is None else bc
    space = H.space if (H.space is not None and H.space.bc == bc and H.space.grid == grid) else ConstrainedSpace(grid, bc)
    w2 = np.tile(grid.weights, 2)
    rng = np.random.default_rng(seed)
    h_norm = operator_norm_bound(H.matrix, w2)
    n = grid.n
    worst = 0.0
    for _ in range(trials):
        pair = []
        for _ in range(2):
            v = rng.standard_normal(2 * n) + 1j * rng.standard_normal(2 * n)
            if project:
                v = np.concatenate([space.project(v[:n]), space.project(v[n:])])
            pair.append(v)
        u, v = pair
        lhs = _stacked_pseudo(w2, H.matrix @ u, v)
        rhs = _stacked_pseudo(w2, u, H.matrix @ v)
        nu = math.sqrt(np.sum(w2 * np.abs(u) ** 2))
        nv = math.sqrt(np.sum(w2 * np.abs(v) ** 2))
        worst = max(worst, abs(lhs - rhs) / (nu * nv * h_norm))
    return worst


def boundary_term(psi: np.ndarray, phi: np.ndarray, grid: Grid, params: PhysicalParams) -> complex:
    """``-(hbar^2/2m) [psi_x^* phi - psi^* phi_x]_a^b`` with one-sided derivatives."""
    s_b, s_a = boundary_derivative_rows(grid)

    def g(row, idx):
        return np.conj(row @ psi) * phi[idx] - np.conj(psi[idx]) * (row @ phi)

    return -(params.hbar**2) / (2 * params.mass) * (g(s_b, -1) - g(s_a, 0))


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Observables:
    rho: np.ndarray
    j: np.ndarray
    pseudo_norm: complex
    time: float


def current_density(psi: np.ndarray, grid: Grid, params: PhysicalParams) -> np.ndarray:
    """``j = (hbar/m) Im(psi^* psi_x)``; central differences, one-sided at the ends."""
    psi = np.asarray(psi, dtype=complex)
    psi_x = np.gradient(psi, grid.h, edge_order=2)
    # + 0.0 turns -0.0 into 0.0
    return (params.hbar / params.mass) * np.imag(np.conj(psi) * psi_x) + 0.0


def charge_density(state: KFGState, params: PhysicalParams) -> np.ndarray:
    """``rho = [psi^* (E psi) - (E psi^*) psi] / 2mc^2 = -(hbar/mc^2) Im(psi^* psi_t)``."""
    return -(params.hbar / params.mc2) * np.imag(np.conj(state.psi) * state.psi_t) + 0.0


def uniform_step(times: Sequence[float], rtol: float = 1e-9) -> float:
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise ValueError("need at least 3 time samples")
    steps = np.diff(times)
    dt = float(steps.mean())
    if dt <= 0 or np.max(np.abs(steps - dt)) > rtol * max(abs(dt), 1.0):
        raise ValueError("time samples must be uniformly spaced and increasing")
    return dt


def continuity_residual(traj: Sequence[KFGState], grid: Grid, params: PhysicalParams) -> np.ndarray:
    """``d rho/dt + d j/dx`` by central differences at interior nodes and times.

    Nodes 1 and n-2 are skipped: their ``d j/dx`` stencil would reach the
    one-sided end values of ``j``.  Returns shape ``(len(traj) - 2, n - 4)``.
    """
    dt = uniform_step([s.t for s in traj])
    rho = np.array([charge_density(s, params) for s in traj])
    j = np.array([current_density(s.psi, grid, params) for s in traj])
    d_rho = (rho[2:, 2:-2] - rho[:-2, 2:-2]) / (2 * dt)
    d_j = (j[1:-1, 3:-1] - j[1:-1, 1:-3]) / (2 * grid.h)
    return d_rho + d_j
