"""Stationary KFG modes and spectral diagnostics of the FV Hamiltonian."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .boundary import BoundaryParams
from .core import Grid, PhysicalParams
from .evolution import NumericalError, ReducedOperators
from .operators import DiscreteHamiltonian, ScalarPotential

CLOSED_FORM_PRESETS = ("dirichlet", "neumann", "periodic", "antiperiodic")


@dataclass(frozen=True)
class ModeSet:
    """Lowest ``E^2`` values (ascending) and node-valued modes, one per row."""

    E_squared: np.ndarray
    modes: np.ndarray
    grid: Grid
    bc: BoundaryParams
    potential: str

    @property
    def negative(self) -> np.ndarray:
        """Mask of ``E^2 < 0`` (no positive-energy reading)."""
        return self.E_squared < 0

    def __len__(self) -> int:
        return len(self.E_squared)


def _align_phase(mode: np.ndarray) -> np.ndarray:
    """Rotate so the largest entry is real and positive."""
    k = int(np.argmax(np.abs(mode)))
    if mode[k] == 0:
        return mode
    return mode * (abs(mode[k]) / mode[k])


def stationary_modes(
    grid: Grid,
    params: PhysicalParams,
    S: ScalarPotential | None,
    bc: BoundaryParams,
    k: int,
    ops: ReducedOperators | None = None,
) -> ModeSet:
    """Solve ``[-hbar^2 c^2 d_xx + (mc^2)^2 + 2 mc^2 S] f = E^2 f`` for the ``k`` lowest ``E^2``.

    The constrained problem is Hermitian in reduced coordinates for every
    member of the family, so a dense Hermitian eigensolver is used throughout.
    """
    S = ScalarPotential.zero() if S is None else S
    if not S.static:
        raise ValueError("stationary modes need a static potential")
    ops = ReducedOperators(grid, params, bc, S) if ops is None else ops
    dim = ops.space.dim
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if k > dim:
        raise ValueError(f"k={k} exceeds the {dim} available modes")
    A = (params.hbar**2 * ops.kfg_operator(0.0)).toarray()
    A = 0.5 * (A + A.conj().T)
    try:
        w2, vecs = la.eigh(A, subset_by_index=[0, int(k) - 1])
    except la.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    modes = np.array([_align_phase(ops.space.from_reduced(v)) for v in vecs.T])
    if np.any(w2 < 0):
        warnings.warn(f"{int(np.sum(w2 < 0))} mode(s) with E^2 < 0", RuntimeWarning, stacklevel=2)
    return ModeSet(w2, modes, grid, bc, S.label)


def fv_energies(H: DiscreteHamiltonian, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The ``k`` smallest positive and ``k`` largest negative FV eigenvalues.

    Uses shift-invert around zero on the reduced matrix; both branches are
    returned sorted by absolute value.
    """
    M = H.reduced
    size = M.shape[0]
    if 2 * k >= size - 1:
        vals = la.eigvals(M.toarray())
    else:
        try:
            vals = spla.eigs(M.tocsc(), k=2 * k, sigma=0.0, return_eigenvectors=False)
        except (spla.ArpackNoConvergence, RuntimeError) as exc:
            raise NumericalError(f"FV eigensolver failed: {exc}") from exc
    vals = vals[np.argsort(np.abs(vals))]
    plus = np.sort(vals[vals.real > 0].real)[:k]
    minus = -np.sort(-vals[vals.real < 0].real)[:k]
    return plus, minus


def analytic_reference_spectrum(preset_name: str, L: float, params: PhysicalParams, n_max: int) -> list[float]:
    """First ``n_max`` closed-form ``E^2`` values for the free particle, with multiplicity."""
    if L <= 0:
        raise ValueError("L must be positive")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    name = preset_name.lower()
    if name == "dirichlet":
        kappas = [n * math.pi / L for n in range(1, n_max + 1)]
    elif name == "neumann":
        kappas = [n * math.pi / L for n in range(n_max)]
    elif name == "periodic":
        kappas = [0.0]
        n = 1
        while len(kappas) < n_max:
            kappas += [2 * math.pi * n / L] * 2
            n += 1
    elif name == "antiperiodic":
        kappas = []
        n = 0
        while len(kappas) < n_max:
            kappas += [(2 * n + 1) * math.pi / L] * 2
            n += 1
    else:
        raise ValueError(f"no closed form for preset {preset_name!r}; use one of {', '.join(CLOSED_FORM_PRESETS)}")
    mc2, hc = params.mc2, params.hbar * params.c
    return [mc2**2 + (hc * kap) ** 2 for kap in kappas[:n_max]]


@dataclass(frozen=True)
class SymmetryReport:
    eigenvalues: np.ndarray
    pairing_defect: float
    nonreal_count: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.pairing_defect <= self.tol


def fv_spectrum_symmetry_check(H: DiscreteHamiltonian, tol: float = 1e-8) -> SymmetryReport:
    """Check that the FV spectrum is closed under ``E -> -E^*``.

    The pairing defect is ``max_i min_j |E_j + E_i^*|`` divided by ``max |E|``.
    Eigenvalues with ``|Im E| > tol * max|E|`` are counted as non-real.
    """
    try:
        vals = la.eigvals(H.reduced.toarray())
    except la.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    scale = float(np.max(np.abs(vals))) or 1.0
    mirrored = -np.conj(vals)
    order = np.argsort(vals.real)
    sorted_vals = vals[order]
    # nearest-neighbour search on the real axis, widened to a small window
    idx = np.searchsorted(sorted_vals.real, mirrored.real)
    worst = 0.0
    for i, target in enumerate(mirrored):
        lo, hi = max(idx[i] - 3, 0), min(idx[i] + 3, len(vals))
        gap = float(np.min(np.abs(sorted_vals[lo:hi] - target)))
        if gap > tol * scale:
            gap = float(np.min(np.abs(vals - target)))
        worst = max(worst, gap)
    nonreal = int(np.sum(np.abs(vals.imag) > tol * scale))
    return SymmetryReport(np.sort_complex(vals), worst / scale, nonreal, tol)
