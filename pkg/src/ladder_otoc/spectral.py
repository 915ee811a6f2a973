"""Dense and iterative eigensolvers for the chain and the ladder."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .hilbert import PureState, SectorBasis, SparseOperator, enumerate_sector, sigma_z_total
from .model import ChainSpec, LadderSpec, build_parent_hamiltonian

MAX_DENSE_DIM = 4096
DENSE_FALLBACK_DIM = 400
RESIDUAL_TOL = 1e-9
PHASE_FIX_TOL = 1e-8


class DimensionTooLargeError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (best residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Complete eigensystem; column ``k`` of ``vectors`` belongs to ``energies[k]``."""

    basis: SectorBasis
    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.energies)

    def state(self, k: int) -> PureState:
        return PureState(self.basis, self.vectors[:, k])

    @property
    def states(self) -> list[PureState]:
        return [self.state(k) for k in range(len(self))]

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])

    def ground_degeneracy(self, tol: float = 1e-10) -> int:
        return int(np.sum(self.energies - self.energies[0] < tol))

    def residuals(self, h: SparseOperator) -> np.ndarray:
        hv = h.matrix @ self.vectors
        return np.linalg.norm(hv - self.vectors * self.energies, axis=0)


@dataclass(frozen=True, eq=False)
class GroundResult:
    energy: float
    state: PureState
    gap: float
    energies: np.ndarray = field(repr=False)


def fix_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate so the first amplitude above 1e-8 in magnitude is real positive."""
    big = np.flatnonzero(np.abs(vec) > PHASE_FIX_TOL)
    if len(big) == 0:
        return vec
    a = vec[big[0]]
    return vec * (abs(a) / a)


def full_spectrum(h: SparseOperator) -> Spectrum:
    if h.dim > MAX_DENSE_DIM:
        raise DimensionTooLargeError(
            f"dimension {h.dim} exceeds {MAX_DENSE_DIM}; use ground_state() instead"
        )
    dense = h.dense()
    if np.max(np.abs(dense.imag), initial=0.0) == 0.0:
        dense = dense.real
    energies, vectors = np.linalg.eigh(dense)
    vectors = vectors.astype(complex)
    spec = Spectrum(h.basis, energies, vectors)
    worst = float(np.max(spec.residuals(h), initial=0.0))
    if worst > RESIDUAL_TOL * max(1.0, np.max(np.abs(energies), initial=1.0)):
        raise ConvergenceError("dense eigensolver residual too large", worst)
    return spec


def ground_state(h: SparseOperator, k: int = 2, tol: float = RESIDUAL_TOL) -> GroundResult:
    """Lowest ``k`` eigenpairs via implicitly restarted Lanczos (ARPACK).

    Small problems go through dense diagonalization. The gap is
    ``E_1 - E_0`` within ``h``'s basis.
    """
    if k < 2:
        raise ValueError("k >= 2 is needed to resolve the gap")
    dim = h.dim
    if dim == 1:
        e = float(h.dense()[0, 0].real)
        return GroundResult(e, PureState(h.basis, np.ones(1)), math.inf, np.array([e]))
    mat = h.matrix
    if mat.nnz == 0 or abs(mat.imag).max() == 0:
        mat = mat.real
    if dim <= DENSE_FALLBACK_DIM:
        energies, vectors = np.linalg.eigh(mat.toarray())
        energies, vectors = energies[:k], vectors[:, :k]
    else:
        v0 = np.random.default_rng(20240601).standard_normal(dim)
        maxiter = int(10 * math.sqrt(dim) + 500)
        try:
            energies, vectors = spla.eigsh(
                mat, k=min(k, dim - 1), which="SA", v0=v0, maxiter=maxiter, tol=0
            )
        except spla.ArpackNoConvergence as exc:  # pragma: no cover - defensive
            vals, vecs = exc.eigenvalues, exc.eigenvectors
            if len(vals) == 0:
                raise ConvergenceError("Lanczos did not converge", math.inf) from exc
            res = np.linalg.norm(mat @ vecs - vecs * vals, axis=0)
            raise ConvergenceError("Lanczos did not converge", float(res.min())) from exc
        order = np.argsort(energies)
        energies, vectors = energies[order], vectors[:, order]
    res = np.linalg.norm(mat @ vectors - vectors * energies, axis=0)
    scale = max(1.0, float(np.max(np.abs(energies))))
    if res.max() > tol * scale:
        raise ConvergenceError("ground state residual above tolerance", float(res.max()))
    vec = fix_phase(vectors[:, 0].astype(complex))
    vec = vec / np.linalg.norm(vec)
    gap = float(energies[1] - energies[0]) if len(energies) > 1 else math.inf
    return GroundResult(float(energies[0]), PureState(h.basis, vec), max(gap, 0.0), energies)


def ladder_basis(n: int, sector: int | None = 0) -> SectorBasis:
    return enumerate_sector(2 * n, sector)


def rung_singlet_state(n: int, basis: SectorBasis) -> PureState:
    """Product of (|up,down> - |down,up>)/sqrt 2 on every rung (k, k+n).

    Leg-1 spin is written first, so the amplitude of a bit string is the
    product over rungs of +-1/sqrt 2, positive when the leg-1 spin is up.
    """
    amps = np.ones(basis.dim)
    for k in range(n):
        a, b = basis.bit(k), basis.bit(k + n)
        amps = amps * np.where(a != b, np.where(a == 1, 1.0, -1.0), 0.0)
    return PureState(basis, amps / 2 ** (n / 2))


def parent_ground_state(spec: LadderSpec, basis: SectorBasis | None = None, k: int = 2) -> GroundResult:
    """Ground state of H_parent(lambda), S^z = 0 sector by default.

    ``lambda = inf`` returns the rung-singlet product with the energy of
    ``H_12`` and an infinite gap.
    """
    basis = ladder_basis(spec.n) if basis is None else basis
    if spec.infinite:
        state = rung_singlet_state(spec.n, basis)
        e = -2.0 * spec.chain.J * spec.n
        return GroundResult(e, state, math.inf, np.array([e]))
    h = build_parent_hamiltonian(spec, basis).operator
    return ground_state(h, k=k)


def sector_ground_energies(spec: LadderSpec, k: int = 2) -> dict[int, np.ndarray]:
    """Lowest ``k`` energies of H_parent in every S^z sector."""
    out = {}
    n2 = 2 * spec.n
    for sector in range(-n2, n2 + 1, 2):
        basis = enumerate_sector(n2, sector)
        h = build_parent_hamiltonian(spec, basis).operator
        if basis.dim <= k or basis.dim <= DENSE_FALLBACK_DIM:
            out[sector] = np.linalg.eigvalsh(h.dense())[:k]
        else:
            out[sector] = ground_state(h, k=k).energies[:k]
    return out


def absolute_gap(spec: LadderSpec) -> float:
    """Gap above the ground state across all sectors (full-space gap)."""
    energies = np.sort(np.concatenate(list(sector_ground_energies(spec).values())))
    return float(energies[1] - energies[0])


def gap_curve(
    spec: ChainSpec, lambdas: Sequence[float], sector_restricted: bool = True
) -> list[tuple[float, float]]:
    """Delta(lambda) of H_parent; S^z = 0 sector gap unless ``sector_restricted`` is False."""
    basis = ladder_basis(spec.n)
    out = []
    for lam in lambdas:
        ladder = LadderSpec(spec, float(lam))
        if ladder.infinite:
            out.append((float(lam), math.inf))
            continue
        if sector_restricted:
            gap = parent_ground_state(ladder, basis).gap
        else:
            gap = absolute_gap(ladder)
        out.append((float(lam), gap))
    return out


def sz_total_residual(state: PureState) -> float:
    """||S^z_tot |psi>||, zero for S^z = 0 eigenstates."""
    sz = sigma_z_total(state.basis)
    return float(np.linalg.norm(sz.matrix @ state.amplitudes))
