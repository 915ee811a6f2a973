"""Chain, ladder and symmetry operators of the long-range XX model.

Sites are 0-based internally. The chain couples every pair of sites on
opposite sublattices (1-based odd/even labels, i.e. 0-based even/odd) with
strength ``J / |i - j|^3`` and open boundaries. Leg 1 of the ladder occupies
sites ``0..n-1``, leg 2 sites ``n..2n-1``; rungs couple ``k`` and ``k + n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np

from .hilbert import (
    PauliString,
    SectorBasis,
    SparseOperator,
    diagonal_operator,
    enumerate_sector,
    hopping_operator,
    pauli_string_to_operator,
)

ALPHA = 3
PARTICLE_HOLE_TOL = 1e-12


@dataclass(frozen=True)
class ChainSpec:
    n: int
    J: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"a chain needs n >= 2 spins, got {self.n}")
        if not self.J > 0:
            raise ValueError(f"J must be positive, got {self.J}")

    def couplings(self, offset: int = 0) -> list[tuple[int, int, float]]:
        """``(i, j, J/r^3)`` for every opposite-sublattice pair, shifted by ``offset``."""
        out = []
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if (j - i) % 2 == 1:
                    out.append((i + offset, j + offset, self.J / (j - i) ** ALPHA))
        return out


@dataclass(frozen=True)
class LadderSpec:
    chain: ChainSpec
    lam: float

    def __post_init__(self) -> None:
        if not self.lam >= 0:
            raise ValueError(f"rung coupling must be >= 0, got {self.lam}")

    @property
    def n(self) -> int:
        return self.chain.n

    @property
    def infinite(self) -> bool:
        return math.isinf(self.lam)


class ParentHamiltonian(NamedTuple):
    operator: SparseOperator
    rung_only: bool  # True for lambda = inf: operator is H_12 alone


def _require_qubits(basis: SectorBasis, needed: int) -> None:
    if basis.num_qubits < needed:
        raise ValueError(f"basis has {basis.num_qubits} qubits, need at least {needed}")


def build_chain_hamiltonian(spec: ChainSpec, basis: SectorBasis, offset: int = 0) -> SparseOperator:
    _require_qubits(basis, offset + spec.n)
    return hopping_operator(basis, spec.couplings(offset))


def build_rung_coupling(spec: ChainSpec, basis: SectorBasis) -> SparseOperator:
    _require_qubits(basis, 2 * spec.n)
    return hopping_operator(basis, [(k, k + spec.n, spec.J) for k in range(spec.n)])


def build_parent_hamiltonian(spec: LadderSpec, basis: SectorBasis) -> ParentHamiltonian:
    chain = spec.chain
    h12 = build_rung_coupling(chain, basis)
    if spec.infinite:
        return ParentHamiltonian(h12, True)
    h = build_chain_hamiltonian(chain, basis) + build_chain_hamiltonian(chain, basis, chain.n)
    return ParentHamiltonian(h + spec.lam * h12, False)


def build_protocol_generator(
    spec: ChainSpec,
    basis: SectorBasis,
    first: float = 1.0,
    second: float = 1.0,
    remnant: float = 0.0,
) -> SparseOperator:
    """``first * H_1 - second * H_2^* + remnant * H_12``."""
    h1 = build_chain_hamiltonian(spec, basis)
    h2c = build_chain_hamiltonian(spec, basis, spec.n).conj()
    gen = first * h1 + (-second) * h2c
    if remnant:
        gen = gen + remnant * build_rung_coupling(spec, basis)
    return gen


def build_sum_generator(spec: ChainSpec, basis: SectorBasis) -> SparseOperator:
    """``H_1 + H_2``, the generator evolved between the R pulses."""
    return build_chain_hamiltonian(spec, basis) + build_chain_hamiltonian(spec, basis, spec.n)


def r_sites(n: int, leg: Literal["first", "second"]) -> list[int]:
    """0-based sites carrying sigma^z in R: even 1-based labels within the leg."""
    lo = 0 if leg == "first" else n
    if leg not in ("first", "second"):
        raise ValueError(f"leg must be 'first' or 'second', got {leg!r}")
    return [k for k in range(lo, lo + n) if (k + 1) % 2 == 0]


def build_R(n: int, leg: Literal["first", "second"], basis: SectorBasis) -> SparseOperator:
    sites = r_sites(n, leg)
    _require_qubits(basis, max(sites) + 1)
    vals = np.ones(basis.dim)
    for k in sites:
        vals *= 2.0 * basis.bit(k) - 1.0
    return diagonal_operator(basis, vals, unitary=True)


def u0_string(n: int) -> PauliString:
    return PauliString(tuple((k, "Y") for k in range(n)))


def build_U0(n: int, basis: SectorBasis) -> SparseOperator:
    """Product of sigma^y over leg 1. Needs a basis closed under flipping leg 1."""
    return pauli_string_to_operator(u0_string(n), basis)


def u0_matrix(n: int) -> np.ndarray:
    """Dense ``2^n x 2^n`` matrix of U_0 on a single leg."""
    return build_U0(n, enumerate_sector(n)).dense()


def particle_hole_residual(h: SparseOperator, r: SparseOperator) -> float:
    """max |R^dag H R + H^*| elementwise."""
    lhs = r.dagger() @ h @ r
    return (lhs + h.conj()).max_abs()


def verify_particle_hole(spec: ChainSpec, hamiltonian: SparseOperator | None = None) -> bool:
    """Dense check of ``R^dag H R = -H^*`` on the full n-qubit space.

    ``hamiltonian`` replaces the model H (e.g. to probe a perturbed model).
    """
    if spec.n > 12:
        raise ValueError("dense particle-hole check limited to n <= 12")
    basis = enumerate_sector(spec.n) if hamiltonian is None else hamiltonian.basis
    h = build_chain_hamiltonian(spec, basis) if hamiltonian is None else hamiltonian
    r = build_R(spec.n, "first", basis)
    lhs = r.dagger().dense() @ h.dense() @ r.dense()
    return bool(np.max(np.abs(lhs + h.dense().conj())) < PARTICLE_HOLE_TOL)


def commutation_sign(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> int:
    """+1 if ``ab = ba``, -1 if ``ab = -ba``, 0 otherwise."""
    ab, ba = a @ b, b @ a
    if np.max(np.abs(ab - ba)) < tol:
        return 1
    if np.max(np.abs(ab + ba)) < tol:
        return -1
    return 0
