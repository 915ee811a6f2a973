"""Bit-string Hilbert spaces, sparse operators and Pauli strings.

Convention: site ``k`` is bit ``k`` of an unsigned integer and an up-spin is
bit value 1, so ``sigma^z`` is ``+1`` on a set bit. Sector labels are eigenvalues
of ``sum_k sigma^z_k``, i.e. ``2 * popcount - num_qubits``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "BasisMismatchError",
    "SectorError",
    "SectorBasis",
    "SparseOperator",
    "PureState",
    "PauliString",
    "enumerate_sector",
    "pauli_string_to_operator",
    "pauli_expectation",
    "apply",
    "expectation",
    "diagonal_operator",
    "hopping_operator",
    "sigma_z_total",
    "embed",
    "to_leg_matrix",
    "from_leg_matrix",
]

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10


class SectorError(ValueError):
    """Invalid sector label, or an operator that leaves a sector basis."""


class BasisMismatchError(ValueError):
    """Operands live on different bases."""


# ---------------------------------------------------------------------------
# bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Computational basis states, optionally restricted to one S^z sector."""

    num_qubits: int
    sector: int | None
    states: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    @cached_property
    def index_of(self) -> dict[int, int]:
        return {int(s): i for i, s in enumerate(self.states)}

    def lookup(self, bits: np.ndarray) -> np.ndarray:
        """Dense indices of ``bits``; -1 where a bit string is not in the basis."""
        bits = np.asarray(bits, dtype=np.uint64)
        if self.sector is None:
            return bits.astype(np.int64)
        pos = np.searchsorted(self.states, bits)
        pos = np.minimum(pos, self.dim - 1)
        found = self.states[pos] == bits
        return np.where(found, pos, -1).astype(np.int64)

    def bit(self, site: int) -> np.ndarray:
        """0/1 occupation of ``site`` for every basis state."""
        return ((self.states >> np.uint64(site)) & np.uint64(1)).astype(np.int8)

    def _key(self) -> tuple[int, int | None]:
        return (self.num_qubits, self.sector)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SectorBasis):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())


def enumerate_sector(num_qubits: int, sector: int | None = None) -> SectorBasis:
    """All bit strings of ``num_qubits`` bits with ``2*popcount - num_qubits == sector``.

    States are returned in ascending integer order.
    """
    if num_qubits < 1:
        raise ValueError(f"num_qubits must be >= 1, got {num_qubits}")
    if num_qubits > 62:
        raise ValueError("at most 62 qubits are supported")
    if sector is None:
        states = np.arange(2**num_qubits, dtype=np.uint64)
        return SectorBasis(num_qubits, None, states)
    if abs(sector) > num_qubits or (sector + num_qubits) % 2:
        raise SectorError(
            f"sector {sector} is incompatible with {num_qubits} qubits "
            "(need |sector| <= num_qubits and matching parity)"
        )
    ups = (sector + num_qubits) // 2
    states = np.fromiter(
        (sum(1 << k for k in combo) for combo in itertools.combinations(range(num_qubits), ups)),
        dtype=np.uint64,
    )
    states.sort()
    return SectorBasis(num_qubits, sector, states)


# ---------------------------------------------------------------------------
# Pauli strings
# ---------------------------------------------------------------------------

_AXES = ("X", "Y", "Z")


@dataclass(frozen=True)
class PauliString:
    """Product of single-site Pauli matrices times a unit phase.

    ``factors`` is a tuple of ``(site, axis)`` pairs with unique sites. The empty
    string is the identity.
    """

    factors: tuple[tuple[int, str], ...] = ()
    phase: complex = 1.0

    def __post_init__(self) -> None:
        factors = tuple(sorted((int(s), str(a).upper()) for s, a in self.factors))
        sites = [s for s, _ in factors]
        if len(set(sites)) != len(sites):
            raise ValueError(f"repeated site in Pauli string {factors}")
        for s, a in factors:
            if a not in _AXES:
                raise ValueError(f"unknown Pauli axis {a!r}")
            if s < 0:
                raise ValueError(f"negative site {s}")
        if not np.isclose(abs(self.phase), 1.0, atol=1e-12):
            raise ValueError(f"phase must have unit modulus, got {self.phase}")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "phase", complex(self.phase))

    @classmethod
    def single(cls, axis: str, site: int) -> "PauliString":
        if axis.upper() == "I":
            return cls()
        return cls(((site, axis),))

    @classmethod
    def identity(cls) -> "PauliString":
        return cls()

    @property
    def is_identity(self) -> bool:
        return not self.factors

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.factors)

    @property
    def flip_mask(self) -> int:
        return sum(1 << s for s, a in self.factors if a in ("X", "Y"))

    @property
    def num_flips(self) -> int:
        return sum(1 for _, a in self.factors if a in ("X", "Y"))

    def dagger(self) -> "PauliString":
        return PauliString(self.factors, np.conj(self.phase))

    def transpose(self) -> "PauliString":
        """X^T = X, Z^T = Z, Y^T = -Y."""
        ny = sum(1 for _, a in self.factors if a == "Y")
        return PauliString(self.factors, self.phase * (-1) ** ny)

    def shifted(self, offset: int) -> "PauliString":
        return PauliString(tuple((s + offset, a) for s, a in self.factors), self.phase)

    def __mul__(self, other: "PauliString") -> "PauliString":
        """Tensor product of strings on disjoint sites."""
        if set(self.sites) & set(other.sites):
            raise ValueError("product of overlapping Pauli strings is not supported")
        return PauliString(self.factors + other.factors, self.phase * other.phase)

    def anticommutes_with(self, other: "PauliString") -> bool:
        mine = dict(self.factors)
        clashes = sum(1 for s, a in other.factors if s in mine and mine[s] != a)
        return clashes % 2 == 1

    def action(self, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Image bit strings and matrix elements: ``P|s> = phase_s |target_s>``."""
        states = np.asarray(states, dtype=np.uint64)
        phases = np.full(states.shape, self.phase, dtype=complex)
        for site, axis in self.factors:
            b = (states >> np.uint64(site)) & np.uint64(1)
            up = b.astype(bool)
            if axis == "Z":
                phases *= np.where(up, 1.0, -1.0)
            elif axis == "Y":
                # sigma^y|up> = i|down>, sigma^y|down> = -i|up>
                phases *= np.where(up, 1j, -1j)
        return states ^ np.uint64(self.flip_mask), phases

    def __str__(self) -> str:
        if not self.factors:
            body = "I"
        else:
            body = " ".join(f"{a}{s}" for s, a in self.factors)
        return body if self.phase == 1 else f"({self.phase:g}) {body}"


# ---------------------------------------------------------------------------
# operators and states
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Sparse complex matrix acting on ``basis``."""

    basis: SectorBasis
    matrix: sp.csr_matrix = field(repr=False)
    hermitian_hint: bool = False
    unitary_hint: bool = False

    def __post_init__(self) -> None:
        m = sp.csr_matrix(self.matrix, dtype=complex)
        if m.shape != (self.basis.dim, self.basis.dim):
            raise BasisMismatchError(
                f"matrix shape {m.shape} does not match basis dimension {self.basis.dim}"
            )
        m.sum_duplicates()
        m.eliminate_zeros()
        object.__setattr__(self, "matrix", m)
        if self.hermitian_hint:
            diff = (m - m.conj().T).tocoo()
            if diff.nnz and np.max(np.abs(diff.data)) > HERMITIAN_TOL:
                raise ValueError("operator flagged Hermitian is not Hermitian")

    @property
    def dim(self) -> int:
        return self.basis.dim

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def dagger(self) -> "SparseOperator":
        return SparseOperator(
            self.basis, self.matrix.conj().T.tocsr(), self.hermitian_hint, self.unitary_hint
        )

    def conj(self) -> "SparseOperator":
        return SparseOperator(
            self.basis, self.matrix.conj(), self.hermitian_hint, self.unitary_hint
        )

    def _check(self, other: "SparseOperator") -> None:
        if other.basis != self.basis:
            raise BasisMismatchError("operators act on different bases")

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        self._check(other)
        return SparseOperator(
            self.basis, self.matrix + other.matrix, self.hermitian_hint and other.hermitian_hint
        )

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        return self + (-1.0) * other

    def __rmul__(self, scalar: complex) -> "SparseOperator":
        scalar = complex(scalar)
        return SparseOperator(
            self.basis,
            scalar * self.matrix,
            self.hermitian_hint and scalar.imag == 0,
            self.unitary_hint and abs(abs(scalar) - 1) < 1e-15,
        )

    def __matmul__(self, other: "SparseOperator") -> "SparseOperator":
        self._check(other)
        return SparseOperator(
            self.basis, self.matrix @ other.matrix, False, self.unitary_hint and other.unitary_hint
        )

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.matrix.data))) if self.matrix.nnz else 0.0


@dataclass(frozen=True, eq=False)
class PureState:
    """Amplitude vector over ``basis``."""

    basis: SectorBasis
    amplitudes: np.ndarray = field(repr=False)
    normalized: bool = True

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise BasisMismatchError(
                f"amplitude vector of shape {amps.shape} on a basis of dimension {self.basis.dim}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized and abs(np.linalg.norm(amps) - 1.0) > NORM_TOL:
            raise ValueError(f"state flagged normalized has norm {np.linalg.norm(amps)}")

    @classmethod
    def from_vector(cls, basis: SectorBasis, vec: np.ndarray, normalize: bool = True) -> "PureState":
        vec = np.asarray(vec, dtype=complex)
        if normalize:
            nrm = np.linalg.norm(vec)
            if nrm == 0:
                raise ValueError("cannot normalize the zero vector")
            vec = vec / nrm
        return cls(basis, vec, normalized=normalize)

    @classmethod
    def basis_state(cls, basis: SectorBasis, bits: int) -> "PureState":
        vec = np.zeros(basis.dim, dtype=complex)
        idx = basis.index_of.get(int(bits))
        if idx is None:
            raise SectorError(f"bit string {bits:b} is not in the basis")
        vec[idx] = 1.0
        return cls(basis, vec)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "PureState") -> complex:
        """<self|other>."""
        if other.basis != self.basis:
            raise BasisMismatchError("states live on different bases")
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def pauli_string_to_operator(
    p: PauliString, basis: SectorBasis, compress: bool = False
) -> SparseOperator:
    """Sparse matrix of ``p`` on ``basis`` (one nonzero per column).

    On a sector basis a string that moves any basis state out of the sector is
    rejected, unless ``compress`` is set, in which case the operator is projected
    onto the sector (``P p P``). The projection is exact for expectation values
    in states supported on the sector but is no longer unitary.
    """
    if p.factors and max(p.sites) >= basis.num_qubits:
        raise ValueError(f"Pauli string {p} does not fit {basis.num_qubits} qubits")
    targets, phases = p.action(basis.states)
    rows = basis.lookup(targets)
    cols = np.arange(basis.dim)
    leaving = rows < 0
    if leaving.any():
        if p.num_flips % 2 == 1 or not compress:
            raise SectorError(f"Pauli string {p} leaves sector {basis.sector}")
        keep = ~leaving
        rows, cols, phases = rows[keep], cols[keep], phases[keep]
    mat = sp.csr_matrix((phases, (rows, cols)), shape=(basis.dim, basis.dim))
    unitary = not leaving.any()
    hermitian = abs(p.phase.imag) < 1e-15
    return SparseOperator(basis, mat, hermitian_hint=hermitian, unitary_hint=unitary)


def pauli_expectation(p: PauliString, s: PureState) -> complex:
    """<s|p|s>, evaluated by bit flips without forming a matrix.

    Matrix elements that leave the basis contribute nothing, which is exact for
    states supported on a single sector.
    """
    targets, phases = p.action(s.basis.states)
    rows = s.basis.lookup(targets)
    ok = rows >= 0
    amps = s.amplitudes
    return complex(np.sum(np.conj(amps[rows[ok]]) * phases[ok] * amps[ok]))


def apply(op: SparseOperator, s: PureState) -> PureState:
    if op.basis != s.basis:
        raise BasisMismatchError("operator and state live on different bases")
    out = op.matrix @ s.amplitudes
    keep_norm = s.normalized and op.unitary_hint
    return PureState(s.basis, out, normalized=keep_norm)


def expectation(op: SparseOperator, s: PureState) -> complex:
    if op.basis != s.basis:
        raise BasisMismatchError("operator and state live on different bases")
    val = complex(np.vdot(s.amplitudes, op.matrix @ s.amplitudes))
    if op.hermitian_hint:
        scale = max(1.0, s.norm() ** 2 * op.max_abs())
        assert abs(val.imag) < 1e-10 * scale, f"Hermitian expectation has imaginary part {val.imag}"
    return val


# ---------------------------------------------------------------------------
# builders used by the model
# ---------------------------------------------------------------------------


def diagonal_operator(basis: SectorBasis, values: np.ndarray, unitary: bool = False) -> SparseOperator:
    values = np.asarray(values)
    return SparseOperator(
        basis,
        sp.diags(values.astype(complex), format="csr"),
        hermitian_hint=bool(np.all(np.isreal(values))),
        unitary_hint=unitary,
    )


def sigma_z_total(basis: SectorBasis, sites: Iterable[int] | None = None) -> SparseOperator:
    sites = range(basis.num_qubits) if sites is None else sites
    vals = np.zeros(basis.dim)
    for k in sites:
        vals += 2.0 * basis.bit(k) - 1.0
    return diagonal_operator(basis, vals)


def hopping_operator(
    basis: SectorBasis, couplings: Sequence[tuple[int, int, float]]
) -> SparseOperator:
    """Sum of ``c * (X_i X_j + Y_i Y_j)`` over ``(i, j, c)``.

    Each term swaps antiparallel spins on ``i`` and ``j`` with amplitude ``2c``
    and annihilates parallel ones, so the operator preserves every sector.
    """
    rows, cols, vals = [], [], []
    idx = np.arange(basis.dim)
    for i, j, c in couplings:
        if i == j:
            raise ValueError("hopping needs two distinct sites")
        differ = basis.bit(i) != basis.bit(j)
        src = idx[differ]
        tgt = basis.lookup(basis.states[differ] ^ np.uint64((1 << i) | (1 << j)))
        rows.append(tgt)
        cols.append(src)
        vals.append(np.full(len(src), 2.0 * c))
    if rows:
        r, c_, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        r = c_ = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    mat = sp.csr_matrix((v.astype(complex), (r, c_)), shape=(basis.dim, basis.dim))
    return SparseOperator(basis, mat, hermitian_hint=True)


def embed(s: PureState, target: SectorBasis) -> PureState:
    """Re-express ``s`` on ``target``; amplitudes outside ``target`` must vanish."""
    if target.num_qubits != s.basis.num_qubits:
        raise BasisMismatchError("embedding needs equal qubit counts")
    rows = target.lookup(s.basis.states)
    lost = rows < 0
    if lost.any() and np.max(np.abs(s.amplitudes[lost])) > NORM_TOL:
        raise SectorError("state has weight outside the target basis")
    out = np.zeros(target.dim, dtype=complex)
    out[rows[~lost]] = s.amplitudes[~lost]
    return PureState(target, out, normalized=s.normalized)


def to_leg_matrix(s: PureState, n: int) -> np.ndarray:
    """Amplitudes as a ``2^n x 2^(N-n)`` matrix ``M[low bits, high bits]``."""
    low = (s.basis.states & np.uint64((1 << n) - 1)).astype(np.int64)
    high = (s.basis.states >> np.uint64(n)).astype(np.int64)
    m = np.zeros((2**n, 2 ** (s.basis.num_qubits - n)), dtype=complex)
    m[low, high] = s.amplitudes
    return m


def from_leg_matrix(m: np.ndarray, basis: SectorBasis, n: int, normalized: bool = True) -> PureState:
    """Inverse of :func:`to_leg_matrix`; entries outside ``basis`` are dropped."""
    low = (basis.states & np.uint64((1 << n) - 1)).astype(np.int64)
    high = (basis.states >> np.uint64(n)).astype(np.int64)
    return PureState(basis, m[low, high], normalized=normalized)
