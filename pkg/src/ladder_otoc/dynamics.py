"""Two-leg time evolution: ideal, noisy and imperfect.

Generators are ``first * H_1 - second * H_2^* (+ remnant * H_12)`` with
hbar = 1, so times are ``J t / hbar``. Dissipators use the completely positive
sign convention, e.g. ``gamma * (Z rho Z - rho)`` for local dephasing.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Sequence, Union

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .hilbert import (
    PauliString,
    PureState,
    SectorBasis,
    SparseOperator,
    enumerate_sector,
    from_leg_matrix,
    pauli_expectation,
    to_leg_matrix,
)
from .model import (
    ChainSpec,
    LadderSpec,
    build_protocol_generator,
    build_R,
    build_chain_hamiltonian,
    build_sum_generator,
)
from .spectral import full_spectrum

KRYLOV_DIM = 30
KRYLOV_TOL = 1e-10
PARTICLE_HOLE_TOL = 1e-12

KINDS = (
    "ideal_direct",
    "ideal_via_R",
    "collective_dephasing",
    "depolarization",
    "local_dephasing",
    "remnant_coupling",
    "asymmetric_legs",
)


class KrylovError(RuntimeError):
    pass


class ParticleHoleViolation(ValueError):
    pass


@dataclass(frozen=True)
class EvolutionSpec:
    kind: str = "ideal_direct"
    gamma: float = 0.0
    epsilon: float = 0.0
    trajectories: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown evolution kind {self.kind!r}; expected one of {KINDS}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not 0 <= self.epsilon < 1:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")

    @property
    def leg_factors(self) -> tuple[float, float]:
        if self.kind == "asymmetric_legs":
            return 1.0 - self.epsilon, 1.0 + self.epsilon
        return 1.0, 1.0

    @property
    def remnant(self) -> float:
        return self.epsilon if self.kind == "remnant_coupling" else 0.0


# ---------------------------------------------------------------------------
# Krylov propagation
# ---------------------------------------------------------------------------


def _lanczos(matvec, v: np.ndarray, m: int):
    """Orthonormal Krylov basis with full reorthogonalization."""
    dim = len(v)
    m = min(m, dim)
    basis = np.zeros((dim, m + 1), dtype=complex)
    basis[:, 0] = v
    alpha, beta = [], []
    for j in range(m):
        u = matvec(basis[:, j])
        a = float(np.vdot(basis[:, j], u).real)
        alpha.append(a)
        # two passes of classical Gram-Schmidt against the whole basis
        for _ in range(2):
            u = u - basis[:, : j + 1] @ (basis[:, : j + 1].conj().T @ u)
        b = float(np.linalg.norm(u))
        if b < 1e-12 * max(1.0, abs(a)):
            return basis[:, : j + 1], np.array(alpha), np.array(beta), True
        beta.append(b)
        basis[:, j + 1] = u / b
    return basis, np.array(alpha), np.array(beta), False


def expm_krylov(
    matvec: Callable[[np.ndarray], np.ndarray],
    v: np.ndarray,
    t: float,
    krylov_dim: int = KRYLOV_DIM,
    tol: float = KRYLOV_TOL,
) -> np.ndarray:
    """exp(-i t G) v for Hermitian G given as ``matvec``, with adaptive substeps.

    Each substep keeps the a-posteriori error estimate
    ``beta_m |<e_m| exp(-i dt T_m) |e_1>|`` below ``tol`` (relative to ||v||).
    """
    if t < 0:
        raise ValueError("negative time")
    v = np.asarray(v, dtype=complex)
    nrm = float(np.linalg.norm(v))
    if t == 0 or nrm == 0:
        return v.copy()
    w = v / nrm
    remaining, dt = float(t), float(t)
    min_dt = 1e-13 * max(1.0, t)
    while remaining > 0:
        vk, alpha, beta, happy = _lanczos(matvec, w, krylov_dim)
        m = len(alpha)
        if m == 1:
            evals, evecs = alpha.copy(), np.ones((1, 1))
        else:
            evals, evecs = eigh_tridiagonal(alpha, beta[: m - 1])

        def coeffs(h: float) -> np.ndarray:
            return evecs @ (np.exp(-1j * h * evals) * evecs[0])

        dt = min(dt, remaining)
        if happy:
            dt = remaining
            c = coeffs(dt)
            err = 0.0
        else:
            while True:
                c = coeffs(dt)
                err = beta[m - 1] * abs(c[-1])
                if err <= tol:
                    break
                dt *= max(0.1, min(0.5, 0.9 * (tol / err) ** (1.0 / m)))
                if dt < min_dt:
                    raise KrylovError(f"Krylov step underflow at remaining time {remaining}")
        w = vk[:, :m] @ c
        remaining -= dt
        if remaining <= 1e-15 * t:
            break
        if err < 0.1 * tol:
            dt *= 1.5
    return nrm * w


def evolve_ideal(
    state: PureState, generator: SparseOperator, t: float, krylov_dim: int = KRYLOV_DIM
) -> PureState:
    """exp(-i G t)|state> for the protocol generator ``G = H_1 - H_2^*``."""
    if generator.basis != state.basis:
        raise ValueError("generator and state live on different bases")
    mat = generator.matrix
    out = expm_krylov(lambda x: mat @ x, state.amplitudes, t, krylov_dim)
    return PureState(state.basis, out, normalized=state.normalized)


def particle_hole_gap(h_sum: SparseOperator, r2: SparseOperator, target: SparseOperator) -> float:
    """max |R_2^dag (H_1 + H_2) R_2 - (H_1 - H_2^*)|."""
    return (r2.dagger() @ h_sum @ r2 - target).max_abs()


def evolve_via_R(
    state: PureState,
    h_sum: SparseOperator,
    r2: SparseOperator,
    t: float,
    target: SparseOperator,
) -> PureState:
    """R_2^dag exp(-i (H_1 + H_2) t) R_2 |state>, the sign-free realization.

    Refuses to run unless ``R_2^dag (H_1+H_2) R_2`` reproduces ``target``
    (the generator ``H_1 - H_2^*``) to 1e-12.
    """
    gap = particle_hole_gap(h_sum, r2, target)
    if gap > PARTICLE_HOLE_TOL:
        raise ParticleHoleViolation(f"R does not map H_1 + H_2 onto H_1 - H_2^* (residual {gap:.2e})")
    s = r2.matrix @ state.amplitudes
    s = expm_krylov(lambda x: h_sum.matrix @ x, s, t)
    s = r2.dagger().matrix @ s
    return PureState(state.basis, s, normalized=state.normalized)


# ---------------------------------------------------------------------------
# propagators
#
# A propagator advances a "native" representation of a 2n-qubit state: the
# amplitude vector for Krylov propagation, magnetization blocks of the leg
# matrix in the chain eigenbasis for the spectral one. Trajectories stay native
# between jumps and observations.
# ---------------------------------------------------------------------------


class _PropagatorBase:
    basis: SectorBasis

    def _init_signs(self) -> None:
        self._z = [2.0 * self.basis.bit(k) - 1.0 for k in range(self.basis.num_qubits)]

    def encode(self, vec: np.ndarray) -> Any:
        return np.array(vec, dtype=complex)

    def decode(self, x: Any) -> np.ndarray:
        return x

    def advance(self, x: Any, dt: float) -> Any:
        raise NotImplementedError

    def step(self, vec: np.ndarray, dt: float) -> np.ndarray:
        """Advance a computational-basis amplitude vector by ``dt``."""
        return self.decode(self.advance(self.encode(vec), dt))

    def jump(self, x: Any, site: int) -> Any:
        """Apply sigma^z at ``site``."""
        return self._z[site] * x

    def expectations(self, x: Any, paulis: Sequence[PauliString], gamma_t: float = 0.0) -> np.ndarray:
        """Real parts of <P> for each P, with inter-sector coherences damped by
        exp(-gamma_t (m - m')^2 / 2) when ``gamma_t`` > 0."""
        s = PureState(self.basis, self.decode(x), normalized=False)
        if gamma_t > 0:
            return np.array([observable_expectation(DephasedState(s, gamma_t), p).real for p in paulis])
        return np.array([pauli_expectation(p, s).real for p in paulis])


class KrylovPropagator(_PropagatorBase):
    def __init__(self, generator: SparseOperator, krylov_dim: int = KRYLOV_DIM):
        self.basis = generator.basis
        self._mat = generator.matrix
        self.krylov_dim = krylov_dim
        self._init_signs()

    def advance(self, x: np.ndarray, dt: float) -> np.ndarray:
        return expm_krylov(lambda v: self._mat @ v, x, dt, self.krylov_dim)


class RConjugatedPropagator(KrylovPropagator):
    """Evolves with H_1 + H_2 between R_2 pulses."""

    def __init__(self, chain: ChainSpec, basis: SectorBasis):
        target = build_protocol_generator(chain, basis)
        h_sum = build_sum_generator(chain, basis)
        r2 = build_R(chain.n, "second", basis)
        gap = particle_hole_gap(h_sum, r2, target)
        if gap > PARTICLE_HOLE_TOL:
            raise ParticleHoleViolation(f"particle-hole identity fails (residual {gap:.2e})")
        super().__init__(h_sum)
        self._r = r2.matrix.diagonal()

    def advance(self, x: np.ndarray, dt: float) -> np.ndarray:
        # R_2 is a real diagonal involution
        return self._r * super().advance(self._r * x, dt)


class LegSector(NamedTuple):
    """Chain eigensystem restricted to leg states with ``count`` up-spins."""

    count: int
    states: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray  # real orthogonal


@functools.lru_cache(maxsize=8)
def leg_sectors(chain: ChainSpec) -> tuple[LegSector, ...]:
    """Per-magnetization eigensystems of the chain (H is real and conserves S^z)."""
    out = []
    for count in range(chain.n + 1):
        basis = enumerate_sector(chain.n, 2 * count - chain.n)
        spec = full_spectrum(build_chain_hamiltonian(chain, basis))
        vecs = spec.vectors.real.copy()
        vecs.setflags(write=False)
        out.append(LegSector(count, basis.states.astype(np.int64), spec.energies, vecs))
    return tuple(out)


def _split_legs(p: PauliString, n: int) -> tuple[PauliString, PauliString]:
    left = PauliString(tuple((s, a) for s, a in p.factors if s < n), p.phase)
    right = PauliString(tuple((s - n, a) for s, a in p.factors if s >= n))
    return left, right


class LegPropagator(_PropagatorBase):
    """Exact propagation under ``first * H_1 - second * H_2^*`` from the chain spectrum.

    The leg matrix ``M[leg 1, leg 2]`` evolves as
    ``exp(-i first H t) M exp(+i second H t)``. Since H conserves each leg's
    magnetization, ``M`` splits into blocks ``(a, b)`` of up-spin counts, each
    stored as ``U_a^T M_ab U_b`` so that evolution is a pointwise phase.
    """

    def __init__(self, chain: ChainSpec, basis: SectorBasis, first: float = 1.0, second: float = 1.0):
        n = chain.n
        if basis.num_qubits != 2 * n:
            raise ValueError("ladder basis must have twice the chain's qubits")
        self.n = n
        self.basis = basis
        self.sectors = leg_sectors(chain)
        if basis.sector is None:
            self.pairs = [(a, b) for a in range(n + 1) for b in range(n + 1)]
        else:
            total = (basis.sector + 2 * n) // 2
            self.pairs = [(a, total - a) for a in range(n + 1) if 0 <= total - a <= n]
        e = [sec.energies for sec in self.sectors]
        self._freq = {(a, b): first * e[a][:, None] - second * e[b][None, :] for a, b in self.pairs}
        self._phase_cache: dict[float, dict] = {}
        self._op_cache: dict[PauliString, dict] = {}
        self._split_cache: dict[PauliString, tuple] = {}
        self._init_signs()

    def encode(self, vec: np.ndarray) -> dict:
        m = to_leg_matrix(PureState(self.basis, vec, normalized=False), self.n)
        out = {}
        for a, b in self.pairs:
            sa, sb = self.sectors[a], self.sectors[b]
            blk = m[np.ix_(sa.states, sb.states)]
            if np.any(blk):
                out[(a, b)] = sa.vectors.T @ blk @ sb.vectors
        return out

    def decode(self, x: dict) -> np.ndarray:
        m = np.zeros((2**self.n, 2**self.n), dtype=complex)
        for (a, b), blk in x.items():
            sa, sb = self.sectors[a], self.sectors[b]
            m[np.ix_(sa.states, sb.states)] = sa.vectors @ blk @ sb.vectors.T
        return from_leg_matrix(m, self.basis, self.n, normalized=False).amplitudes

    def phases(self, dt: float) -> dict:
        cached = self._phase_cache.get(dt)
        if cached is None:
            cached = {k: np.exp(-1j * dt * f) for k, f in self._freq.items()}
            if len(self._phase_cache) > 32:
                self._phase_cache.clear()
            self._phase_cache[dt] = cached
        return cached

    def advance(self, x: dict, dt: float) -> dict:
        if dt == 0:
            return dict(x)
        ph = self.phases(dt)
        return {k: blk * ph[k] for k, blk in x.items()}

    def _leg_operator(self, p: PauliString) -> dict:
        """Blocks ``(a_out, a_in) -> U_out^T P U_in`` of a single-leg Pauli string."""
        cached = self._op_cache.get(p)
        if cached is not None:
            return cached
        states = np.arange(2**self.n, dtype=np.uint64)
        targets, phases = p.action(states)
        dense = np.zeros((2**self.n, 2**self.n), dtype=complex)
        dense[targets.astype(np.int64), states.astype(np.int64)] = phases
        out = {}
        for a_in, s_in in enumerate(self.sectors):
            for a_out, s_out in enumerate(self.sectors):
                blk = dense[np.ix_(s_out.states, s_in.states)]
                if np.any(blk):
                    out[(a_out, a_in)] = s_out.vectors.T @ blk @ s_in.vectors
        self._op_cache[p] = out
        return out

    def jump(self, x: dict, site: int) -> dict:
        n = self.n
        op = self._leg_operator(PauliString.single("Z", site % n))
        if site < n:
            return {(a, b): op[(a, a)] @ blk for (a, b), blk in x.items()}
        # leg 2 acts from the right through the transpose; Z^T = Z
        return {(a, b): blk @ op[(b, b)].T for (a, b), blk in x.items()}

    def expectations(self, x: dict, paulis: Sequence[PauliString], gamma_t: float = 0.0) -> np.ndarray:
        return np.array([self._expect(x, p, gamma_t) for p in paulis])

    def _expect(self, x: dict, p: PauliString, gamma_t: float) -> float:
        split = self._split_cache.get(p)
        if split is None:
            left, right = _split_legs(p, self.n)
            lops = None if left.is_identity else self._leg_operator(left)
            rops = None if right.is_identity else self._leg_operator(right)
            split = self._split_cache[p] = (left.phase, lops, rops)
        phase, lops, rops = split
        total = 0.0 + 0.0j
        for (a, b), blk in x.items():
            lefts = [(a, phase * blk)] if lops is None else [
                (ao, op @ blk) for (ao, ai), op in lops.items() if ai == a
            ]
            for ao, lb in lefts:
                rights = [(b, lb)] if rops is None else [
                    (bo, lb @ op.T) for (bo, bi), op in rops.items() if bi == b
                ]
                for bo, val in rights:
                    other = x.get((ao, bo))
                    if other is None:
                        continue
                    term = np.vdot(other, val)
                    if gamma_t > 0:
                        dm = 2 * ((ao + bo) - (a + b))
                        term *= math.exp(-0.5 * gamma_t * dm * dm)
                    total += term
        return float(total.real)


Propagator = Union[KrylovPropagator, LegPropagator]


def make_propagator(
    evo: EvolutionSpec,
    chain: ChainSpec,
    basis: SectorBasis,
    method: str = "auto",
) -> Propagator:
    """Propagator for the coherent part of ``evo``.

    ``method='auto'`` takes the exact spectral path whenever the generator is
    leg-separable, Krylov otherwise; ``ideal_via_R`` always uses the R pulses.
    """
    if method not in ("auto", "krylov", "spectral"):
        raise ValueError(f"unknown propagation method {method!r}")
    if evo.kind == "ideal_via_R":
        return RConjugatedPropagator(chain, basis)
    first, second = evo.leg_factors
    separable = evo.remnant == 0.0
    if method == "spectral" and not separable:
        raise ValueError("spectral propagation needs a leg-separable generator")
    if separable and method != "krylov":
        return LegPropagator(chain, basis, first, second)
    return KrylovPropagator(build_protocol_generator(chain, basis, first, second, evo.remnant))


def evolve_imperfect(
    state: PureState, t: float, spec: EvolutionSpec, model: LadderSpec
) -> PureState:
    """Coherent imperfections: remnant rung coupling or unequal leg strengths."""
    if spec.kind not in ("remnant_coupling", "asymmetric_legs"):
        raise ValueError(f"evolve_imperfect handles imperfection kinds, not {spec.kind!r}")
    first, second = spec.leg_factors
    gen = build_protocol_generator(model.chain, state.basis, first, second, spec.remnant)
    return evolve_ideal(state, gen, t)


# ---------------------------------------------------------------------------
# mixed outputs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DepolarizedState:
    """decay * |psi><psi| + (1 - decay) * identity / dim."""

    state: PureState
    decay: float

    @property
    def mixed_fraction(self) -> float:
        return 1.0 - self.decay


@dataclass(frozen=True, eq=False)
class DephasedState:
    """|psi><psi| with coherences between sigma^z_tot sectors m, m' scaled by
    exp(-gamma t (m - m')^2 / 2)."""

    state: PureState
    gamma_t: float


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    states: list[PureState] = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(self.states) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("ensemble weights must match the states and sum to 1")
        object.__setattr__(self, "weights", w)


PropagatedState = Union[PureState, DepolarizedState, DephasedState, TrajectoryEnsemble]


def sector_labels(basis: SectorBasis) -> np.ndarray:
    """sigma^z_tot eigenvalue of every basis state."""
    pop = np.zeros(basis.dim, dtype=np.int64)
    for k in range(basis.num_qubits):
        pop += basis.bit(k)
    return 2 * pop - basis.num_qubits


def observable_expectation(prop: PropagatedState, p: PauliString) -> complex:
    """Tr(rho P) for any propagated state."""
    if isinstance(prop, PureState):
        return pauli_expectation(p, prop)
    if isinstance(prop, DepolarizedState):
        val = pauli_expectation(p, prop.state)
        # the maximally mixed part only contributes to the identity
        return val if p.is_identity else prop.decay * val
    if isinstance(prop, DephasedState):
        s = prop.state
        targets, phases = p.action(s.basis.states)
        rows = s.basis.lookup(targets)
        ok = rows >= 0
        m = sector_labels(s.basis)
        damp = np.exp(-0.5 * prop.gamma_t * (m[rows[ok]] - m[ok]) ** 2)
        amps = s.amplitudes
        return complex(np.sum(np.conj(amps[rows[ok]]) * phases[ok] * amps[ok] * damp))
    if isinstance(prop, TrajectoryEnsemble):
        vals = np.array([pauli_expectation(p, s) for s in prop.states])
        return complex(np.dot(prop.weights, vals))
    raise TypeError(f"unsupported propagated state {type(prop).__name__}")


def _single_sector(state: PureState, tol: float = 1e-14) -> bool:
    m = sector_labels(state.basis)
    occupied = np.unique(m[np.abs(state.amplitudes) > tol])
    return len(occupied) <= 1


def evolve_collective_dephasing(
    state: PureState, t: float, gamma: float, generator: SparseOperator
) -> PropagatedState:
    """Global-field dephasing. The generator conserves sigma^z_tot, so the
    channel only damps inter-sector coherences; single-sector input is untouched."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    evolved = evolve_ideal(state, generator, t)
    if gamma == 0 or _single_sector(evolved):
        return evolved
    return DephasedState(evolved, gamma * t)


def evolve_depolarization(
    state: PureState, t: float, gamma: float, generator: SparseOperator
) -> DepolarizedState:
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    return DepolarizedState(evolve_ideal(state, generator, t), math.exp(-gamma * t))


# ---------------------------------------------------------------------------
# local dephasing by quantum trajectories
# ---------------------------------------------------------------------------


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def jump_record(rng: np.random.Generator, rate: float, t_max: float, num_sites: int):
    """Poisson jump times on [0, t_max] and uniformly drawn sites."""
    times, sites = [], []
    if rate <= 0:
        return np.array(times), np.array(sites, dtype=np.int64)
    t = rng.exponential(1.0 / rate)
    while t <= t_max:
        times.append(t)
        sites.append(int(rng.integers(num_sites)))
        t += rng.exponential(1.0 / rate)
    return np.array(times), np.array(sites, dtype=np.int64)


class TrajectoryRunner:
    """Unravels ``gamma * sum_i (Z_i rho Z_i - rho)`` into pure-state trajectories.

    Every jump operator is unitary, so the no-jump evolution is the coherent one
    up to a uniform decay: jumps arrive as a Poisson process of total rate
    ``num_qubits * gamma`` and each applies sigma^z at a uniform random site.
    ``observe`` receives the propagator's native state.
    """

    def __init__(self, propagator: Propagator, gamma: float, seed: int = 0):
        self.propagator = propagator
        self.basis = propagator.basis
        self.gamma = gamma
        self.seed = seed

    def run(
        self,
        vec: np.ndarray,
        times: Sequence[float],
        index: int,
        observe: Callable[[Any], np.ndarray],
    ) -> np.ndarray:
        """Observe one trajectory at every entry of ``times`` (ascending, >= 0)."""
        times = np.asarray(times, dtype=float)
        prop = self.propagator
        rng = trajectory_rng(self.seed, index)
        rate = self.basis.num_qubits * self.gamma
        jt, js = jump_record(rng, rate, float(times[-1]) if len(times) else 0.0, self.basis.num_qubits)
        x = prop.encode(vec)
        now = 0.0
        j = 0
        out = []
        for t in times:
            while j < len(jt) and jt[j] <= t:
                x = prop.jump(prop.advance(x, jt[j] - now), int(js[j]))
                now = jt[j]
                j += 1
            x = prop.advance(x, t - now)
            now = t
            out.append(observe(x))
        return np.array(out)

    def observe_all(
        self,
        vec: np.ndarray,
        times: Sequence[float],
        trajectories: int,
        observe: Callable[[Any], np.ndarray],
        workers: int = 1,
    ) -> np.ndarray:
        """Array ``[trajectory, time, ...]`` of observations; order independent of ``workers``."""
        if self.gamma == 0:
            trajectories = 1
        job = lambda i: self.run(vec, times, i, observe)  # noqa: E731
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                return np.array(list(pool.map(job, range(trajectories))))
        return np.array([job(i) for i in range(trajectories)])


def evolve_local_dephasing(
    state: PureState,
    t: float,
    gamma: float,
    spec: EvolutionSpec,
    propagator: Propagator,
) -> TrajectoryEnsemble:
    """Equal-weight ensemble of trajectory states at time ``t``."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    runner = TrajectoryRunner(propagator, gamma, spec.seed)
    count = 1 if gamma == 0 else spec.trajectories
    states = []
    for i in range(count):
        vec = runner.run(state.amplitudes, [t], i, propagator.decode)[0]
        states.append(PureState(state.basis, vec, normalized=state.normalized))
    return TrajectoryEnsemble(states, np.full(count, 1.0 / count))


# ---------------------------------------------------------------------------
# readout
# ---------------------------------------------------------------------------


def apply_readout_error(probabilities: np.ndarray, x: float) -> np.ndarray:
    """Independent flip with probability ``x`` on each of the two outcomes.

    ``probabilities[a, b]`` is the probability of outcome ``(s_a, s_b)`` with
    index 0 for +1 and 1 for -1.
    """
    if not 0 <= x <= 0.5:
        raise ValueError(f"readout error must lie in [0, 1/2], got {x}")
    p = np.asarray(probabilities, dtype=float)
    flip = np.array([[1 - x, x], [x, 1 - x]])
    # (1-x)^2 P(s1,s2) + x(1-x)[P(s1,-s2) + P(-s1,s2)] + x^2 P(-s1,-s2)
    return flip @ p @ flip.T


def correlator(probabilities: np.ndarray) -> float:
    """sum s1 s2 P(s1, s2)."""
    signs = np.array([1.0, -1.0])
    return float(signs @ np.asarray(probabilities) @ signs)
