"""Thermofield-double states, the U_0-rotated target and fidelity maximization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .hilbert import BasisMismatchError, PureState, SectorBasis, enumerate_sector, from_leg_matrix, to_leg_matrix
from .model import ChainSpec, LadderSpec, build_chain_hamiltonian, u0_matrix
from .spectral import GroundResult, Spectrum, full_spectrum, ladder_basis, parent_ground_state

DEGENERACY_TOL = 1e-10
BETA_GRID = (1e-3, 1e3, 60)
BETA_RTOL = 1e-6
MULTIMODAL_TOL = 1e-9


class IncompleteSpectrumError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TfdResult:
    """|tfd(beta)> on 2n qubits.

    ``Z`` is the partition function with the ground energy subtracted,
    ``sum_E exp(-beta (E - E_0))``; ``log_Z`` is the unshifted logarithm.
    ``leg_matrix`` holds amplitudes as ``M[leg-1 bits, leg-2 bits]``.
    """

    beta: float
    Z: float
    log_Z: float
    state: PureState
    leg_matrix: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.leg_matrix.shape[0].bit_length() - 1


def boltzmann_amplitudes(energies: np.ndarray, beta: float) -> np.ndarray:
    """exp(-beta (E - E_0) / 2), with beta = inf keeping the ground manifold."""
    shifted = energies - energies.min()
    if math.isinf(beta):
        return (shifted < DEGENERACY_TOL).astype(float)
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    return np.exp(-0.5 * beta * shifted)


def _check_complete(spectrum: Spectrum) -> int:
    basis = spectrum.basis
    if basis.sector is not None or len(spectrum) != 2**basis.num_qubits:
        raise IncompleteSpectrumError("the thermofield double needs the complete chain spectrum")
    return basis.num_qubits


def tfd_leg_matrix(spectrum: Spectrum, beta: float) -> tuple[np.ndarray, float]:
    """``sum_E w_E |E><E^*|^T`` normalized, plus the shifted partition function."""
    _check_complete(spectrum)
    w = boltzmann_amplitudes(spectrum.energies, beta)
    vecs = spectrum.vectors
    # |E^*> is the elementwise conjugate; M[i1, i2] = sum_E w_E E[i1] conj(E)[i2]
    m = (vecs * w) @ np.conj(vecs).T
    z = float(np.sum(w**2))
    return m / math.sqrt(z), z


def build_tfd(spectrum: Spectrum, beta: float, basis: SectorBasis | None = None) -> TfdResult:
    n = _check_complete(spectrum)
    m, z = tfd_leg_matrix(spectrum, beta)
    basis = enumerate_sector(2 * n) if basis is None else basis
    state = _leg_state(m, basis, n)
    e0 = float(spectrum.energies.min())
    # the unshifted log Z diverges at beta = inf
    log_z = math.log(z) - beta * e0 if math.isfinite(beta) else math.nan
    return TfdResult(float(beta), z, float(log_z), state, m)


def _leg_state(m: np.ndarray, basis: SectorBasis, n: int) -> PureState:
    if basis.num_qubits != 2 * n:
        raise BasisMismatchError(f"basis has {basis.num_qubits} qubits, expected {2 * n}")
    s = from_leg_matrix(m, basis, n, normalized=False)
    if abs(s.norm() - 1.0) > 1e-10:
        raise BasisMismatchError("target basis does not contain the state (norm lost on projection)")
    return PureState.from_vector(basis, s.amplitudes)


def build_phi(tfd: TfdResult, u0: np.ndarray | None = None, basis: SectorBasis | None = None) -> PureState:
    """(U_0 x 1)|tfd>; lands in the S^z = 0 sector, which is the default basis.

    ``u0`` is the single-leg ``2^n x 2^n`` matrix (product of sigma^y by default).
    """
    n = tfd.n
    u0 = u0_matrix(n) if u0 is None else np.asarray(u0)
    basis = ladder_basis(n) if basis is None else basis
    return _leg_state(u0 @ tfd.leg_matrix, basis, n)


def fidelity(g: PureState, phi: PureState) -> float:
    return abs(g.overlap(phi)) ** 2


class FidelityLandscape:
    """F(beta) = |<g|phi(beta)>|^2 for a fixed ground state, cheap to evaluate.

    Expanding phi over chain eigenstates, ``<g|phi(beta)> = sum_E c_E w_E / sqrt(Z)``
    with ``c_E = <g| (U_0|E>) x |E^*>``; within a degenerate level the sum of
    ``c_E`` does not depend on the eigenbasis chosen.
    """

    def __init__(self, spectrum: Spectrum, g: PureState):
        n = _check_complete(spectrum)
        gm = to_leg_matrix(g, n)
        a = u0_matrix(n) @ spectrum.vectors
        b = np.conj(spectrum.vectors)
        self.energies = spectrum.energies
        self.coefficients = np.sum(a * (np.conj(gm) @ b), axis=0)

    def __call__(self, beta: float) -> float:
        w = boltzmann_amplitudes(self.energies, beta)
        return float(abs(np.dot(self.coefficients, w)) ** 2 / np.sum(w**2))


@dataclass(frozen=True)
class FidelityResult:
    lam: float
    beta0: float
    T0: float
    F: float
    scan: list[tuple[float, float]] = field(repr=False)
    flagged: bool = False
    maxima: list[tuple[float, float]] = field(default_factory=list)
    gap: float = math.nan


def golden_maximize(f, a: float, b: float, tol: float) -> float:
    """Golden-section search for a maximum of ``f`` on ``[a, b]`` to width ``tol``."""
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _peaks(values: np.ndarray) -> list[int]:
    """Local maxima whose prominence against every higher peak exceeds MULTIMODAL_TOL."""
    idx = []
    m = len(values)
    for i in range(m):
        left = values[i - 1] if i > 0 else -np.inf
        right = values[i + 1] if i < m - 1 else -np.inf
        if values[i] > left and values[i] >= right:
            idx.append(i)
    best = max(idx, key=lambda i: values[i])
    keep = [best]
    for i in idx:
        if i == best:
            continue
        lo, hi = sorted((i, best))
        dip = values[lo : hi + 1].min()
        if values[i] - dip > MULTIMODAL_TOL:
            keep.append(i)
    return sorted(keep)


def maximize_fidelity(
    landscape: FidelityLandscape,
    lam: float,
    grid: tuple[float, float, int] = BETA_GRID,
    rtol: float = BETA_RTOL,
) -> FidelityResult:
    lo, hi, num = grid
    betas = np.geomspace(lo, hi, num)
    values = np.array([landscape(b) for b in betas])
    scan = list(zip(betas.tolist(), values.tolist()))
    log_f = lambda x: landscape(math.exp(x))  # noqa: E731
    maxima = []
    for i in _peaks(values):
        a = math.log(betas[max(i - 1, 0)])
        b = math.log(betas[min(i + 1, num - 1)])
        x = golden_maximize(log_f, a, b, rtol)
        maxima.append((math.exp(x), log_f(x)))
    beta0, f0 = max(maxima, key=lambda bf: bf[1])
    return FidelityResult(
        lam=lam,
        beta0=beta0,
        T0=1.0 / beta0,
        F=f0,
        scan=scan,
        flagged=len(maxima) > 1,
        maxima=maxima,
    )


def chain_spectrum(chain: ChainSpec) -> Spectrum:
    return full_spectrum(build_chain_hamiltonian(chain, enumerate_sector(chain.n)))


def optimize_beta(
    spec: LadderSpec,
    spectrum: Spectrum | None = None,
    ground: GroundResult | None = None,
) -> FidelityResult:
    """beta_0(lambda) maximizing F on a log grid, refined by golden section."""
    if spec.infinite or spec.lam == 0:
        raise ValueError("optimize_beta needs 0 < lambda < inf; the limits are exact")
    spectrum = chain_spectrum(spec.chain) if spectrum is None else spectrum
    ground = parent_ground_state(spec) if ground is None else ground
    res = maximize_fidelity(FidelityLandscape(spectrum, ground.state), spec.lam)
    return FidelityResult(**{**res.__dict__, "gap": ground.gap})


def limiting_fidelity(chain: ChainSpec, which: str, spectrum: Spectrum | None = None) -> float:
    """F(0, inf) for ``which='strong'`` or F(inf, 0) for ``which='decoupled'``."""
    spectrum = chain_spectrum(chain) if spectrum is None else spectrum
    if which == "strong":
        g = parent_ground_state(LadderSpec(chain, math.inf)).state
        beta = 0.0
    elif which == "decoupled":
        g = parent_ground_state(LadderSpec(chain, 0.0)).state
        beta = math.inf
    else:
        raise ValueError(f"unknown limit {which!r}")
    return fidelity(g, build_phi(build_tfd(spectrum, beta)))


class Extrapolation(NamedTuple):
    slope: float
    intercept: float
    T0_infinity: float
    slope_se: float
    intercept_se: float


def extrapolate_T0(points: Sequence[tuple[int, float]]) -> Extrapolation:
    """Least-squares line T0 = slope / n + intercept; T0(n -> inf) is the intercept."""
    ns = {int(n) for n, _ in points}
    if len(ns) < 3:
        raise ValueError("need at least three distinct system sizes")
    x = np.array([1.0 / n for n, _ in points])
    y = np.array([t for _, t in points], dtype=float)
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    dof = len(y) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(a.T @ a)
    slope, intercept = (float(c) for c in coef)
    return Extrapolation(slope, intercept, intercept, math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1]))
