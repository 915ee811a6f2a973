"""OTOC quantities: exact thermal variants, the two-leg circuit, shots and slopes."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import (
    EvolutionSpec,
    PropagatedState,
    Propagator,
    TrajectoryEnsemble,
    TrajectoryRunner,
    apply_readout_error,
    make_propagator,
    observable_expectation,
)
from .hilbert import (
    PauliString,
    PureState,
    apply,
    embed,
    enumerate_sector,
    pauli_expectation,
    pauli_string_to_operator,
)
from .model import ChainSpec, u0_string
from .spectral import Spectrum
from .tfd import boltzmann_amplitudes

VARIANTS = ("O1", "O2", "O3", "Oth")
RATIO_FLOOR = 1e-9

_OP_RE = re.compile(r"^\s*([XYZI])\s*(?:@\s*(\d+))?\s*$", re.IGNORECASE)


class NoCrossingError(ValueError):
    def __init__(self, minimum: float):
        super().__init__(f"normalized OTOC never crosses 0.5 (minimum reached {minimum:.4f})")
        self.minimum = minimum


def parse_operator(text: str, n: int | None = None) -> PauliString:
    """``'Z@5'`` -> sigma^z on 1-based leg-1 site 5; ``'I'`` -> identity."""
    m = _OP_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse operator spec {text!r}; expected e.g. 'Z@5' or 'I'")
    axis, site = m.group(1).upper(), m.group(2)
    if axis == "I":
        return PauliString()
    if site is None:
        raise ValueError(f"operator spec {text!r} needs a site, e.g. '{axis}@1'")
    site = int(site)
    if site < 1 or (n is not None and site > n):
        raise ValueError(f"site {site} in {text!r} is outside leg 1 (1..{n})")
    return PauliString.single(axis, site - 1)


@dataclass(frozen=True)
class ObservablePair:
    """Butterfly ``W`` and probe ``V`` on leg 1 of an ``n``-site ladder leg."""

    W: PauliString
    V: PauliString
    n: int

    def __post_init__(self) -> None:
        for name, p in (("W", self.W), ("V", self.V)):
            if any(s >= self.n for s in p.sites):
                raise ValueError(f"{name} = {p} is not on leg 1 (sites 0..{self.n - 1})")
        if self.V.is_identity:
            raise ValueError("V must be a non-identity Pauli string")

    @classmethod
    def parse(cls, w: str, v: str, n: int) -> "ObservablePair":
        return cls(parse_operator(w, n), parse_operator(v, n), n)

    @property
    def V_mirror(self) -> PauliString:
        """V^T on leg 2."""
        return self.V.transpose().shifted(self.n)

    @property
    def probe_leg1(self) -> PauliString:
        return self.V.dagger()

    @property
    def measured(self) -> PauliString:
        """V^dag x V^T."""
        return self.probe_leg1 * self.V_mirror

    @property
    def symmetry_sign(self) -> int:
        """Sign picked up by V^dag x V^T under conjugation with U_0 x 1.

        Circuit values on U_0-rotated states (|phi>, |g>) equal this sign times
        the thermal OTOC; it is -1 for V in {X, Z} and +1 for V = Y.
        """
        return -1 if u0_string(self.n).anticommutes_with(self.measured) else 1


# ---------------------------------------------------------------------------
# exact thermal OTOCs
# ---------------------------------------------------------------------------


class ExactOtoc:
    """Dense thermal OTOCs of the n-site chain from its eigendecomposition."""

    def __init__(self, spectrum: Spectrum, pair: ObservablePair):
        if spectrum.basis.sector is not None:
            raise ValueError("exact OTOCs need the full chain spectrum")
        basis = spectrum.basis
        vecs = spectrum.vectors
        to_eig = lambda p: vecs.conj().T @ _dense(p, basis) @ vecs  # noqa: E731
        self.energies = spectrum.energies
        self.W = to_eig(pair.W)
        self.Wd = self.W.conj().T
        self.V = to_eig(pair.V)
        self._de = self.energies[:, None] - self.energies[None, :]

    def _weights(self, beta: float) -> tuple[np.ndarray, float]:
        w = boltzmann_amplitudes(self.energies, beta)  # y^2 up to the shift
        return np.sqrt(w), float(np.sum(w**2))

    def value(self, beta: float, t: float, kind: str = "Oth") -> complex:
        if kind not in VARIANTS:
            raise ValueError(f"unknown OTOC variant {kind!r}")
        y, z = self._weights(beta)
        y2, y4 = y**2, y**4
        vt = self.V * np.exp(1j * self._de * t)
        vdt = vt.conj().T
        W, Wd = self.W, self.Wd
        # diagonal y factors enter as row scalings: diag(y) @ A == y[:, None] * A
        if kind == "Oth":
            a = y2[:, None] * (Wd @ vdt @ W)
            b = y2[:, None] * vt
        elif kind == "O1":
            a = y2[:, None] * (Wd @ vdt)
            b = y2[:, None] * (W @ vt)
        elif kind == "O2":
            a = y4[:, None] * (Wd @ vdt @ W)
            b = vt
        else:
            a = y[:, None] * (Wd @ (y[:, None] * vdt))
            b = y[:, None] * (W @ (y[:, None] * vt))
        return complex(np.sum(a * b.T)) / z

    def normalization(self, beta: float) -> float:
        """N_th = tr(y^2 V^dag y^2 V) / Z, the W = 1 value."""
        y, z = self._weights(beta)
        y2 = y**2
        a = y2[:, None] * self.V.conj().T
        b = y2[:, None] * self.V
        return float(np.sum(a * b.T).real) / z

    def series(self, beta: float, times: Sequence[float], kind: str = "Oth") -> np.ndarray:
        vals = np.array([self.value(beta, t, kind) for t in times])
        if kind in ("Oth", "O3"):
            scale = max(1.0, float(np.max(np.abs(vals.real))))
            if np.max(np.abs(vals.imag)) > 1e-9 * scale:
                raise AssertionError(f"{kind} has an imaginary part {np.max(np.abs(vals.imag)):.2e}")
        return vals.real


def _dense(p: PauliString, basis) -> np.ndarray:
    return pauli_string_to_operator(p, basis).dense()


def otoc_exact(spectrum: Spectrum, pair: ObservablePair, beta: float, t: float, kind: str = "Oth") -> float:
    return float(ExactOtoc(spectrum, pair).series(beta, [t], kind)[0])


# ---------------------------------------------------------------------------
# the two-leg circuit
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BranchRecord:
    """Per-member observations ``obs[member, time, k]`` with k indexing
    (<V^dag on leg 1>, <V^T on leg 2>, <V^dag x V^T>), plus member weights.

    ``decay[time]`` multiplies every traceless expectation (depolarization).
    """

    obs: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    decay: np.ndarray = field(repr=False)

    @property
    def correlator(self) -> np.ndarray:
        return self.decay * (self.weights @ self.obs[:, :, 2])

    @property
    def stderr(self) -> np.ndarray:
        m = len(self.weights)
        if m < 2:
            return np.zeros(self.obs.shape[1])
        return self.decay * self.obs[:, :, 2].std(axis=0, ddof=1) / math.sqrt(m)

    def distributions(self, k: int) -> np.ndarray:
        """Joint outcome probabilities ``[member, a, b]`` at time index ``k``."""
        a, b, c = (self.decay[k] * self.obs[:, k, i] for i in range(3))
        return _joint(a, b, c)


@dataclass(frozen=True, eq=False)
class CircuitResult:
    times: np.ndarray
    O: BranchRecord
    N: BranchRecord

    @property
    def O_values(self) -> np.ndarray:
        return self.O.correlator

    @property
    def N_values(self) -> np.ndarray:
        return self.N.correlator


def _joint(a, b, c) -> np.ndarray:
    s = np.array([1.0, -1.0])
    a, b, c = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (a, b, c))
    p = (
        1.0
        + s[None, :, None] * a[:, None, None]
        + s[None, None, :] * b[:, None, None]
        + (s[:, None] * s[None, :])[None] * c[:, None, None]
    ) / 4.0
    return np.clip(p, 0.0, 1.0)


def joint_distribution(prop: PropagatedState, pair: ObservablePair) -> tuple[np.ndarray, np.ndarray]:
    """Outcome probabilities of the commuting pair (V^dag on leg 1, V^T on leg 2)
    from the projectors (1 +- P)/2, per ensemble member, with member weights."""
    ops = (pair.probe_leg1, pair.V_mirror, pair.measured)
    if isinstance(prop, TrajectoryEnsemble):
        vals = np.array([[pauli_expectation(p, s).real for p in ops] for s in prop.states])
        return _joint(vals[:, 0], vals[:, 1], vals[:, 2]), prop.weights
    vals = [observable_expectation(prop, p).real for p in ops]
    return _joint(*vals), np.ones(1)


def otoc_circuit(
    initial: PureState,
    pair: ObservablePair,
    evo: EvolutionSpec,
    times: Sequence[float],
    chain: ChainSpec,
    method: str = "auto",
    workers: int = 1,
) -> CircuitResult:
    """Run the W x 1 / evolve / measure V^dag x V^T circuit for both branches.

    Returned values are raw circuit expectations, i.e. ``symmetry_sign`` times
    the thermal OTOC when ``initial`` is |phi(beta)>.
    """
    times = np.asarray(times, dtype=float)
    if len(times) == 0 or np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be a non-empty ascending grid starting at t >= 0")
    if initial.basis.num_qubits != 2 * chain.n:
        raise ValueError("initial state must live on the 2n-qubit ladder")
    basis = initial.basis
    if basis.sector is not None and pair.W.num_flips:
        # W moves the state out of its sector: continue in the full space
        basis = enumerate_sector(2 * chain.n)
        initial = embed(initial, basis)

    w_state = apply(pauli_string_to_operator(pair.W, basis), initial)
    propagator = make_propagator(evo, chain, basis, method)
    records = []
    for start in (w_state, initial):
        records.append(_run_branch(start.amplitudes, pair, evo, times, propagator, workers))
    return CircuitResult(times, records[0], records[1])


def _run_branch(
    vec: np.ndarray,
    pair: ObservablePair,
    evo: EvolutionSpec,
    times: np.ndarray,
    propagator: Propagator,
    workers: int,
) -> BranchRecord:
    ops = (pair.probe_leg1, pair.V_mirror, pair.measured)
    decay = np.ones(len(times))
    if evo.kind == "local_dephasing":
        runner = TrajectoryRunner(propagator, evo.gamma, evo.seed)
        obs = runner.observe_all(vec, times, evo.trajectories, lambda x: propagator.expectations(x, ops), workers)
        weights = np.full(obs.shape[0], 1.0 / obs.shape[0])
        return BranchRecord(obs, weights, decay)
    if evo.kind == "depolarization":
        decay = np.exp(-evo.gamma * times)
    gamma = evo.gamma if evo.kind == "collective_dephasing" else 0.0
    out = []
    x = propagator.encode(vec)
    now = 0.0
    for t in times:
        x = propagator.advance(x, t - now)
        now = t
        out.append(propagator.expectations(x, ops, gamma * t))
    return BranchRecord(np.array(out)[None], np.ones(1), decay)


# ---------------------------------------------------------------------------
# shots, ratio, bound, slope
# ---------------------------------------------------------------------------

_OUTCOME_PRODUCT = np.array([1.0, -1.0, -1.0, 1.0])  # s1*s2 for (++, +-, -+, --)


def sample_distributions(
    dists: np.ndarray,
    weights: np.ndarray,
    shots: int,
    x_readout: float,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Draw ``shots`` outcomes: an ensemble member per shot, then a readout-corrupted
    outcome of that member. Returns the sample mean of s1*s2 and its standard error."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    dists = np.asarray(dists, dtype=float)
    if dists.ndim == 2:
        dists = dists[None]
    if len(weights) == 1:
        per_member = np.array([shots])
    else:
        per_member = rng.multinomial(shots, weights)
    counts = np.zeros(4, dtype=np.int64)
    for p, k in zip(dists, per_member):
        if k == 0:
            continue
        q = apply_readout_error(p, x_readout).ravel()
        counts += rng.multinomial(k, q / q.sum())
    mean = float(counts @ _OUTCOME_PRODUCT) / shots
    sigma = math.sqrt(max(0.0, 1.0 - mean**2) / shots)
    return mean, sigma


def sample_shots(
    state_after: PropagatedState,
    pair: ObservablePair,
    shots: int,
    x_readout: float = 0.0,
    seed: int | Sequence[int] = 0,
) -> tuple[float, float]:
    dists, weights = joint_distribution(state_after, pair)
    return sample_distributions(dists, weights, shots, x_readout, np.random.default_rng(seed))


def readout_expectation(value: float, x: float) -> float:
    """Expectation-level effect of readout errors on a two-outcome correlator."""
    return (1.0 - 2.0 * x) ** 2 * value


def correct(
    O: np.ndarray,
    N: np.ndarray,
    sigma_O: np.ndarray | None = None,
    sigma_N: np.ndarray | None = None,
    method: str = "linear",
    rng: np.random.Generator | None = None,
    samples: int = 4000,
) -> tuple[np.ndarray, np.ndarray]:
    """O_corr = O / N with a 1-sigma band; NaN where |N| < 1e-9.

    ``linear`` propagates first-order errors of independent branches,
    ``resample`` draws Gaussian replicas of both branches.
    """
    O, N = np.asarray(O, dtype=float), np.asarray(N, dtype=float)
    if O.shape != N.shape:
        raise ValueError("O and N series must share the time grid")
    sigma_O = np.zeros_like(O) if sigma_O is None else np.asarray(sigma_O, dtype=float)
    sigma_N = np.zeros_like(N) if sigma_N is None else np.asarray(sigma_N, dtype=float)
    ok = np.abs(N) >= RATIO_FLOOR
    safe_N = np.where(ok, N, np.nan)
    ratio = O / safe_N
    if method == "linear":
        sigma = np.sqrt((sigma_O / safe_N) ** 2 + (O * sigma_N / safe_N**2) ** 2)
    elif method == "resample":
        rng = np.random.default_rng(0) if rng is None else rng
        o = O + sigma_O * rng.standard_normal((samples,) + O.shape)
        nn = safe_N + sigma_N * rng.standard_normal((samples,) + N.shape)
        sigma = np.std(o / nn, axis=0, ddof=1)
    else:
        raise ValueError(f"unknown error propagation method {method!r}")
    return ratio, np.where(ok, sigma, np.nan)


def error_bound(pair: ObservablePair, F: float) -> float:
    """2 ||V||^2 sqrt(1 - F); Pauli strings have unit spectral norm."""
    if not -1e-12 <= F <= 1 + 1e-12:
        raise ValueError(f"fidelity must lie in [0, 1], got {F}")
    norm_v = 1.0
    return 2.0 * norm_v**2 * math.sqrt(max(0.0, 1.0 - F))


def extract_kappa(times: Sequence[float], values: Sequence[float], level: float = 0.5) -> float:
    """|slope| of a 5-point least-squares line centred on the first downward crossing of ``level``."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    below = np.flatnonzero((y[:-1] >= level) & (y[1:] < level))
    if len(below) == 0:
        raise NoCrossingError(float(np.nanmin(y)))
    i = int(below[0])
    t_cross = t[i] + (y[i] - level) * (t[i + 1] - t[i]) / (y[i] - y[i + 1])
    centre = i if abs(t[i] - t_cross) <= abs(t[i + 1] - t_cross) else i + 1
    lo = min(max(centre - 2, 0), len(t) - 5)
    sel = slice(lo, lo + 5)
    slope = np.polyfit(t[sel], y[sel], 1)[0]
    return float(abs(slope))
