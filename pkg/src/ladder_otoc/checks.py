"""Fast self-checks of the core identities, run by ``ladder-otoc verify``."""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

from .dynamics import EvolutionSpec, evolve_ideal, evolve_via_R
from .hilbert import PureState
from .model import ChainSpec, LadderSpec, build_protocol_generator, build_R, build_sum_generator, verify_particle_hole
from .otoc import ExactOtoc, ObservablePair, otoc_circuit
from .spectral import ladder_basis
from .tfd import build_phi, build_tfd, chain_spectrum, limiting_fidelity, optimize_beta


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def _particle_hole() -> tuple[bool, str]:
    ok = all(verify_particle_hole(ChainSpec(n)) for n in range(2, 9))
    return ok, "R^dag H R + H^* < 1e-12 for n = 2..8"


def _via_r() -> tuple[bool, str]:
    chain = ChainSpec(4)
    basis = ladder_basis(4)
    rng = np.random.default_rng(1)
    psi = PureState.from_vector(basis, rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim))
    gen = build_protocol_generator(chain, basis)
    a = evolve_ideal(psi, gen, 1.0).amplitudes
    b = evolve_via_R(psi, build_sum_generator(chain, basis), build_R(4, "second", basis), 1.0, gen).amplitudes
    err = float(np.linalg.norm(a - b))
    return err < 1e-9, f"|via_R - ideal| = {err:.1e}"


def _closed_form() -> tuple[bool, str]:
    worst = 0.0
    for lam in (0.25, 1.0, 8.0):
        r = optimize_beta(LadderSpec(ChainSpec(2), lam))
        worst = max(worst, abs(lam * math.sinh(r.beta0) - 1), 1 - r.F)
    return worst < 1e-5, f"n=2 closed form worst deviation {worst:.1e}"


def _limits() -> tuple[bool, str]:
    dev = max(abs(1 - limiting_fidelity(ChainSpec(n), w)) for n in (2, 4, 6) for w in ("strong", "decoupled"))
    return dev < 1e-9, f"limiting fidelities within {dev:.1e} of 1"


def _protocol_identity() -> tuple[bool, str]:
    chain = ChainSpec(4)
    spec = chain_spectrum(chain)
    pair = ObservablePair.parse("Z@3", "X@2", 4)
    exact = ExactOtoc(spec, pair)
    times = np.linspace(0, 3, 31)
    worst, spread = 0.0, 0.0
    for beta in (0.0, 0.5, 1.0, 4.0):
        tfd = build_tfd(spec, beta)
        r = otoc_circuit(tfd.state, pair, EvolutionSpec(), times, chain)
        worst = max(worst, float(np.max(np.abs(r.O_values - exact.series(beta, times)))))
        spread = max(spread, float(np.ptp(r.N_values)))
        phi = otoc_circuit(build_phi(tfd), pair, EvolutionSpec(), times, chain)
        worst = max(worst, float(np.max(np.abs(pair.symmetry_sign * phi.O_values - r.O_values))))
    return worst < 1e-10 and spread < 1e-10, f"|O_tfd - O_th| <= {worst:.1e}, N_tfd spread {spread:.1e}"


def _variants() -> tuple[bool, str]:
    exact = ExactOtoc(chain_spectrum(ChainSpec(4)), ObservablePair.parse("Z@3", "X@2", 4))
    times = np.linspace(0, 3, 31)
    ref = exact.series(0.0, times)
    dev = max(float(np.max(np.abs(exact.series(0.0, times, k) - ref))) for k in ("O1", "O2", "O3"))
    return dev < 1e-10, f"beta = 0 variants agree within {dev:.1e}"


CHECKS: tuple[tuple[str, Callable[[], tuple[bool, str]]], ...] = (
    ("particle-hole identity", _particle_hole),
    ("R-conjugated evolution", _via_r),
    ("n=2 closed form", _closed_form),
    ("limiting fidelities", _limits),
    ("protocol identity", _protocol_identity),
    ("variant convergence", _variants),
)


def run_checks() -> list[CheckResult]:
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed verifier
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail))
    return out
