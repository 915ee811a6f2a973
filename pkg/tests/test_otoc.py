import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ladder_otoc.dynamics import EvolutionSpec
from ladder_otoc.hilbert import PauliString, PureState, enumerate_sector
from ladder_otoc.model import ChainSpec, LadderSpec, build_U0
from ladder_otoc.otoc import (
    VARIANTS,
    ExactOtoc,
    NoCrossingError,
    ObservablePair,
    correct,
    error_bound,
    extract_kappa,
    otoc_circuit,
    otoc_exact,
    parse_operator,
    readout_expectation,
    sample_distributions,
    sample_shots,
)
from ladder_otoc.spectral import ladder_basis, parent_ground_state, rung_singlet_state
from ladder_otoc.tfd import build_phi, build_tfd, chain_spectrum

import oracles

TIMES = np.round(np.arange(0.0, 3.0 + 1e-9, 0.1), 12)


@pytest.fixture(scope="module")
def spec4():
    return chain_spectrum(ChainSpec(4))


# --- operator specs ------------------------------------------------------------


def test_parse_operator():
    assert parse_operator("Z@5") == PauliString.single("Z", 4)
    assert parse_operator(" x @ 2 ", 4) == PauliString.single("X", 1)
    assert parse_operator("I").is_identity
    for bad in ("Q@1", "Z", "Z@0", "Z@-1", "Z@1@2"):
        with pytest.raises(ValueError):
            parse_operator(bad)
    with pytest.raises(ValueError):
        parse_operator("Z@5", 4)


@pytest.mark.parametrize("axis, phase, sign", [("X", 1, -1), ("Y", -1, 1), ("Z", 1, -1)])
def test_pair_mirror_and_symmetry_sign(axis, phase, sign):
    pair = ObservablePair.parse("Z@3", f"{axis}@2", 4)
    assert pair.V_mirror == PauliString(((5, axis),), phase)
    assert pair.symmetry_sign == sign


def test_pair_validation():
    with pytest.raises(ValueError):
        ObservablePair.parse("Z@1", "I", 4)
    with pytest.raises(ValueError):
        ObservablePair(PauliString.single("Z", 5), PauliString.single("X", 0), 4)


# --- exact thermal OTOCs -------------------------------------------------------


@pytest.mark.parametrize("w, v", [("Z@3", "X@2"), ("X@1", "Y@4"), ("Y@2", "Z@3"), ("I", "X@2")])
@pytest.mark.parametrize("kind", VARIANTS)
def test_exact_matches_dense_oracle(spec4, w, v, kind):
    pair = ObservablePair.parse(w, v, 4)
    exact = ExactOtoc(spec4, pair)
    h = oracles.chain(4)
    wm = oracles.pauli(4, dict(pair.W.factors))
    vm = oracles.pauli(4, dict(pair.V.factors))
    for beta in (0.0, 0.7, 3.0):
        for t in (0.0, 0.4, 1.3):
            ref = oracles.thermal_otoc(h, wm, vm, beta, t, kind)
            assert exact.value(beta, t, kind) == pytest.approx(ref, abs=1e-11)


def test_exact_at_zero_time_and_normalization(spec4):
    pair = ObservablePair.parse("Z@3", "X@2", 4)
    exact = ExactOtoc(spec4, pair)
    series = exact.series(1.0, [0.0, 0.5])
    h = oracles.chain(4)
    vm = oracles.pauli(4, {1: "X"})
    n_ref = oracles.thermal_otoc(h, np.eye(16), vm, 1.0, 0.0).real
    assert exact.normalization(1.0) == pytest.approx(n_ref, abs=1e-12)
    assert series[0] == pytest.approx(oracles.thermal_otoc(h, oracles.pauli(4, {2: "Z"}), vm, 1.0, 0.0).real)
    assert otoc_exact(spec4, pair, 1.0, 0.5) == pytest.approx(series[1])


def test_variants_coincide_at_infinite_temperature(spec4):
    exact = ExactOtoc(spec4, ObservablePair.parse("Z@3", "X@2", 4))
    ref = exact.series(0.0, [0.0, 0.5, 1.0])
    for kind in ("O1", "O2", "O3"):
        np.testing.assert_allclose(exact.series(0.0, [0.0, 0.5, 1.0], kind), ref, atol=1e-10)


def test_unknown_variant(spec4):
    with pytest.raises(ValueError):
        ExactOtoc(spec4, ObservablePair.parse("Z@3", "X@2", 4)).value(1.0, 0.0, "O4")


def test_sector_spectrum_rejected():
    from ladder_otoc.model import build_chain_hamiltonian
    from ladder_otoc.spectral import full_spectrum

    spec = full_spectrum(build_chain_hamiltonian(ChainSpec(4), enumerate_sector(4, 0)))
    with pytest.raises(ValueError):
        ExactOtoc(spec, ObservablePair.parse("Z@3", "X@2", 4))


def test_onset_delay_grows_with_separation():
    n = 8
    spec = chain_spectrum(ChainSpec(n))
    times = np.round(np.arange(0.0, 3.0 + 1e-9, 0.02), 12)
    onsets = []
    for v in ("X@4", "X@2", "X@1"):  # W = Z@5 at separations 1, 3, 4
        vals = ExactOtoc(spec, ObservablePair.parse("Z@5", v, n)).series(0.0, times)
        norm = vals / vals[0]
        onsets.append(times[np.argmax(norm < 0.99)])
    assert onsets == sorted(onsets)
    assert onsets[0] < onsets[-1]


# --- circuit -------------------------------------------------------------------


@pytest.mark.parametrize("beta", [0.0, 0.5, 1.0, 4.0])
def test_circuit_on_tfd_reproduces_thermal_otoc(spec4, beta):
    chain = ChainSpec(4)
    pair = ObservablePair.parse("Z@3", "X@2", 4)
    exact = ExactOtoc(spec4, pair)
    tfd = build_tfd(spec4, beta)
    res = otoc_circuit(tfd.state, pair, EvolutionSpec(), TIMES, chain)
    np.testing.assert_allclose(res.O_values, exact.series(beta, TIMES), atol=1e-10)
    assert np.ptp(res.N_values) < 1e-10
    assert res.N_values[0] == pytest.approx(exact.normalization(beta), abs=1e-10)


@pytest.mark.parametrize("w, v", [("Z@3", "X@2"), ("X@1", "Z@4"), ("Y@2", "Y@3"), ("X@4", "Y@1")])
@pytest.mark.parametrize("method", ["auto", "krylov"])
def test_circuit_on_phi_carries_symmetry_sign(spec4, w, v, method):
    chain = ChainSpec(4)
    pair = ObservablePair.parse(w, v, 4)
    tfd = build_tfd(spec4, 1.0)
    times = TIMES[::5]
    ref = otoc_circuit(tfd.state, pair, EvolutionSpec(), times, chain, method)
    phi = otoc_circuit(build_phi(tfd), pair, EvolutionSpec(), times, chain, method)
    np.testing.assert_allclose(phi.O_values, pair.symmetry_sign * ref.O_values, atol=1e-10)
    np.testing.assert_allclose(phi.N_values, pair.symmetry_sign * ref.N_values, atol=1e-10)
    np.testing.assert_allclose(pair.symmetry_sign * phi.O_values, ExactOtoc(spec4, pair).series(1.0, times), atol=1e-10)


def test_u0_insertion_on_tfd_matches_phi(spec4):
    chain = ChainSpec(4)
    pair = ObservablePair.parse("Z@3", "X@2", 4)
    tfd = build_tfd(spec4, 0.5)
    basis = enumerate_sector(8)
    rotated = PureState(basis, build_U0(4, basis).matrix @ tfd.state.amplitudes)
    a = otoc_circuit(rotated, pair, EvolutionSpec(), TIMES, chain)
    b = otoc_circuit(build_phi(tfd), pair, EvolutionSpec(), TIMES, chain)
    np.testing.assert_allclose(a.O_values, b.O_values, atol=1e-12)


def test_via_R_circuit_matches_direct(spec4):
    chain = ChainSpec(4)
    pair = ObservablePair.parse("Z@3", "X@2", 4)
    phi = build_phi(build_tfd(spec4, 1.0))
    a = otoc_circuit(phi, pair, EvolutionSpec(), TIMES, chain)
    b = otoc_circuit(phi, pair, EvolutionSpec("ideal_via_R"), TIMES, chain)
    np.testing.assert_allclose(a.O_values, b.O_values, atol=1e-9)


def test_rung_singlets_reproduce_infinite_temperature(spec4):
    chain = ChainSpec(4)
    pair = ObservablePair.parse("Z@3", "X@2", 4)
    g = rung_singlet_state(4, ladder_basis(4))
    res = otoc_circuit(g, pair, EvolutionSpec(), TIMES, chain)
    O = pair.symmetry_sign * res.O_values
    N = pair.symmetry_sign * res.N_values
    th = ExactOtoc(spec4, pair).series(0.0, TIMES)
    np.testing.assert_allclose(O / O[0], th / th[0], atol=1e-12)
    np.testing.assert_allclose(correct(O, N)[0], th / th[0], atol=1e-12)


def test_circuit_rejects_bad_grids(spec4):
    chain = ChainSpec(4)
    pair = ObservablePair.parse("Z@3", "X@2", 4)
    phi = build_phi(build_tfd(spec4, 1.0))
    for times in ([], [1.0, 0.5], [-0.1, 0.0]):
        with pytest.raises(ValueError):
            otoc_circuit(phi, pair, EvolutionSpec(), times, chain)


def test_depolarization_cancels_in_ratio(spec4):
    chain = ChainSpec(4)
    pair = ObservablePair.parse("Z@3", "X@2", 4)
    g = parent_ground_state(LadderSpec(chain, 1.0)).state
    clean = otoc_circuit(g, pair, EvolutionSpec(), TIMES, chain)
    noisy = otoc_circuit(g, pair, EvolutionSpec("depolarization", gamma=1.0), TIMES, chain)
    np.testing.assert_allclose(noisy.O_values, np.exp(-TIMES) * clean.O_values, atol=1e-14)
    np.testing.assert_allclose(noisy.N_values, np.exp(-TIMES) * clean.N_values, atol=1e-14)
    np.testing.assert_allclose(correct(noisy.O_values, noisy.N_values)[0],
                               correct(clean.O_values, clean.N_values)[0], atol=1e-12)


def test_collective_dephasing_robustness(spec4):
    chain = ChainSpec(4)
    g = parent_ground_state(LadderSpec(chain, 1.0)).state
    evo = EvolutionSpec("collective_dephasing", gamma=1.0)
    # W = Z keeps the S^z = 0 sector: both branches are untouched
    pair = ObservablePair.parse("Z@3", "X@2", 4)
    clean = otoc_circuit(g, pair, EvolutionSpec(), TIMES, chain)
    noisy = otoc_circuit(g, pair, evo, TIMES, chain)
    np.testing.assert_allclose(noisy.O_values, clean.O_values, atol=1e-12)
    np.testing.assert_allclose(noisy.N_values, clean.N_values, atol=1e-12)
    # W = X splits the state over sectors +-2, whose coherence is damped
    pair = ObservablePair.parse("X@3", "X@2", 4)
    clean = otoc_circuit(g, pair, EvolutionSpec(), TIMES, chain)
    noisy = otoc_circuit(g, pair, evo, TIMES, chain)
    np.testing.assert_allclose(noisy.N_values, clean.N_values, atol=1e-12)
    assert np.max(np.abs(noisy.O_values - clean.O_values)) > 1e-3


def test_local_dephasing_is_deterministic_across_workers(spec4):
    chain = ChainSpec(4)
    pair = ObservablePair.parse("Z@3", "X@2", 4)
    g = parent_ground_state(LadderSpec(chain, 1.0)).state
    evo = EvolutionSpec("local_dephasing", gamma=0.25, trajectories=8, seed=3)
    a = otoc_circuit(g, pair, evo, TIMES, chain, workers=1)
    b = otoc_circuit(g, pair, evo, TIMES, chain, workers=3)
    np.testing.assert_array_equal(a.O.obs, b.O.obs)
    assert a.O.obs.shape == (8, len(TIMES), 3)
    assert np.all(a.O.stderr >= 0)


# --- sampling ------------------------------------------------------------------


def _ground_record():
    chain = ChainSpec(4)
    pair = ObservablePair.parse("Z@3", "X@2", 4)
    g = parent_ground_state(LadderSpec(chain, 1.0)).state
    return pair, otoc_circuit(g, pair, EvolutionSpec(), [0.8], chain)


def test_shots_converge_to_expectation():
    pair, res = _ground_record()
    exact = res.O.correlator[0]
    mean, sigma = sample_distributions(res.O.distributions(0), res.O.weights, 10**6, 0.0, np.random.default_rng(1))
    assert abs(mean - exact) < 5 * sigma


def test_deterministic_outcome_has_zero_sigma():
    pair = ObservablePair.parse("I", "Z@1", 3)
    g = rung_singlet_state(3, ladder_basis(3))
    mean, sigma = sample_shots(g, pair, 500, seed=0)
    assert mean == -1.0 and sigma == 0.0


def test_readout_bias_is_quadratic():
    pair, res = _ground_record()
    ideal = res.O.correlator[0]
    means = []
    for seed in range(40):
        m, _ = sample_distributions(res.O.distributions(0), res.O.weights, 2000, 0.1, np.random.default_rng(seed))
        means.append(m)
    se = np.std(means, ddof=1) / math.sqrt(len(means))
    assert abs(np.mean(means) - 0.64 * ideal) < 3 * se
    assert readout_expectation(ideal, 0.1) == pytest.approx(0.64 * ideal)


def test_shot_noise_scales_inverse_sqrt():
    _, res = _ground_record()
    sig = {s: sample_distributions(res.O.distributions(0), res.O.weights, s, 0.0, np.random.default_rng(2))[1]
           for s in (10**3, 10**4, 10**5)}
    assert sig[10**3] / sig[10**4] == pytest.approx(math.sqrt(10), rel=0.1)
    assert sig[10**4] / sig[10**5] == pytest.approx(math.sqrt(10), rel=0.1)


def test_ensemble_sampling_draws_members():
    dists = np.array([[[1.0, 0], [0, 0]], [[0, 0], [0, 1.0]]])  # both give s1 s2 = +1
    mean, _ = sample_distributions(dists, np.array([0.5, 0.5]), 100, 0.0, np.random.default_rng(0))
    assert mean == 1.0
    with pytest.raises(ValueError):
        sample_distributions(dists, np.array([0.5, 0.5]), 0, 0.0, np.random.default_rng(0))


# --- ratio, bound, slope ---------------------------------------------------------


def test_correct_ratio_and_linear_sigma():
    O, N = np.array([0.5, 0.2, 0.3]), np.array([0.9, 1e-12, 0.6])
    sO, sN = np.array([0.01, 0.01, 0.02]), np.array([0.02, 0.01, 0.01])
    ratio, sigma = correct(O, N, sO, sN)
    assert ratio[0] == pytest.approx(0.5 / 0.9)
    assert math.isnan(ratio[1]) and math.isnan(sigma[1])
    assert sigma[2] == pytest.approx(math.hypot(0.02 / 0.6, 0.3 * 0.01 / 0.36))
    with pytest.raises(ValueError):
        correct(O, N[:2])
    with pytest.raises(ValueError):
        correct(O, N, method="bootstrap")


def test_resampled_sigma_agrees_with_linear_for_small_errors():
    O, N = np.array([0.5]), np.array([0.8])
    sO, sN = np.array([0.005]), np.array([0.005])
    lin = correct(O, N, sO, sN)[1][0]
    res = correct(O, N, sO, sN, method="resample", rng=np.random.default_rng(0), samples=20000)[1][0]
    assert res == pytest.approx(lin, rel=0.05)


def test_error_bound_values():
    pair = ObservablePair.parse("Z@5", "X@4", 8)
    assert error_bound(pair, 1.0) == 0.0
    assert error_bound(pair, 0.88) == pytest.approx(2 * math.sqrt(0.12))
    assert error_bound(pair, 0.88) == pytest.approx(0.6928, abs=1e-4)
    with pytest.raises(ValueError):
        error_bound(pair, 1.5)


@given(st.floats(0.25, 2.0))
def test_kappa_of_exponential(a):
    # the window centre can sit half a step off the crossing, a bias of about a * 0.01
    t = np.round(np.arange(0, 6 / a + 0.1, 0.02), 12)
    assert extract_kappa(t, np.exp(-a * t)) == pytest.approx(a / 2, rel=0.02)


def test_kappa_without_crossing():
    t = np.linspace(0, 1, 11)
    with pytest.raises(NoCrossingError) as info:
        extract_kappa(t, 1 - 0.1 * t)
    assert info.value.minimum == pytest.approx(0.9)
