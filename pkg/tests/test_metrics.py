import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from novaq.circuits import initial_states, u_gate, u_matrix
from novaq.metrics import (
    MetricTriple,
    entanglement_score,
    entanglement_scores,
    magnitude_score,
    metric_array,
    metric_triple,
    phase_score,
    reduced_purities,
)
from novaq.statevector import StateVector, apply_gate
from oracles import ghz, haar_state, partial_trace_single, product_state


def sv(amps):
    return StateVector.from_amplitudes(amps)


def zero(n):
    v = np.zeros(2**n, dtype=complex)
    v[0] = 1
    return sv(v)


def uniform(n):
    return sv(np.full(2**n, 2 ** (-n / 2), dtype=complex))


BELL = sv(ghz(2))


def test_magnitude_point_mass():
    assert magnitude_score(zero(3)) == 0


@pytest.mark.parametrize("n", [1, 4, 9])
def test_magnitude_uniform(n):
    assert abs(magnitude_score(uniform(n)) - 1) < 1e-12


def test_magnitude_bell():
    assert abs(magnitude_score(BELL) - 0.5) < 1e-12


def test_phase_basis_state():
    v = np.zeros(8, dtype=complex)
    v[5] = np.exp(0.4j)
    assert phase_score(sv(v)) == pytest.approx(0, abs=1e-15)


def test_phase_minus_state():
    assert abs(phase_score(sv([1 / math.sqrt(2), -1 / math.sqrt(2)])) - 1) < 1e-12


def test_phase_ignores_negligible_amplitudes():
    v = np.array([1, 1e-8j], dtype=complex)
    assert phase_score(sv(v / np.linalg.norm(v))) < 1e-12


@pytest.mark.parametrize("n", [2, 3, 5])
def test_product_states_unentangled(n):
    rng = np.random.default_rng(n)
    singles = [u_matrix(*rng.uniform(-7, 7, 3))[:, 0] for _ in range(n)]
    assert entanglement_score(sv(product_state(singles))) < 1e-10


def test_basis_product_state():
    v = np.zeros(16, dtype=complex)
    v[0b0101] = 1
    assert entanglement_score(sv(v)) < 1e-10


def test_bell_fully_entangled():
    assert abs(entanglement_score(BELL) - 1) < 1e-10


@pytest.mark.parametrize("n", range(3, 13))
def test_ghz_fully_entangled(n):
    assert abs(entanglement_score(sv(ghz(n))) - 1) < 1e-10


def test_single_qubit_entanglement_zero():
    assert entanglement_score(sv([0.6, 0.8])) == 0


def test_triples():
    assert metric_triple(zero(4)) == MetricTriple(0, 0, 0)
    t = metric_triple(uniform(5))
    assert np.allclose(t, (1, 0, 0), atol=1e-10)
    t = metric_triple(sv(ghz(3)))
    assert np.allclose(t, (1 / 3, 0, 1), atol=1e-10)


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_reduced_purity_matches_partial_trace(n):
    rng = np.random.default_rng(10 + n)
    for _ in range(5):
        psi = haar_state(n, rng)
        fast = reduced_purities(psi)[0]
        for k in range(n):
            rho = partial_trace_single(psi, n, k)
            assert abs(fast[k] - np.real(np.trace(rho @ rho))) < 1e-12


def test_scores_bounded_on_random_generator_states():
    rng = np.random.default_rng(0)
    for n in (2, 3, 5, 8):
        params = rng.normal(rng.uniform(-15, 15, (25_000, 1)), np.sqrt(rng.uniform(0.1, 30, (25_000, 1))),
                            size=(25_000, 3 * n))
        m = metric_array(initial_states(params))
        assert np.all((m >= 0) & (m <= 1))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.floats(-10, 10))
def test_global_phase_invariance(n, seed, chi):
    psi = haar_state(n, np.random.default_rng(seed))
    a = metric_array(psi)
    b = metric_array(np.exp(1j * chi) * psi)
    assert np.max(np.abs(a - b)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_local_unitaries_keep_product_unentangled(n, seed):
    rng = np.random.default_rng(seed)
    singles = [u_matrix(*rng.uniform(-7, 7, 3))[:, 0] for _ in range(n)]
    state = sv(product_state(singles))
    for q in range(n):
        state = apply_gate(state, u_gate(rng.uniform(-7, 7, 3), q))
    assert entanglement_scores(state)[0] < 1e-10
