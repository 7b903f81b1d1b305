import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from novaq.circuits import BenchmarkProgram, get_benchmark, grover, h, initial_states, phase_estimation, z
from novaq.errors import ConfigurationError
from novaq.faults import (
    DetectionConfig,
    chi_square_pvalue,
    detect_bug,
    detection_flags,
    detection_rate,
    fault_pool,
    inject_fault,
    is_functional_change,
    output_probabilities,
    probe_states,
    replace_gate,
)
from novaq.statevector import Circuit, basis_state, run_batch
from oracles import haar_state

EXACT = DetectionConfig(mode="exact")


def program(gates, n=1, name="toy"):
    return BenchmarkProgram(name, Circuit(n, gates))


def identical_mutant(prog):
    """A FaultyProgram whose replacement reproduces the original gate."""
    label = prog.circuit.gates[0].label
    return replace_gate(prog, 0, label)


H_PROG = program([h(0)])


def test_injection_changes_exactly_one_gate():
    prog = get_benchmark("Grover-05")
    rng = np.random.default_rng(0)
    for _ in range(50):
        m = inject_fault(prog, rng)
        diff = [i for i, (a, b) in enumerate(zip(prog.circuit.gates, m.mutated_circuit.gates)) if a is not b]
        assert diff == [m.position]
        assert len(m.mutated_circuit) == len(prog.circuit)
        assert m.mutated_circuit.gates[m.position].targets == (prog.circuit.gates[m.position].targets[0],)


def test_single_gate_circuit_injection():
    m = inject_fault(H_PROG, np.random.default_rng(3))
    assert m.position == 0 and len(m.mutated_circuit) == 1


def test_injection_replays():
    prog = get_benchmark("QFT-05")
    a = inject_fault(prog, np.random.default_rng(11))
    b = inject_fault(prog, np.random.default_rng(11))
    assert a.to_record() == b.to_record()


def test_empty_circuit_rejected():
    with pytest.raises(ValueError):
        inject_fault(program([]), np.random.default_rng(0))


def test_every_position_hit():
    # 10^4 draws over L positions miss a given one with probability (1-1/L)^10^4
    prog = get_benchmark("Grover-05")
    rng = np.random.default_rng(5)
    hits = {inject_fault(prog, rng).position for _ in range(10_000)}
    assert hits == set(range(len(prog.circuit)))


def test_functional_change_h_to_x():
    mutant = replace_gate(H_PROG, 0, "X")
    p = output_probabilities(H_PROG, basis_state(1, 0).amplitudes)[0]
    q = output_probabilities(mutant, basis_state(1, 0).amplitudes)[0]
    assert np.allclose(p, [0.5, 0.5]) and np.allclose(q, [0, 1])
    assert is_functional_change(H_PROG, mutant, np.random.default_rng(0))


def test_identical_mutant_is_not_functional():
    assert not is_functional_change(H_PROG, identical_mutant(H_PROG), np.random.default_rng(0))


def test_phase_only_change_is_decided_by_probes():
    # Z -> S alters the unitary but not any basis-state output distribution
    zprog = program([z(0)])
    assert not is_functional_change(zprog, replace_gate(zprog, 0, "S"), np.random.default_rng(0))
    # sandwiched between Hadamards the same swap becomes observable
    hzh = program([h(0), z(0), h(0)])
    assert is_functional_change(hzh, replace_gate(hzh, 1, "S"), np.random.default_rng(0))


def test_probe_states():
    assert np.array_equal(probe_states(3, np.random.default_rng(0)), np.eye(8))
    p = probe_states(9, np.random.default_rng(0))
    assert p.shape == (128, 512)
    assert np.allclose(np.linalg.norm(p, axis=1), 1)
    assert len({int(np.argmax(np.abs(r))) for r in p[:64]}) == 64


def test_fault_pool_is_functional_and_reproducible():
    prog = get_benchmark("Grover-03")
    pool = fault_pool(prog, 20, master_seed=4)
    again = fault_pool(prog, 20, master_seed=4)
    assert len(pool) == 20
    assert [m.to_record() for m in pool] == [m.to_record() for m in again]
    probes = np.eye(8, dtype=complex)
    base = output_probabilities(prog, probes)
    for m in pool:
        assert 0.5 * np.abs(output_probabilities(m, probes) - base).sum(axis=1).max() > 1e-6


def test_exact_detection_examples():
    zero = basis_state(1, 0)
    mutant = replace_gate(H_PROG, 0, "X")
    assert detect_bug(H_PROG, mutant, zero, EXACT, None)
    assert not detect_bug(H_PROG, identical_mutant(H_PROG), zero, EXACT, None)


def test_detect_bug_dimension_mismatch():
    with pytest.raises(ValueError):
        detect_bug(H_PROG, identical_mutant(H_PROG), basis_state(2, 0), EXACT, None)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exact_mode_is_symmetric(seed):
    rng = np.random.default_rng(seed)
    prog = get_benchmark("QFT-05")
    a, b = inject_fault(prog, rng), inject_fault(prog, rng)
    states = initial_states(rng.uniform(0, 2 * math.pi, (20, 15)))
    assert np.array_equal(detection_flags(states, a, b, EXACT, 0), detection_flags(states, b, a, EXACT, 0))


def test_statistical_null_calibration():
    # equivalent mutant: every trial is a pure null chi-square test
    prog = get_benchmark("QFT-05")
    mutant = identical_mutant(prog)
    states = initial_states(np.random.default_rng(8).uniform(0, 2 * math.pi, (1000, 15)))
    rate = detection_rate(states, prog, mutant, DetectionConfig(), master_seed=1)
    assert 0 <= rate <= 0.02


def test_detection_rate_examples():
    prog = program([h(0)])
    zero = np.array([[1, 0], [1, 0]], dtype=complex)
    assert detection_rate(zero, prog, replace_gate(prog, 0, "X"), EXACT) == 1.0
    assert detection_rate(zero, prog, identical_mutant(prog), EXACT) == 0.0
    # a clearly separated pair is flagged by the statistical oracle too
    assert detection_rate(zero, prog, replace_gate(prog, 0, "X"), DetectionConfig()) == 1.0


def test_detection_rate_accepts_states_and_rejects_empty():
    prog = program([h(0)])
    mutant = replace_gate(prog, 0, "X")
    assert detection_rate([basis_state(1, 0)], prog, mutant, EXACT) == 1.0
    with pytest.raises(ValueError):
        detection_rate([], prog, mutant, EXACT)


def test_detection_flags_do_not_depend_on_batching():
    prog = get_benchmark("Grover-03")
    mutant = fault_pool(prog, 1, 2)[0]
    states = initial_states(np.random.default_rng(1).uniform(0, 2 * math.pi, (30, 9)))
    full = detection_flags(states, prog, mutant, DetectionConfig(), 3)
    assert full[10] == detection_flags(states, prog, mutant, DetectionConfig(), 3)[10]
    head = detection_flags(states[:15], prog, mutant, DetectionConfig(), 3)
    assert np.array_equal(full[:15], head)


@pytest.mark.parametrize("kwargs", [{"shots": 0}, {"alpha": 1.0}, {"alpha": 0.0}, {"mode": "bayes"}])
def test_invalid_detection_config(kwargs):
    with pytest.raises(ConfigurationError):
        DetectionConfig(**kwargs).validate()


def test_chi_square_identical_counts():
    assert chi_square_pvalue(np.array([500, 500]), np.array([500, 500])) == pytest.approx(1.0)


def test_chi_square_matches_scipy_contingency():
    from scipy.stats import chi2_contingency

    a, b = np.array([300, 250, 450]), np.array([350, 260, 390])
    ref = chi2_contingency(np.array([a, b]), correction=False).pvalue
    assert chi_square_pvalue(a, b) == pytest.approx(ref, rel=1e-12)


def test_chi_square_pools_sparse_outcomes():
    # the three sparse outcomes are merged into one bin: 2 degrees of freedom
    from scipy.stats import chi2_contingency

    a = np.array([400, 590, 3, 4, 3])
    b = np.array([420, 570, 2, 5, 3])
    pooled = np.array([[400, 590, 10], [420, 570, 10]])
    assert chi_square_pvalue(a, b) == pytest.approx(chi2_contingency(pooled, correction=False).pvalue)


def test_chi_square_single_bin():
    assert chi_square_pvalue(np.array([1000, 0]), np.array([1000, 0])) == 1.0


@pytest.mark.parametrize("n", [3, 4, 5])
def test_grover_block_shortcut_matches_gate_level(n):
    prog = grover(n)
    rng = np.random.default_rng(n)
    states = np.array([haar_state(n, rng) for _ in range(6)])
    assert np.allclose(prog.run(states), run_batch(states, prog.circuit), atol=1e-10)
    for _ in range(10):
        m = inject_fault(prog, rng)
        assert np.allclose(m.run(states), run_batch(states, m.mutated_circuit), atol=1e-10)


def test_grover_shortcut_with_nontrivial_oracle():
    prog = grover(4, marked=5)
    rng = np.random.default_rng(0)
    states = np.array([haar_state(4, rng) for _ in range(4)])
    m = replace_gate(prog, len(prog.circuit) - 1, "T")
    assert np.allclose(m.run(states), run_batch(states, m.mutated_circuit), atol=1e-10)


def test_phase_estimation_mutants_run_gate_level():
    prog = phase_estimation(4)
    m = fault_pool(prog, 3, 0)[0]
    states = np.eye(32, dtype=complex)
    assert np.allclose(m.run(states), run_batch(states, m.mutated_circuit))
