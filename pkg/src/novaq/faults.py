"""Single-gate replacement faults and the bug-detection oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import chi2

from novaq.circuits import BenchmarkProgram, h, initial_states, run_gates, s, t, u_gate, x, z
from novaq.errors import ConfigurationError
from novaq.rng import stream
from novaq.statevector import Circuit, StateVector

REPLACEMENT_POOL = ("H", "X", "Z", "S", "T", "U")
FUNCTIONAL_TVD = 1e-6
MIN_EXPECTED = 5.0


@dataclass(frozen=True, eq=False)
class FaultyProgram:
    base: BenchmarkProgram
    mutated_circuit: Circuit
    position: int
    original_label: str
    replacement_label: str
    replacement_params: tuple[float, ...] = ()

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def name(self) -> str:
        return self.base.name

    @property
    def fault_note(self) -> tuple[int, str, str]:
        return self.position, self.original_label, self.replacement_label

    def run(self, amps: np.ndarray) -> np.ndarray:
        return run_gates(self.base, self.mutated_circuit.gates, amps)

    def to_record(self) -> dict:
        return {
            "program": self.base.name,
            "position": self.position,
            "original": self.original_label,
            "replacement": self.replacement_label,
            "replacement_params": list(self.replacement_params),
        }


@dataclass(frozen=True)
class DetectionConfig:
    shots: int = 1000
    alpha: float = 0.01
    mode: str = "statistical"
    exact_tvd_threshold: float = 1e-6

    def validate(self) -> "DetectionConfig":
        if self.shots < 1:
            raise ConfigurationError("shots must be positive")
        if not 0 < self.alpha < 1:
            raise ConfigurationError("alpha must lie strictly between 0 and 1")
        if self.mode not in ("statistical", "exact"):
            raise ConfigurationError(f"detection mode must be 'statistical' or 'exact', got {self.mode!r}")
        if self.exact_tvd_threshold < 0:
            raise ConfigurationError("exact_tvd_threshold must be non-negative")
        return self


def _pool_gate(label: str, target: int, params: Sequence[float] = ()):
    if label == "U":
        return u_gate(params, target)
    return {"H": h, "X": x, "Z": z, "S": s, "T": t}[label](target)


def replace_gate(program: BenchmarkProgram, position: int, label: str,
                 params: Sequence[float] = ()) -> FaultyProgram:
    gates = program.circuit.gates
    if not 0 <= position < len(gates):
        raise IndexError(f"gate position {position} outside circuit of length {len(gates)}")
    original = gates[position]
    new = _pool_gate(label, original.targets[0], params)
    mutated = gates[:position] + (new,) + gates[position + 1:]
    return FaultyProgram(program, Circuit(program.n, mutated), position, original.label,
                         label, tuple(float(p) for p in params))


def inject_fault(program: BenchmarkProgram, rng: np.random.Generator) -> FaultyProgram:
    """Replace one uniformly chosen gate with a pool gate on its first target."""
    if len(program.circuit) == 0:
        raise ValueError(f"program {program.name!r} has no gates to replace")
    position = int(rng.integers(len(program.circuit)))
    label = REPLACEMENT_POOL[int(rng.integers(len(REPLACEMENT_POOL)))]
    params = tuple(rng.uniform(0, 2 * math.pi, size=3)) if label == "U" else ()
    return replace_gate(program, position, label, params)


def output_probabilities(program, amps: np.ndarray) -> np.ndarray:
    """Measurement distributions of ``program`` on each input row."""
    out = program.run(np.atleast_2d(amps))
    return np.abs(out) ** 2


def tvd_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(p - q).sum(axis=1)


def probe_states(n: int, rng: np.random.Generator) -> np.ndarray:
    """All basis states for n <= 7; otherwise 64 random basis states and
    64 random generator-circuit states."""
    dim = 2**n
    if n <= 7:
        return np.eye(dim, dtype=np.complex128)
    idx = rng.choice(dim, size=64, replace=False)
    basis = np.zeros((64, dim), dtype=np.complex128)
    basis[np.arange(64), idx] = 1.0
    mixed = initial_states(rng.uniform(0, 2 * math.pi, size=(64, 3 * n)))
    return np.vstack([basis, mixed])


def is_functional_change(base: BenchmarkProgram, mutant: FaultyProgram,
                         rng: np.random.Generator) -> bool:
    if mutant.mutated_circuit.n != base.n:
        raise ValueError("mutant and base differ in qubit count")
    probes = probe_states(base.n, rng)
    gap = tvd_rows(output_probabilities(base, probes), output_probabilities(mutant, probes))
    return bool(gap.max() > FUNCTIONAL_TVD)


def fault_pool(program: BenchmarkProgram, size: int, master_seed: int,
               max_attempts: int = 10_000) -> list[FaultyProgram]:
    """``size`` functionally different single-gate mutants, reproducible from the seed."""
    rng = stream(master_seed, "fault_injection", _name_key(program.name))
    pool = []
    for attempt in range(max_attempts):
        mutant = inject_fault(program, rng)
        if is_functional_change(program, mutant, stream(master_seed, "probe", _name_key(program.name), attempt)):
            pool.append(mutant)
            if len(pool) == size:
                return pool
    raise RuntimeError(f"only {len(pool)} functional mutants of {program.name} in {max_attempts} attempts")


def _name_key(name: str) -> int:
    return int.from_bytes(name.encode(), "little") % (2**32)


def chi_square_pvalue(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Pearson chi-square homogeneity test on outcome counts.

    Outcomes whose expected count (under a shared distribution) is below 5 in
    either sample are merged into one bin.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.sum(), b.sum()
    total = a + b
    exp_small = np.minimum(total * na, total * nb) / (na + nb) < MIN_EXPECTED
    keep = ~exp_small & (total > 0)
    ca, cb = list(a[keep]), list(b[keep])
    pa, pb = a[exp_small].sum(), b[exp_small].sum()
    if pa + pb > 0:
        ca.append(pa)
        cb.append(pb)
    if len(ca) < 2:
        return 1.0
    table = np.array([ca, cb])
    col = table.sum(axis=0)
    expected = np.outer([na, nb], col) / (na + nb)
    stat = float(((table - expected) ** 2 / expected).sum())
    return float(chi2.sf(stat, len(ca) - 1))


def _sample(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    p = np.clip(probs, 0.0, None)
    return rng.multinomial(shots, p / p.sum())


def _decide(p_base: np.ndarray, p_mut: np.ndarray, cfg: DetectionConfig, rng) -> bool:
    if cfg.mode == "exact":
        return bool(0.5 * np.abs(p_base - p_mut).sum() > cfg.exact_tvd_threshold)
    a = _sample(p_base, cfg.shots, rng)
    b = _sample(p_mut, cfg.shots, rng)
    return chi_square_pvalue(a, b) < cfg.alpha


def detect_bug(base: BenchmarkProgram, mutant: FaultyProgram, input: StateVector,
               cfg: DetectionConfig, rng: np.random.Generator) -> bool:
    if input.n != base.n:
        raise ValueError(f"input has {input.n} qubits, program {base.name} has {base.n}")
    cfg.validate()
    amps = input.amplitudes[None, :]
    return _decide(output_probabilities(base, amps)[0], output_probabilities(mutant, amps)[0], cfg, rng)


def detection_flags(states: np.ndarray, base: BenchmarkProgram, mutant: FaultyProgram,
                    cfg: DetectionConfig, master_seed: int, variant: int = 0,
                    base_probs: np.ndarray | None = None) -> np.ndarray:
    """Per-case detection outcomes for a (B, 2**n) batch of input states.

    Case ``i`` draws its shots from its own stream, so the result does not
    depend on batching.
    """
    cfg.validate()
    states = np.atleast_2d(states)
    if states.shape[1] != 2**base.n:
        raise ValueError(f"suite states have dimension {states.shape[1]}, program {base.name} needs {2**base.n}")
    if base_probs is None:
        base_probs = output_probabilities(base, states)
    mut_probs = output_probabilities(mutant, states)
    flags = np.empty(states.shape[0], dtype=bool)
    for i in range(states.shape[0]):
        rng = stream(master_seed, "shots", _name_key(base.name), variant, i) if cfg.mode == "statistical" else None
        flags[i] = _decide(base_probs[i], mut_probs[i], cfg, rng)
    return flags


def detection_rate(suite, base: BenchmarkProgram, mutant: FaultyProgram, cfg: DetectionConfig,
                   master_seed: int = 0, variant: int = 0) -> float:
    """Fraction of ``suite`` (test cases, states or a raw amplitude array) that flags the mutant."""
    states = suite_amplitudes(suite)
    if states.shape[0] == 0:
        raise ValueError("empty test suite")
    return float(detection_flags(states, base, mutant, cfg, master_seed, variant).mean())


def suite_amplitudes(suite) -> np.ndarray:
    if isinstance(suite, np.ndarray):
        return np.atleast_2d(suite)
    rows = []
    for item in suite:
        if isinstance(item, StateVector):
            rows.append(item.amplitudes)
        else:
            rows.append(item.state.amplitudes)
    if not rows:
        return np.zeros((0, 0), dtype=np.complex128)
    return np.vstack(rows)
