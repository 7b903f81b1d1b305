"""Gate and circuit builders: U gate, QFT/IQFT, the generator circuit and
the benchmark programs (Grover, phase estimation, QFT)."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from novaq.errors import ConfigurationError
from novaq.statevector import MAX_QUBITS, Circuit, GateOp, PhaseFlipOp, run_batch

SQRT1_2 = 1 / math.sqrt(2)

H_MATRIX = np.array([[1, 1], [1, -1]], dtype=np.complex128) * SQRT1_2
X_MATRIX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y_MATRIX = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z_MATRIX = np.diag([1, -1]).astype(np.complex128)
S_MATRIX = np.diag([1, 1j]).astype(np.complex128)
T_MATRIX = np.diag([1, np.exp(1j * math.pi / 4)]).astype(np.complex128)
CX_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)
SWAP_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)


class UParams(NamedTuple):
    theta: float
    phi: float
    lam: float


def u_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=np.complex128,
    )


def u_gate(p: UParams | Sequence[float], target: int) -> GateOp:
    theta, phi, lam = (float(v) for v in p)
    if not all(math.isfinite(v) for v in (theta, phi, lam)):
        raise ValueError(f"U gate parameters must be finite, got {(theta, phi, lam)}")
    return GateOp("U", u_matrix(theta, phi, lam), (target,), (theta, phi, lam))


def h(q: int) -> GateOp:
    return GateOp("H", H_MATRIX, (q,))


def x(q: int) -> GateOp:
    return GateOp("X", X_MATRIX, (q,))


def y(q: int) -> GateOp:
    return GateOp("Y", Y_MATRIX, (q,))


def z(q: int) -> GateOp:
    return GateOp("Z", Z_MATRIX, (q,))


def s(q: int) -> GateOp:
    return GateOp("S", S_MATRIX, (q,))


def t(q: int) -> GateOp:
    return GateOp("T", T_MATRIX, (q,))


def cx(control: int, target: int) -> GateOp:
    return GateOp("CX", CX_MATRIX, (control, target))


def cp(angle: float, control: int, target: int) -> GateOp:
    return GateOp("CP", np.diag([1, 1, 1, np.exp(1j * angle)]), (control, target), (angle,))


def swap(a: int, b: int) -> GateOp:
    return GateOp("SWAP", SWAP_MATRIX, (a, b))


def mcz(n: int, index: int | None = None) -> PhaseFlipOp:
    """Phase flip of basis state ``index`` (default all-ones) on an n-qubit register."""
    if index is None:
        index = 2**n - 1
    return PhaseFlipOp("MCZ", index, tuple(range(n)))


def _check_width(n: int):
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise ConfigurationError(f"qubit count must be in [1, {MAX_QUBITS}], got {n!r}")


def qft_gates(qubits: Sequence[int]) -> list[GateOp]:
    """Forward QFT |x> -> sum_y exp(+2 pi i x y / 2^m) |y> / sqrt(2^m) on ``qubits``
    (``qubits[0]`` least significant)."""
    m = len(qubits)
    gates = []
    for j in reversed(range(m)):
        gates.append(h(qubits[j]))
        for k in reversed(range(j)):
            gates.append(cp(math.pi / 2 ** (j - k), qubits[k], qubits[j]))
    for i in range(m // 2):
        gates.append(swap(qubits[i], qubits[m - 1 - i]))
    return gates


def iqft_gates(qubits: Sequence[int]) -> list[GateOp]:
    gates = []
    for g in reversed(qft_gates(qubits)):
        if g.label == "CP":
            gates.append(cp(-g.params[0], *g.targets))
        else:
            gates.append(g)
    return gates


def qft(n: int) -> Circuit:
    _check_width(n)
    return Circuit(n, qft_gates(range(n)))


def iqft(n: int) -> Circuit:
    _check_width(n)
    return Circuit(n, iqft_gates(range(n)))


def initial_circuit(n: int, params: Sequence[float]) -> Circuit:
    """One U gate per qubit, parameters (theta, phi, lambda) in qubit order,
    followed by the IQFT layer."""
    _check_width(n)
    params = np.asarray(params, dtype=np.float64).ravel()
    if params.shape[0] != 3 * n:
        raise ValueError(f"initial circuit on {n} qubits takes {3 * n} parameters, got {params.shape[0]}")
    layer = [u_gate(params[3 * q : 3 * q + 3], q) for q in range(n)]
    return Circuit(n, layer + iqft_gates(range(n)))


def initial_states(params: np.ndarray) -> np.ndarray:
    """Rows of generator outputs for a (B, 3n) parameter array.

    Same result as simulating ``initial_circuit`` gate by gate: the U layer
    is a product state and the IQFT is a normalised forward FFT under the
    least-significant-qubit-first ordering.
    """
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    batch, width = params.shape
    n = width // 3
    theta = params[:, 0::3]
    phi = params[:, 1::3]
    # U|0> = (cos(theta/2), e^{i phi} sin(theta/2)); lambda drops out
    q0 = np.cos(theta / 2).astype(np.complex128)
    q1 = np.exp(1j * phi) * np.sin(theta / 2)
    amps = np.ones((batch, 1), dtype=np.complex128)
    for q in range(n):
        # qubit q is bit q, so it becomes the new most-significant factor
        amps = np.concatenate([amps * q0[:, q : q + 1], amps * q1[:, q : q + 1]], axis=1)
    return np.fft.fft(amps, axis=1) / math.sqrt(2**n)


@dataclass(frozen=True, eq=False)
class BenchmarkProgram:
    """A program under test. It consumes an arbitrary input state.

    ``block_start``/``block_len``/``repetitions`` describe a block of gates
    repeated back to back inside ``circuit`` (the Grover iteration);
    ``block_power`` applies that block k times to a batch of amplitude rows,
    exactly, without stepping through every gate.
    """

    name: str
    circuit: Circuit
    block_start: int = 0
    block_len: int = 0
    repetitions: int = 0
    block_power: Callable[[np.ndarray, int], np.ndarray] | None = field(default=None, repr=False)
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.circuit.n

    def run(self, amps: np.ndarray) -> np.ndarray:
        return run_gates(self, self.circuit.gates, amps)


def run_gates(program: BenchmarkProgram, gates: Sequence, amps: np.ndarray) -> np.ndarray:
    """Run ``gates`` (the program's circuit, possibly with one gate replaced)
    on a batch, using the block shortcut for every untouched block repetition."""
    n = program.n
    amps = np.atleast_2d(np.asarray(amps, dtype=np.complex128))
    if program.block_power is None or program.repetitions == 0:
        return run_batch(amps, Circuit(n, gates))
    base = program.circuit.gates
    start, blen, reps = program.block_start, program.block_len, program.repetitions
    stop = start + blen * reps
    changed = [i for i in range(start, stop) if gates[i] is not base[i]]
    changed_blocks = sorted({(i - start) // blen for i in changed})
    amps = run_batch(amps, Circuit(n, gates[:start]))
    done = 0
    for b in changed_blocks:
        amps = program.block_power(amps, b - done)
        lo = start + b * blen
        amps = run_batch(amps, Circuit(n, gates[lo : lo + blen]))
        done = b + 1
    amps = program.block_power(amps, reps - done)
    return run_batch(amps, Circuit(n, gates[stop:]))


def optimal_grover_iterations(n: int) -> int:
    return int(round(math.pi / 4 * math.sqrt(2**n)))


def _grover_block(n: int, marked: int) -> list:
    oracle_x = [x(q) for q in range(n) if not (marked >> q) & 1]
    oracle = oracle_x + [mcz(n)] + oracle_x
    diffuser = (
        [h(q) for q in range(n)]
        + [x(q) for q in range(n)]
        + [mcz(n)]
        + [x(q) for q in range(n)]
        + [h(q) for q in range(n)]
    )
    return oracle + diffuser


def grover_power_fn(n: int, marked: int) -> Callable[[np.ndarray, int], np.ndarray]:
    """k applications of (I - 2|s><s|)(I - 2|m><m|), computed in span{m, s}.

    Both reflections act as the identity on the orthogonal complement of
    span{|m>, |s>}, so only a 2x2 rotation needs powering.
    """
    dim = 2**n
    c = 1 / math.sqrt(dim)
    d = math.sqrt(1 - c * c)
    e2 = np.full(dim, c / d)
    e2[marked] = 0.0
    r_m = np.diag([-1.0, 1.0])
    sv = np.array([c, d])
    r_s = np.eye(2) - 2 * np.outer(sv, sv)
    rot = r_s @ r_m

    def power(amps: np.ndarray, k: int) -> np.ndarray:
        if k == 0:
            return amps
        mk = np.linalg.matrix_power(rot, k)
        a = amps[:, marked].copy()
        b = amps @ e2
        out = amps - np.outer(b, e2)
        out[:, marked] = 0.0
        na = mk[0, 0] * a + mk[0, 1] * b
        nb = mk[1, 0] * a + mk[1, 1] * b
        out += np.outer(nb, e2)
        out[:, marked] = na
        return out

    return power


def grover(n: int, marked: int | None = None, iterations: int | None = None,
           name: str | None = None) -> BenchmarkProgram:
    """Grover search without state preparation: the input state is consumed as is."""
    _check_width(n)
    if n < 2:
        raise ConfigurationError("Grover needs at least 2 qubits")
    if marked is None:
        marked = 2**n - 1
    if not 0 <= marked < 2**n:
        raise ValueError(f"marked index {marked} outside [0, {2**n})")
    if iterations is None:
        iterations = optimal_grover_iterations(n)
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    block = _grover_block(n, marked)
    gates = []
    for _ in range(iterations):
        gates.extend(block)
    return BenchmarkProgram(
        name or f"Grover-{n:02d}",
        Circuit(n, gates),
        block_start=0,
        block_len=len(block),
        repetitions=iterations,
        block_power=grover_power_fn(n, marked),
        info={"marked": marked, "iterations": iterations},
    )


def phase_estimation(n_count: int, eigenphase: float = 0.3125, name: str | None = None) -> BenchmarkProgram:
    """Counting qubits 0..n_count-1, work qubit n_count prepared in |1>.

    Counting qubit j controls the phase unitary diag(1, e^{2 pi i phase})
    raised to 2^j; the counting register is read after the IQFT.
    """
    if not 1 <= n_count <= 12:
        raise ConfigurationError(f"n_count must be in [1, 12], got {n_count}")
    if not 0 <= eigenphase < 1:
        raise ValueError(f"eigenphase must lie in [0, 1), got {eigenphase}")
    work = n_count
    gates: list = [x(work)]
    gates += [h(q) for q in range(n_count)]
    for j in range(n_count):
        angle = 2 * math.pi * ((eigenphase * 2**j) % 1.0)
        gates.append(cp(angle, j, work))
    gates += iqft_gates(range(n_count))
    return BenchmarkProgram(
        name or f"PE-{n_count + 1:02d}",
        Circuit(n_count + 1, gates),
        info={"n_count": n_count, "eigenphase": eigenphase},
    )


def counting_distribution(probs: np.ndarray, n_count: int) -> np.ndarray:
    """Marginal over the low ``n_count`` qubits of a full-register distribution."""
    probs = np.asarray(probs)
    return probs.reshape(-1, 2**n_count).sum(axis=0)


def qft_program(n: int, name: str | None = None) -> BenchmarkProgram:
    return BenchmarkProgram(name or f"QFT-{n:02d}", qft(n))


BENCHMARK_NAMES = ("Grover-03", "Grover-05", "Grover-07", "Grover-10", "Grover-12", "PE-05", "QFT-05")


def get_benchmark(name: str, **options) -> BenchmarkProgram:
    """Build a program by its table label, e.g. ``Grover-05`` or ``PE-05``."""
    m = re.fullmatch(r"(Grover|PE|QFT)-(\d+)", name)
    if m is None:
        raise ConfigurationError(f"unknown benchmark program {name!r}")
    kind, width = m.group(1), int(m.group(2))
    if kind == "Grover":
        return grover(width, options.get("marked"), options.get("iterations"), name=name)
    if kind == "PE":
        return phase_estimation(width - 1, options.get("eigenphase", 0.3125), name=name)
    return qft_program(width, name=name)
