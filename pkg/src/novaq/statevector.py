"""Dense statevector simulation.

Qubit 0 is the least-significant bit of the basis index. Amplitudes are
complex128 throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from novaq.errors import ConfigurationError

MAX_QUBITS = 14
UNITARY_TOL = 1e-10
# amplitudes per batch chunk; keeps the working set in cache
_CHUNK = 1 << 18


@dataclass(frozen=True, eq=False)
class StateVector:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.shape[0] != 2**self.n:
            raise ValueError(f"expected {2**self.n} amplitudes, got shape {amps.shape}")
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=np.complex128)
        n = int(round(np.log2(amps.shape[0])))
        return cls(n, amps)

    @property
    def dim(self) -> int:
        return 2**self.n

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def __len__(self):
        return self.dim


@dataclass(frozen=True, eq=False)
class GateOp:
    """A k-qubit unitary acting on ``targets``.

    ``targets[0]`` is the most significant bit of the matrix row/column index,
    so ``GateOp("CX", CX, (c, t))`` is controlled on ``c``.
    """

    label: str
    matrix: np.ndarray
    targets: tuple[int, ...]
    params: tuple[float, ...] = field(default=())

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        targets = tuple(int(t) for t in self.targets)
        k = len(targets)
        if not 1 <= k <= 3:
            raise ValueError(f"gate {self.label!r} has {k} targets; 1..3 supported")
        if len(set(targets)) != k:
            raise ValueError(f"gate {self.label!r} has repeated targets {targets}")
        if m.shape != (2**k, 2**k):
            raise ValueError(f"gate {self.label!r}: matrix shape {m.shape} for {k} targets")
        if not np.all(np.isfinite(m)):
            raise ValueError(f"gate {self.label!r}: non-finite matrix entries")
        if np.max(np.abs(m.conj().T @ m - np.eye(2**k))) > UNITARY_TOL:
            raise ValueError(f"gate {self.label!r}: matrix is not unitary")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "_diagonal", not np.any(m - np.diag(np.diag(m))))

    @property
    def diagonal(self) -> bool:
        return self._diagonal

    def dagger(self) -> "GateOp":
        return GateOp(self.label + "_dg", self.matrix.conj().T, self.targets)


@dataclass(frozen=True, eq=False)
class PhaseFlipOp:
    """Multiply a single basis amplitude by -1 (multi-controlled Z on ``index``).

    Acts on the whole register as a dense diagonal update instead of a gate
    decomposition. ``targets`` lists every qubit for bookkeeping.
    """

    label: str
    index: int
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if not 0 <= self.index < 2 ** len(self.targets):
            raise ValueError(f"phase-flip index {self.index} out of range")

    def dagger(self) -> "PhaseFlipOp":
        return self


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            for t in g.targets:
                if not 0 <= t < self.n:
                    raise ValueError(f"gate {g.label!r} target {t} outside [0, {self.n})")
            if isinstance(g, PhaseFlipOp) and len(g.targets) != self.n:
                raise ValueError("phase-flip ops must span the full register")

    def __len__(self):
        return len(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n != self.n:
            raise ValueError("cannot concatenate circuits of different width")
        return Circuit(self.n, self.gates + other.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.n, tuple(g.dagger() for g in reversed(self.gates)))


def _check_n(n: int):
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise ConfigurationError(f"qubit count must be in [1, {MAX_QUBITS}], got {n!r}")


def init_zero(n: int) -> StateVector:
    _check_n(n)
    amps = np.zeros(2**n, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n, amps)


def basis_state(n: int, index: int) -> StateVector:
    _check_n(n)
    amps = np.zeros(2**n, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(n, amps)


def apply_op_batch(amps: np.ndarray, op, n: int) -> np.ndarray:
    """Apply ``op`` to a batch of raw amplitude rows of shape (B, 2**n)."""
    batch = amps.shape[0]
    if isinstance(op, PhaseFlipOp):
        out = amps.copy()
        out[:, op.index] *= -1
        return out
    k = len(op.targets)
    if k == 1:
        return _apply_1q(amps, op.matrix, op.targets[0], n)
    # leading axis is the batch; qubit q lives on tensor axis n - q
    axes = [n - t for t in op.targets]
    psi = amps.reshape((batch,) + (2,) * n)
    if op.diagonal:
        diag = np.diag(op.matrix).reshape((2,) * k)
        shape = [1] * (n + 1)
        for a in axes:
            shape[a] = 2
        # broadcast the diagonal across the target axes in sorted order
        order = np.argsort(axes)
        diag = np.transpose(diag, order).reshape(shape)
        return (psi * diag).reshape(batch, 2**n)
    mat = op.matrix.reshape((2,) * (2 * k))
    out = np.tensordot(mat, psi, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return np.ascontiguousarray(out).reshape(batch, 2**n)


def _scalar(v):
    v = complex(v)
    return v.real if v.imag == 0 else v


def _apply_1q(amps: np.ndarray, m: np.ndarray, target: int, n: int) -> np.ndarray:
    batch = amps.shape[0]
    psi = amps.reshape(batch * (1 << (n - 1 - target)), 2, 1 << target)
    a0, a1 = psi[:, 0, :], psi[:, 1, :]
    m00, m01, m10, m11 = (_scalar(v) for v in m.ravel())
    out = np.empty_like(psi)
    o0, o1 = out[:, 0, :], out[:, 1, :]
    if m01 == 0 and m10 == 0:
        np.multiply(a0, m00, out=o0)
        np.multiply(a1, m11, out=o1)
    elif m00 == 0 and m11 == 0:
        np.multiply(a1, m01, out=o0)
        np.multiply(a0, m10, out=o1)
    elif m00 == m01 == m10 == -m11:
        np.add(a0, a1, out=o0)
        np.subtract(a0, a1, out=o1)
        out *= m00
    else:
        np.multiply(a0, m00, out=o0)
        o0 += a1 * m01
        np.multiply(a0, m10, out=o1)
        o1 += a1 * m11
    return out.reshape(batch, 1 << n)


def run_batch(amps: np.ndarray, circuit: Circuit) -> np.ndarray:
    """Apply every gate of ``circuit`` to a (B, 2**n) amplitude array."""
    amps = np.asarray(amps, dtype=np.complex128)
    if amps.ndim == 1:
        amps = amps[None, :]
    if amps.shape[1] != 2**circuit.n:
        raise ValueError(
            f"circuit on {circuit.n} qubits cannot act on dimension {amps.shape[1]}"
        )
    if amps.shape[0] > 1 and amps.size > _CHUNK:
        step = max(1, _CHUNK // amps.shape[1])
        return np.vstack([run_batch(amps[i : i + step], circuit) for i in range(0, amps.shape[0], step)])
    for op in circuit.gates:
        amps = apply_op_batch(amps, op, circuit.n)
    return amps


def apply_gate(state: StateVector, gate) -> StateVector:
    for t in gate.targets:
        if not 0 <= t < state.n:
            raise ValueError(f"gate {gate.label!r} target {t} outside [0, {state.n})")
    out = apply_op_batch(state.amplitudes[None, :], gate, state.n)
    return StateVector(state.n, out[0])


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if circuit.n != state.n:
        raise ValueError(f"circuit has {circuit.n} qubits, state has {state.n}")
    return StateVector(state.n, run_batch(state.amplitudes, circuit)[0])


def probabilities(state: StateVector) -> np.ndarray:
    p = np.abs(state.amplitudes) ** 2
    return p


def sample_counts(state: StateVector, shots: int, rng: np.random.Generator) -> Mapping[int, int]:
    """Draw ``shots`` computational-basis outcomes; returns index -> count."""
    if shots < 1:
        raise ValueError("shots must be positive")
    counts = sample_count_vector(probabilities(state), shots, rng)
    return {int(i): int(counts[i]) for i in np.flatnonzero(counts)}


def sample_count_vector(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    p = np.clip(np.asarray(probs, dtype=np.float64), 0.0, None)
    p = p / p.sum()
    return rng.multinomial(shots, p)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense 2**n x 2**n matrix of ``circuit`` (columns are images of basis states)."""
    eye = np.eye(2**circuit.n, dtype=np.complex128)
    return run_batch(eye, circuit).T


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))
