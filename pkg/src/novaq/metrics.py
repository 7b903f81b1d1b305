"""Magnitude, phase and entanglement scores of a state, each in [0, 1].

Definitions (tagged ``METRIC_VERSION`` in every report):

* magnitude: Shannon entropy of the measurement distribution in bits, over n
* phase: one minus the length of the probability-weighted mean phasor, after
  rotating the global phase so the largest amplitude is real positive
* entanglement: Meyer-Wallach Q = 2 (1 - mean single-qubit purity)
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from novaq.statevector import StateVector

METRIC_VERSION = "novaq-metrics/1 (entropy, phasor-dispersion, meyer-wallach)"
PHASE_PROB_FLOOR = 1e-12


class MetricTriple(NamedTuple):
    magnitude: float
    phase: float
    entanglement: float


def _rows(amps) -> np.ndarray:
    if isinstance(amps, StateVector):
        amps = amps.amplitudes
    return np.atleast_2d(np.asarray(amps, dtype=np.complex128))


def _width(dim: int) -> int:
    return dim.bit_length() - 1


def magnitude_scores(amps: np.ndarray) -> np.ndarray:
    amps = _rows(amps)
    n = _width(amps.shape[1])
    p = np.abs(amps) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return np.clip(terms.sum(axis=1) / n, 0.0, 1.0)


def phase_scores(amps: np.ndarray) -> np.ndarray:
    amps = _rows(amps)
    p = np.abs(amps) ** 2
    # ties resolve to the lowest index via argmax
    ref = amps[np.arange(amps.shape[0]), np.argmax(p, axis=1)]
    gauge = np.conj(ref) / np.abs(ref)
    rotated = amps * gauge[:, None]
    mask = p > PHASE_PROB_FLOOR
    with np.errstate(divide="ignore", invalid="ignore"):
        phasors = np.where(mask, rotated / np.where(mask, np.abs(rotated), 1.0), 0.0)
    resultant = np.abs(np.sum(np.where(mask, p, 0.0) * phasors, axis=1))
    return np.clip(1.0 - resultant, 0.0, 1.0)


def reduced_purities(amps: np.ndarray) -> np.ndarray:
    """Tr(rho_k^2) of every single-qubit reduced state; shape (B, n)."""
    amps = _rows(amps)
    batch, dim = amps.shape
    n = _width(dim)
    out = np.empty((batch, n))
    for k in range(n):
        # index = hi * 2^(k+1) + bit * 2^k + lo
        psi = amps.reshape(batch, dim >> (k + 1), 2, 1 << k)
        p0 = np.sum(np.abs(psi[:, :, 0, :]) ** 2, axis=(1, 2))
        p1 = np.sum(np.abs(psi[:, :, 1, :]) ** 2, axis=(1, 2))
        off = np.sum(psi[:, :, 0, :] * np.conj(psi[:, :, 1, :]), axis=(1, 2))
        out[:, k] = p0**2 + p1**2 + 2 * np.abs(off) ** 2
    return out


def entanglement_scores(amps: np.ndarray) -> np.ndarray:
    amps = _rows(amps)
    n = _width(amps.shape[1])
    if n == 1:
        return np.zeros(amps.shape[0])
    q = 2.0 * (1.0 - reduced_purities(amps).mean(axis=1))
    return np.clip(q, 0.0, 1.0)


def metric_array(amps: np.ndarray) -> np.ndarray:
    """(B, 3) array of (magnitude, phase, entanglement) rows."""
    amps = _rows(amps)
    return np.column_stack([magnitude_scores(amps), phase_scores(amps), entanglement_scores(amps)])


def magnitude_score(state: StateVector) -> float:
    return float(magnitude_scores(state)[0])


def phase_score(state: StateVector) -> float:
    return float(phase_scores(state)[0])


def entanglement_score(state: StateVector) -> float:
    return float(entanglement_scores(state)[0])


def metric_triple(state: StateVector) -> MetricTriple:
    return MetricTriple(*(float(v) for v in metric_array(state)[0]))
