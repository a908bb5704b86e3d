"""Variational quantum circuit layer: angle encoding, ring-entangled
rotation layers, per-qubit Pauli-Z readout, and exact parameter-shift
gradients for both the trainable angles and the encoding angles.

Circuit layout (n qubits, L layers):

    per qubit:  H, Rx(w_q), Rz(w_q)              encoding
    L times:    CNOT ring q -> (q+1) mod n,      entangler (absent for n=1)
                then per qubit Rx/Rz pair        trainable rotations

The gradient helper evaluates every shifted circuit in one batched
statevector run; each encoding angle feeds two gates, so its derivative
is the sum of the two per-gate shift terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import statevector as sv

SHIFT = np.pi / 2.0


@dataclass
class VqcParams:
    """Trainable angles: theta[layer, qubit, 0] drives Rx, [..., 1] drives Rz."""

    n_qubits: int
    n_layers: int
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.n_qubits < 1 or self.n_layers < 1:
            raise ValueError("need n_qubits >= 1 and n_layers >= 1")
        want = (self.n_layers, self.n_qubits, 2)
        if self.theta.shape != want:
            raise ValueError(f"theta shape {self.theta.shape}, expected {want}")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta must be finite")

    @classmethod
    def zeros(cls, n_qubits: int, n_layers: int) -> "VqcParams":
        return cls(n_qubits, n_layers, np.zeros((n_layers, n_qubits, 2)))

    @classmethod
    def random(cls, n_qubits: int, n_layers: int, rng: np.random.Generator,
               scale: float = 0.1) -> "VqcParams":
        theta = rng.normal(0.0, scale, size=(n_layers, n_qubits, 2))
        return cls(n_qubits, n_layers, theta)


def _check_omega(omega, n_qubits: int) -> np.ndarray:
    om = np.asarray(omega, dtype=np.float64)
    if om.shape != (n_qubits,):
        raise ValueError(f"omega shape {om.shape}, expected ({n_qubits},)")
    if not np.all(np.isfinite(om)):
        raise ValueError("omega must be finite")
    return om


def encode(omega) -> np.ndarray:
    """Prepare the encoded state: per qubit H, Rx(w_q), Rz(w_q) from |0...0>."""
    om = np.asarray(omega, dtype=np.float64)
    if om.ndim != 1:
        raise ValueError("omega must be one angle per qubit")
    om = _check_omega(om, om.shape[0])
    state = sv.zero_state(om.shape[0])
    for q in range(om.shape[0]):
        sv.apply_hadamard(state, q)
        sv.apply_rx(state, q, om[q])
        sv.apply_rz(state, q, om[q])
    return state


def variational_block(state: np.ndarray, layer_theta) -> np.ndarray:
    """One entangling block: CNOT ring, then an Rx/Rz pair on every qubit."""
    n = sv.n_qubits_of(state)
    th = np.asarray(layer_theta, dtype=np.float64)
    if th.shape != (n, 2):
        raise ValueError(f"layer_theta shape {th.shape}, expected ({n}, 2)")
    if n > 1:
        for q in range(n):
            sv.apply_cnot(state, q, (q + 1) % n)
    for q in range(n):
        sv.apply_rx(state, q, th[q, 0])
        sv.apply_rz(state, q, th[q, 1])
    return state


def _run_circuit(omega_rx: np.ndarray, omega_rz: np.ndarray,
                 theta: np.ndarray) -> np.ndarray:
    """Full circuit over arbitrary leading batch axes.

    omega_rx/omega_rz: (..., n) angles for the two encoding gates, split so
    shifted evaluations can move one gate occurrence at a time.
    theta: (..., L, n, 2). Returns <Z_q> with shape (..., n).
    """
    n = omega_rx.shape[-1]
    n_layers = theta.shape[-3]
    state = sv.zero_state(n, omega_rx.shape[:-1])
    for q in range(n):
        sv.apply_hadamard(state, q)
        sv.apply_rx(state, q, omega_rx[..., q])
        sv.apply_rz(state, q, omega_rz[..., q])
    for layer in range(n_layers):
        if n > 1:
            for q in range(n):
                sv.apply_cnot(state, q, (q + 1) % n)
        for q in range(n):
            sv.apply_rx(state, q, theta[..., layer, q, 0])
            sv.apply_rz(state, q, theta[..., layer, q, 1])
    return sv.expectation_z_all(state)


def forward(omega, params: VqcParams) -> np.ndarray:
    """Per-qubit <Z> expectations, each in [-1, 1]. Deterministic."""
    om = _check_omega(omega, params.n_qubits)
    return _run_circuit(om, om, params.theta)


def parameter_shift_gradient(omega, params: VqcParams, upstream):
    """Exact gradients of upstream . expvals w.r.t. theta and omega.

    Each scalar rotation angle a satisfies d<Z>/da =
    (<Z>|a+pi/2 - <Z>|a-pi/2) / 2. An encoding angle appears in both its
    Rx and Rz gate, so its gradient sums the two occurrence terms. All
    shifted circuits run as one batch; the row layout is fixed, so the
    reduction is deterministic.
    """
    om = _check_omega(omega, params.n_qubits)
    up = np.asarray(upstream, dtype=np.float64)
    if up.shape != (params.n_qubits,):
        raise ValueError(f"upstream shape {up.shape}, expected ({params.n_qubits},)")
    n = params.n_qubits
    n_theta = params.theta.size
    # Pair p occupies rows 2p (+shift) and 2p+1 (-shift). Pairs 0..n_theta-1
    # are the flat theta angles; then per qubit the Rx and Rz encoding
    # occurrences.
    n_pairs = n_theta + 2 * n
    rows = 2 * n_pairs
    omega_rx = np.tile(om, (rows, 1))
    omega_rz = np.tile(om, (rows, 1))
    theta = np.tile(params.theta.reshape(1, -1), (rows, 1))
    for t in range(n_theta):
        theta[2 * t, t] += SHIFT
        theta[2 * t + 1, t] -= SHIFT
    base = 2 * n_theta
    for q in range(n):
        omega_rx[base + 4 * q, q] += SHIFT
        omega_rx[base + 4 * q + 1, q] -= SHIFT
        omega_rz[base + 4 * q + 2, q] += SHIFT
        omega_rz[base + 4 * q + 3, q] -= SHIFT
    expvals = _run_circuit(
        omega_rx, omega_rz,
        theta.reshape(rows, params.n_layers, n, 2))
    # (n_pairs, n): d expvals / d angle for each shifted pair.
    jac = (expvals[0::2] - expvals[1::2]) / 2.0
    pair_grad = jac @ up
    grad_theta = pair_grad[:n_theta].reshape(params.theta.shape)
    occ = pair_grad[n_theta:].reshape(n, 2)
    grad_omega = occ.sum(axis=1)
    return grad_theta, grad_omega
