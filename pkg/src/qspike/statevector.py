"""Dense statevector simulation for small qubit registers.

A state over n qubits is a complex128 numpy array whose last axis has
length 2**n. Qubit 0 is the most significant bit of the amplitude index:
basis state |b0 b1 ... b_{n-1}> lives at index sum(b_q * 2**(n-1-q)).
Leading axes, when present, are independent batch states that share the
gate sequence; rotation angles may then be given per batch row.

Gates mutate the array in place and return it, so calls chain.
"""

from __future__ import annotations

import numpy as np

# Dense amplitudes are 16 bytes each; 12 qubits = 64 KiB per state, which
# keeps batched gradient evaluation comfortably in cache.
MAX_QUBITS = 12

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


class StateShapeError(ValueError):
    """Raised when an array's last axis is not a power-of-two state length."""


def n_qubits_of(state: np.ndarray) -> int:
    """Number of qubits encoded by the last axis, validating its length."""
    dim = state.shape[-1] if state.ndim else 0
    n = int(dim - 1).bit_length()
    if dim <= 0 or dim != 1 << n:
        raise StateShapeError(f"last axis has length {dim}, not a power of two")
    if n > MAX_QUBITS:
        raise StateShapeError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit cap")
    return n


def zero_state(n_qubits: int, batch_shape: tuple[int, ...] = ()) -> np.ndarray:
    """|00...0> as a complex128 array, optionally with leading batch axes."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    state = np.zeros(tuple(batch_shape) + (1 << n_qubits,), dtype=np.complex128)
    state[..., 0] = 1.0
    return state


def _qubit_view(state: np.ndarray, qubit: int) -> np.ndarray:
    """Reshape so the target qubit is its own axis of length 2 (second to last)."""
    n = n_qubits_of(state)
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range for {n} qubits")
    lead = state.shape[:-1]
    return state.reshape(lead + (1 << qubit, 2, 1 << (n - 1 - qubit)))


def _angle_factors(state: np.ndarray, omega) -> np.ndarray:
    """Validate an angle (scalar or one per batch row) and shape it to broadcast
    against the (..., block, 2, block) qubit view."""
    om = np.asarray(omega, dtype=np.float64)
    if not np.all(np.isfinite(om)):
        raise ValueError("rotation angle must be finite")
    if om.ndim == 0:
        return om
    if om.shape != state.shape[:-1]:
        raise ValueError(
            f"angle batch shape {om.shape} does not match state batch {state.shape[:-1]}"
        )
    return om[..., None, None]


def apply_hadamard(state: np.ndarray, qubit: int) -> np.ndarray:
    v = _qubit_view(state, qubit)
    s0 = v[..., 0, :].copy()
    s1 = v[..., 1, :].copy()
    v[..., 0, :] = (s0 + s1) * _INV_SQRT2
    v[..., 1, :] = (s0 - s1) * _INV_SQRT2
    return state


def apply_rx(state: np.ndarray, qubit: int, omega) -> np.ndarray:
    """Rotation about X: [[cos(w/2), -i sin(w/2)], [-i sin(w/2), cos(w/2)]]."""
    v = _qubit_view(state, qubit)
    om = _angle_factors(state, omega)
    c = np.cos(om / 2.0)
    s = -1j * np.sin(om / 2.0)
    s0 = v[..., 0, :].copy()
    s1 = v[..., 1, :].copy()
    v[..., 0, :] = c * s0 + s * s1
    v[..., 1, :] = s * s0 + c * s1
    return state


def apply_rz(state: np.ndarray, qubit: int, omega) -> np.ndarray:
    """Rotation about Z: diag(exp(-i w/2), exp(+i w/2))."""
    v = _qubit_view(state, qubit)
    om = _angle_factors(state, omega)
    phase = np.exp(-0.5j * om)
    v[..., 0, :] *= phase
    v[..., 1, :] *= np.conj(phase)
    return state


def apply_cnot(state: np.ndarray, control: int, target: int) -> np.ndarray:
    """Flip `target` where `control` is |1>."""
    n = n_qubits_of(state)
    if control == target:
        raise ValueError("control and target must differ")
    for q in (control, target):
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n} qubits")
    lead = state.ndim - 1
    grid = state.reshape(state.shape[:-1] + (2,) * n)
    # Slice with length-1 extents so axis positions stay put, then swap the
    # target blocks inside the control=1 half via an explicit copy (the two
    # assignments alias the same buffer otherwise).
    sel: list[slice] = [slice(None)] * (lead + n)
    sel[lead + control] = slice(1, 2)
    sel0 = list(sel)
    sel0[lead + target] = slice(0, 1)
    sel1 = list(sel)
    sel1[lead + target] = slice(1, 2)
    tmp = grid[tuple(sel0)].copy()
    grid[tuple(sel0)] = grid[tuple(sel1)]
    grid[tuple(sel1)] = tmp
    return state


def norm(state: np.ndarray) -> np.ndarray:
    """Euclidean norm per batch row."""
    return np.sqrt(np.sum(np.abs(state) ** 2, axis=-1))


def expectation_z(state: np.ndarray, qubit: int) -> np.ndarray:
    """<Z> on one qubit: P(bit=0) - P(bit=1). Real float per batch row."""
    v = _qubit_view(state, qubit)
    prob = np.abs(v) ** 2
    # After the bit selection two state axes remain (blocks above and below
    # the target); both get reduced, leaving only batch axes.
    return (np.sum(prob[..., 0, :], axis=(-2, -1))
            - np.sum(prob[..., 1, :], axis=(-2, -1)))


def expectation_z_all(state: np.ndarray) -> np.ndarray:
    """<Z> for every qubit, stacked on a new trailing axis."""
    n = n_qubits_of(state)
    return np.stack([expectation_z(state, q) for q in range(n)], axis=-1)


def states_equal(a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> bool:
    """Equality up to global phase, for single (unbatched) states."""
    inner = np.vdot(a, b)
    if abs(inner) < tol:
        return bool(np.all(np.abs(a) < tol) and np.all(np.abs(b) < tol))
    return bool(np.allclose(a * (inner / abs(inner)), b, atol=tol, rtol=0.0))
