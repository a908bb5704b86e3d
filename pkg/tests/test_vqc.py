"""Circuit-layer checks: encoding, entangling blocks, readout, and the
shift-rule gradients, each against an independent matrix or FD oracle."""

import numpy as np
import pytest

from qspike import statevector as sv
from qspike import vqc

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def rx_matrix(w):
    return np.array([[np.cos(w / 2), -1j * np.sin(w / 2)],
                     [-1j * np.sin(w / 2), np.cos(w / 2)]])


def rz_matrix(w):
    return np.diag([np.exp(-1j * w / 2), np.exp(1j * w / 2)])


CNOT_01 = np.array([[1, 0, 0, 0],
                    [0, 1, 0, 0],
                    [0, 0, 0, 1],
                    [0, 0, 1, 0]], dtype=complex)
# control = qubit 1 (least significant), target = qubit 0
CNOT_10 = np.array([[1, 0, 0, 0],
                    [0, 0, 0, 1],
                    [0, 0, 1, 0],
                    [0, 1, 0, 0]], dtype=complex)


def test_encode_zero_angles_gives_uniform_superposition():
    state = vqc.encode(np.zeros(3))
    assert np.allclose(state, np.full(8, 1 / np.sqrt(8)), atol=1e-12)


def test_encode_single_qubit_matrix_oracle():
    w = np.pi / 2
    state = vqc.encode(np.array([w]))
    expected = rz_matrix(w) @ rx_matrix(w) @ H @ np.array([1, 0])
    assert np.allclose(state, expected, atol=1e-12)


def test_encode_norm_is_one():
    rng = np.random.default_rng(0)
    for _ in range(100):
        state = vqc.encode(rng.uniform(-np.pi / 2, np.pi / 2, 4))
        assert abs(sv.norm(state) - 1.0) < 1e-12


def test_encode_rejects_bad_shapes():
    with pytest.raises(ValueError):
        vqc.encode(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        vqc.encode(np.array([0.1, np.nan]))


def test_variational_block_identity_angles():
    state = sv.zero_state(2)
    out = vqc.variational_block(state, np.zeros((2, 2)))
    expected = np.zeros(4, dtype=complex)
    expected[0] = 1.0
    assert np.allclose(out, expected, atol=1e-12)


def test_variational_block_two_qubit_matrix_oracle():
    rng = np.random.default_rng(5)
    theta = rng.uniform(-np.pi, np.pi, (2, 2))
    amps = rng.normal(size=4) + 1j * rng.normal(size=4)
    amps /= np.linalg.norm(amps)

    got = vqc.variational_block(amps.copy(), theta)

    # qubit 0 is the most significant bit, so single-qubit ops are
    # kron(op, I) for qubit 0 and kron(I, op) for qubit 1
    I = np.eye(2)
    m = np.kron(rx_matrix(theta[0, 0]), I)
    m = np.kron(rz_matrix(theta[0, 1]), I) @ m
    m = np.kron(I, rx_matrix(theta[1, 0])) @ m
    m = np.kron(I, rz_matrix(theta[1, 1])) @ m
    full = m @ CNOT_10 @ CNOT_01
    assert np.allclose(got, full @ amps, atol=1e-12)


def test_variational_block_preserves_norm():
    rng = np.random.default_rng(6)
    for _ in range(20):
        amps = rng.normal(size=8) + 1j * rng.normal(size=8)
        amps /= np.linalg.norm(amps)
        out = vqc.variational_block(amps, rng.uniform(-np.pi, np.pi, (3, 2)))
        assert abs(sv.norm(out) - 1.0) < 1e-12


def test_variational_block_shape_error():
    with pytest.raises(ValueError):
        vqc.variational_block(sv.zero_state(2), np.zeros((3, 2)))


def test_forward_single_qubit_analytic():
    params = vqc.VqcParams.zeros(1, 1)
    out = vqc.forward(np.zeros(1), params)
    # circuit is Rz(0) Rx(0) Rz(0) Rx(0) H |0>, i.e. H|0>, whose <Z> is 0
    assert abs(out[0]) < 1e-12


def test_forward_single_qubit_matrix_oracle():
    params = vqc.VqcParams(1, 1, np.array([[[np.pi / 2, 0.0]]]))
    out = vqc.forward(np.zeros(1), params)
    state = rz_matrix(0) @ rx_matrix(np.pi / 2) @ rz_matrix(0) @ rx_matrix(0) @ H @ np.array([1, 0])
    expected = abs(state[0]) ** 2 - abs(state[1]) ** 2
    assert abs(out[0] - expected) < 1e-12


def test_forward_outputs_bounded():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        layers = int(rng.integers(1, 3))
        params = vqc.VqcParams(n, layers, rng.uniform(-np.pi, np.pi, (layers, n, 2)))
        out = vqc.forward(rng.uniform(-np.pi / 2, np.pi / 2, n), params)
        assert np.all(out >= -1.0 - 1e-12) and np.all(out <= 1.0 + 1e-12)


def test_forward_shape_error():
    with pytest.raises(ValueError):
        vqc.forward(np.zeros(3), vqc.VqcParams.zeros(2, 1))


def test_params_validation():
    with pytest.raises(ValueError):
        vqc.VqcParams(2, 1, np.zeros((2, 2, 2)))  # layer count mismatch
    with pytest.raises(ValueError):
        vqc.VqcParams(2, 0, np.zeros((0, 2, 2)))
    with pytest.raises(ValueError):
        vqc.VqcParams(1, 1, np.full((1, 1, 2), np.nan))


def test_shift_rule_identity_for_plain_rx():
    # <Z> of Rx(t)|0> is cos(t); the shift rule must give -sin exactly
    t = np.pi / 3
    up = sv.expectation_z(sv.apply_rx(sv.zero_state(1), 0, t + np.pi / 2), 0)
    dn = sv.expectation_z(sv.apply_rx(sv.zero_state(1), 0, t - np.pi / 2), 0)
    assert abs((up - dn) / 2 - (-np.sin(t))) < 1e-12


def test_zero_upstream_gives_zero_gradients():
    params = vqc.VqcParams.random(3, 2, np.random.default_rng(8))
    gt, go = vqc.parameter_shift_gradient(np.full(3, 0.3), params, np.zeros(3))
    assert np.all(gt == 0.0) and np.all(go == 0.0)


def test_gradient_matches_finite_difference():
    rng = np.random.default_rng(9)
    eps = 1e-6
    for _ in range(5):
        n, layers = 3, 2
        params = vqc.VqcParams.random(n, layers, rng, scale=0.7)
        omega = rng.uniform(-np.pi / 2, np.pi / 2, n)
        upstream = rng.normal(size=n)

        def scalar(om, th):
            return float(upstream @ vqc.forward(om, vqc.VqcParams(n, layers, th)))

        gt, go = vqc.parameter_shift_gradient(omega, params, upstream)
        for flat in range(params.theta.size):
            t1, t2 = params.theta.copy(), params.theta.copy()
            t1.flat[flat] += eps
            t2.flat[flat] -= eps
            fd = (scalar(omega, t1) - scalar(omega, t2)) / (2 * eps)
            assert abs(gt.flat[flat] - fd) < 5e-9
        for q in range(n):
            o1, o2 = omega.copy(), omega.copy()
            o1[q] += eps
            o2[q] -= eps
            fd = (scalar(o1, params.theta) - scalar(o2, params.theta)) / (2 * eps)
            assert abs(go[q] - fd) < 5e-9


def test_gradient_linear_in_upstream():
    params = vqc.VqcParams.random(2, 2, np.random.default_rng(10))
    omega = np.array([0.4, -0.9])
    u1, u2 = np.array([1.0, -0.5]), np.array([0.2, 0.8])
    a, b = 1.7, -0.3
    gt1, go1 = vqc.parameter_shift_gradient(omega, params, u1)
    gt2, go2 = vqc.parameter_shift_gradient(omega, params, u2)
    gt, go = vqc.parameter_shift_gradient(omega, params, a * u1 + b * u2)
    assert np.allclose(gt, a * gt1 + b * gt2, atol=1e-10)
    assert np.allclose(go, a * go1 + b * go2, atol=1e-10)


def test_gradient_deterministic_bitwise():
    params = vqc.VqcParams.random(3, 1, np.random.default_rng(11))
    omega = np.array([0.1, 0.2, 0.3])
    upstream = np.array([1.0, 2.0, 3.0])
    a = vqc.parameter_shift_gradient(omega, params, upstream)
    b = vqc.parameter_shift_gradient(omega, params, upstream)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_gradient_shape_errors():
    params = vqc.VqcParams.zeros(2, 1)
    with pytest.raises(ValueError):
        vqc.parameter_shift_gradient(np.zeros(3), params, np.zeros(2))
    with pytest.raises(ValueError):
        vqc.parameter_shift_gradient(np.zeros(2), params, np.zeros(3))


def test_single_qubit_circuit_has_no_entangler():
    # n=1 must not attempt any CNOT; forward simply works
    params = vqc.VqcParams.random(1, 3, np.random.default_rng(12))
    out = vqc.forward(np.array([0.25]), params)
    assert out.shape == (1,) and -1.0 <= out[0] <= 1.0
