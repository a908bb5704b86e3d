"""End-to-end hybrid classifier.

Pipeline: dense input layer, Bernoulli spiking-ReLU bottleneck pooled over
time, dense feature layer, trainable projection squashed onto encoding
angles, small quantum circuit with per-qubit Z readout, dense head,
softmax. The `classical` head variant replaces the circuit with a
tanh-activated dense layer of the same width, keeping everything else
identical, as an ablation baseline.

`expected` mode replaces the stochastic spike path by its exact
expectation clip(ReLU(x) * dt, 0, 1), which makes the whole forward
deterministic and finite-difference checkable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spiking, vqc

# Probabilities are clamped away from {0, 1} before entering any log.
PROB_CLAMP = 1e-7
# Encoding angles are (pi/2) * tanh(projection), so they stay inside the
# open interval (-pi/2, pi/2).
ANGLE_SCALE = np.pi / 2.0

HEAD_KINDS = ("quantum", "classical")
MODES = ("stochastic", "expected")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(
                f"inconsistent dense shapes {self.weights.shape} / {self.bias.shape}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("dense parameters must be finite")

    @classmethod
    def init(cls, n_out: int, n_in: int, rng: np.random.Generator,
             scale: float | None = None) -> "DenseLayer":
        if scale is None:
            scale = 1.0 / np.sqrt(n_in)
        return cls(rng.normal(0.0, scale, size=(n_out, n_in)), np.zeros(n_out))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.weights @ x + self.bias


@dataclass(frozen=True)
class ModelConfig:
    in_dim: int = 784
    hidden_dim: int = 128
    feature_dim: int = 10
    n_qubits: int = 6
    n_layers: int = 2
    n_classes: int = 4
    T: int = 16
    dt: float = 1.0
    head_kind: str = "quantum"

    def __post_init__(self):
        for name in ("in_dim", "hidden_dim", "feature_dim", "n_qubits",
                     "n_layers", "n_classes", "T"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.head_kind not in HEAD_KINDS:
            raise ValueError(f"head_kind must be one of {HEAD_KINDS}")


@dataclass
class SpikingQuantumClassifier:
    config: ModelConfig
    l1: DenseLayer  # in_dim -> hidden_dim, feeds the spiking bottleneck
    l2: DenseLayer  # hidden_dim -> feature_dim
    pre_input: DenseLayer  # feature_dim -> n_qubits, squashed to angles
    circuit: vqc.VqcParams
    head: DenseLayer  # n_qubits -> n_classes
    sub: DenseLayer | None = None  # classical stand-in for the circuit
    seed: int = 0

    def __post_init__(self):
        c = self.config
        chain = [
            ("l1", self.l1, c.hidden_dim, c.in_dim),
            ("l2", self.l2, c.feature_dim, c.hidden_dim),
            ("pre_input", self.pre_input, c.n_qubits, c.feature_dim),
            ("head", self.head, c.n_classes, c.n_qubits),
        ]
        if c.head_kind == "classical":
            if self.sub is None:
                raise ValueError("classical head requires the sub layer")
            chain.append(("sub", self.sub, c.n_qubits, c.n_qubits))
        for name, layer, n_out, n_in in chain:
            if layer.weights.shape != (n_out, n_in):
                raise ValueError(
                    f"{name} weights {layer.weights.shape}, expected ({n_out}, {n_in})")
        if (self.circuit.n_qubits, self.circuit.n_layers) != (c.n_qubits, c.n_layers):
            raise ValueError("circuit size does not match the model config")

    @classmethod
    def build(cls, config: ModelConfig, rng: np.random.Generator | None = None,
              seed: int = 0) -> "SpikingQuantumClassifier":
        if rng is None:
            rng = np.random.default_rng(seed)
        c = config
        sub = None
        if c.head_kind == "classical":
            sub = DenseLayer.init(c.n_qubits, c.n_qubits, rng)
        return cls(
            config=c,
            l1=DenseLayer.init(c.hidden_dim, c.in_dim, rng),
            l2=DenseLayer.init(c.feature_dim, c.hidden_dim, rng),
            pre_input=DenseLayer.init(c.n_qubits, c.feature_dim, rng),
            circuit=vqc.VqcParams.random(c.n_qubits, c.n_layers, rng),
            head=DenseLayer.init(c.n_classes, c.n_qubits, rng),
            sub=sub,
            seed=seed,
        )

    def parameters(self) -> dict[str, np.ndarray]:
        """Live references to every trainable tensor, keyed by dotted name."""
        params = {
            "l1.weights": self.l1.weights, "l1.bias": self.l1.bias,
            "l2.weights": self.l2.weights, "l2.bias": self.l2.bias,
            "pre_input.weights": self.pre_input.weights,
            "pre_input.bias": self.pre_input.bias,
            "head.weights": self.head.weights, "head.bias": self.head.bias,
        }
        if self.config.head_kind == "quantum":
            params["circuit.theta"] = self.circuit.theta
        else:
            params["sub.weights"] = self.sub.weights
            params["sub.bias"] = self.sub.bias
        return params


@dataclass
class ForwardCache:
    """Intermediates retained for backward; tied to one model instance."""

    model_token: int
    mode: str
    image: np.ndarray
    z1: np.ndarray  # spiking pre-activations
    pooled: np.ndarray
    z2: np.ndarray  # feature-layer output
    tanh_pre: np.ndarray
    omega: np.ndarray
    hidden: np.ndarray  # circuit expvals, or tanh sub-layer output
    probs: np.ndarray


def softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


def forward(model: SpikingQuantumClassifier, image,
            rng: np.random.Generator | None = None,
            mode: str = "expected") -> tuple[np.ndarray, ForwardCache]:
    """Class probabilities and the cache needed by backward."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    c = model.config
    x = np.asarray(image, dtype=np.float64)
    if x.shape != (c.in_dim,):
        raise ValueError(f"image shape {x.shape}, expected ({c.in_dim},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("image must be finite")

    z1 = model.l1(x)
    if mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic mode needs an rng")
        train = spiking.spiking_relu_forward(z1, c.T, c.dt, rng)
        pooled = spiking.temporal_pool(train)
    else:
        pooled = spiking.spike_probability(z1, c.dt)
    z2 = model.l2(pooled)
    tanh_pre = np.tanh(model.pre_input(z2))
    omega = ANGLE_SCALE * tanh_pre
    if c.head_kind == "quantum":
        hidden = vqc.forward(omega, model.circuit)
    else:
        hidden = np.tanh(model.sub(omega))
    probs = softmax(model.head(hidden))
    cache = ForwardCache(
        model_token=id(model), mode=mode, image=x, z1=z1, pooled=pooled,
        z2=z2, tanh_pre=tanh_pre, omega=omega, hidden=hidden, probs=probs)
    return probs, cache


def backward(model: SpikingQuantumClassifier, cache: ForwardCache,
             target: int) -> dict[str, np.ndarray]:
    """Cross-entropy gradients for every trainable tensor.

    Analytic through the dense layers, squash, and surrogate spike path;
    parameter-shift through the circuit.
    """
    if cache.model_token != id(model):
        raise RuntimeError("cache does not belong to this model instance")
    c = model.config
    if not 0 <= target < c.n_classes:
        raise ValueError(f"target {target} out of range for {c.n_classes} classes")

    z = cache.probs
    gamma = np.zeros(c.n_classes)
    gamma[target] = 1.0
    zc = np.clip(z, PROB_CLAMP, 1.0 - PROB_CLAMP)
    inside = (z > PROB_CLAMP) & (z < 1.0 - PROB_CLAMP)
    dz = np.where(inside, -gamma / zc + (1.0 - gamma) / (1.0 - zc), 0.0)
    # Softmax Jacobian contracted with dz.
    dlogits = z * (dz - dz @ z)

    grads: dict[str, np.ndarray] = {
        "head.weights": np.outer(dlogits, cache.hidden),
        "head.bias": dlogits,
    }
    dhidden = model.head.weights.T @ dlogits
    if c.head_kind == "quantum":
        grad_theta, domega = vqc.parameter_shift_gradient(
            cache.omega, model.circuit, dhidden)
        grads["circuit.theta"] = grad_theta
    else:
        dsub = dhidden * (1.0 - cache.hidden ** 2)
        grads["sub.weights"] = np.outer(dsub, cache.omega)
        grads["sub.bias"] = dsub
        domega = model.sub.weights.T @ dsub

    dpre = domega * ANGLE_SCALE * (1.0 - cache.tanh_pre ** 2)
    grads["pre_input.weights"] = np.outer(dpre, cache.z2)
    grads["pre_input.bias"] = dpre
    dz2 = model.pre_input.weights.T @ dpre
    grads["l2.weights"] = np.outer(dz2, cache.pooled)
    grads["l2.bias"] = dz2
    dpooled = model.l2.weights.T @ dz2
    # The expected rate clip(ReLU(z1) dt, 0, 1) is flat where saturated.
    unsaturated = np.maximum(cache.z1, 0.0) * c.dt < 1.0
    dz1 = spiking.rate_backward(dpooled, cache.z1) * c.dt * unsaturated
    grads["l1.weights"] = np.outer(dz1, cache.image)
    grads["l1.bias"] = dz1
    return grads


def predict(model: SpikingQuantumClassifier, image) -> int:
    """Argmax class under expected-mode probabilities; ties go to the
    smallest index."""
    probs, _ = forward(model, image, mode="expected")
    return int(np.argmax(probs))


def classical_head_forward(model: SpikingQuantumClassifier, image) -> np.ndarray:
    """Expected-mode probabilities of the classical-head ablation variant."""
    if model.config.head_kind != "classical":
        raise ValueError("model was not built with the classical head")
    probs, _ = forward(model, image, mode="expected")
    return probs
