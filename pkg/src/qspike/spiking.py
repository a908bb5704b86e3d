"""Random-neural-network spike dynamics.

Two paths live here. The event-driven Gelenbe simulator is the faithful
continuous-time Markov chain (competing exponential clocks, excitatory and
inhibitory spikes, probabilistic routing); it is used for validation and
demos. The trainable layer path is the discrete-time Bernoulli
spiking-ReLU with temporal pooling, whose expectation is the clipped ReLU
rate, plus its straight-through surrogate gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class RoutingError(ValueError):
    """A routing row violates the conservation rule sum(p+) + sum(p-) + d = 1."""


class DeadlockError(RuntimeError):
    """No transition is enabled: all external rates zero and no excited neuron."""


ROUTING_TOL = 1e-9


@dataclass
class GelenbeNetwork:
    """Rates and routing of the spiking Markov chain.

    mu[k]: firing rate of neuron k while excited. lambda_plus / lambda_minus:
    external excitatory / inhibitory Poisson arrival rates. p_plus / p_minus:
    n x n spike routing probabilities, d: per-neuron departure probability.
    """

    mu: np.ndarray
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    d: np.ndarray
    _route_cum: np.ndarray | None = field(default=None, init=False, repr=False,
                                          compare=False)

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.lambda_plus = np.asarray(self.lambda_plus, dtype=np.float64)
        self.lambda_minus = np.asarray(self.lambda_minus, dtype=np.float64)
        self.p_plus = np.asarray(self.p_plus, dtype=np.float64)
        self.p_minus = np.asarray(self.p_minus, dtype=np.float64)
        self.d = np.asarray(self.d, dtype=np.float64)
        n = self.n
        for name in ("mu", "lambda_plus", "lambda_minus", "d"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")
        for name in ("p_plus", "p_minus"):
            if getattr(self, name).shape != (n, n):
                raise ValueError(f"{name} must have shape ({n}, {n})")
        for name in ("mu", "lambda_plus", "lambda_minus", "p_plus", "p_minus", "d"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} must be finite and nonnegative")

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    def routing_cumulative(self) -> np.ndarray:
        """Per-neuron cumulative routing mass over [p+ row, p- row, d]."""
        if self._route_cum is None:
            mass = np.concatenate(
                [self.p_plus, self.p_minus, self.d[:, None]], axis=1)
            self._route_cum = np.cumsum(mass, axis=1)
        return self._route_cum


@dataclass
class NeuronState:
    """Nonnegative integer excitation levels alpha_k."""

    alpha: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.int64)
        if self.alpha.ndim != 1 or np.any(self.alpha < 0):
            raise ValueError("alpha must be a 1-d nonnegative integer array")


def validate_routing(net: GelenbeNetwork) -> None:
    """Check the per-neuron conservation rule and the no-self-loop convention."""
    diag_p = np.diagonal(net.p_plus)
    diag_m = np.diagonal(net.p_minus)
    for k in range(net.n):
        if diag_p[k] != 0.0 or diag_m[k] != 0.0:
            raise RoutingError(f"neuron {k} routes to itself")
    sums = net.p_plus.sum(axis=1) + net.p_minus.sum(axis=1) + net.d
    for k in range(net.n):
        if abs(sums[k] - 1.0) > ROUTING_TOL:
            raise RoutingError(
                f"neuron {k}: routing mass sums to {sums[k]!r}, expected 1")


def gelenbe_step(net: GelenbeNetwork, state: NeuronState,
                 rng: np.random.Generator) -> tuple[NeuronState, float]:
    """Execute one Markov-chain event in place; returns (state, elapsed time).

    Competing exponential clocks: external excitatory arrival (rate
    lambda_plus[k]), external inhibitory arrival (rate lambda_minus[k]),
    and firing of each excited neuron (rate mu[k] iff alpha[k] > 0). An
    inhibitory spike at an empty neuron has no effect. A firing decrements
    the firer and routes one spike per the p+/p-/d row.
    """
    alpha = state.alpha
    n = net.n
    rates = np.concatenate([
        net.lambda_plus,
        net.lambda_minus,
        np.where(alpha > 0, net.mu, 0.0),
    ])
    total = float(rates.sum())
    if total <= 0.0:
        raise DeadlockError("no enabled transition: zero rates, no excited neuron")
    cum = np.cumsum(rates)
    pick = int(np.searchsorted(cum, rng.random() * total, side="right"))
    pick = min(pick, 3 * n - 1)
    k = pick % n
    kind = pick // n
    if kind == 0:
        alpha[k] += 1
    elif kind == 1:
        if alpha[k] > 0:
            alpha[k] -= 1
    else:
        alpha[k] -= 1
        row = net.routing_cumulative()[k]
        dest = int(np.searchsorted(row, rng.random() * row[-1], side="right"))
        dest = min(dest, 2 * n)
        if dest < n:
            alpha[dest] += 1
        elif dest < 2 * n and alpha[dest - n] > 0:
            alpha[dest - n] -= 1
        # dest == 2n: spike departs the network
    elapsed = float(rng.exponential(1.0 / total))
    return state, elapsed


def gelenbe_run(net: GelenbeNetwork, state: NeuronState, n_events: int,
                rng: np.random.Generator) -> float:
    """Run n_events steps in place; returns total elapsed time."""
    t = 0.0
    for _ in range(n_events):
        _, dt = gelenbe_step(net, state, rng)
        t += dt
    return t


@dataclass
class SpikeTrain:
    """counts[t, u]: spikes emitted by unit u in step t, each step dt long."""

    counts: np.ndarray
    dt: float

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] < 1:
            raise ValueError("counts must be (T, U) with T >= 1")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


def spike_probability(potentials: np.ndarray, dt: float) -> np.ndarray:
    """Per-step Bernoulli spike probability: clip(ReLU(x) * dt, 0, 1).

    This is also the exact expectation of the pooled rate, so the expected
    forward mode of the full model evaluates it directly.
    """
    pot = np.asarray(potentials, dtype=np.float64)
    if not np.all(np.isfinite(pot)):
        raise ValueError("potentials must be finite")
    return np.clip(np.maximum(pot, 0.0) * dt, 0.0, 1.0)


def spiking_relu_forward(potentials, T: int, dt: float,
                         rng: np.random.Generator) -> SpikeTrain:
    """Bernoulli spike train: P(spike at t, u) = clip(ReLU(x_u) * dt, 0, 1)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    p = spike_probability(potentials, dt)
    counts = (rng.random((T, p.shape[0])) < p).astype(np.int64)
    return SpikeTrain(counts=counts, dt=dt)


def temporal_pool(train: SpikeTrain) -> np.ndarray:
    """Per-unit mean spike count over time."""
    return train.counts.mean(axis=0)


def rate_backward(upstream, potentials) -> np.ndarray:
    """Straight-through surrogate: upstream masked by ReLU'(potential).

    The stochastic spike path is not differentiable; its expectation
    ReLU(x) * dt is, and this is that derivative's mask (the dt factor and
    the saturation cut of the clip are applied by the caller, which knows
    them).
    """
    up = np.asarray(upstream, dtype=np.float64)
    pot = np.asarray(potentials, dtype=np.float64)
    if up.shape != pot.shape:
        raise ValueError(f"shape mismatch: {up.shape} vs {pot.shape}")
    return up * (pot > 0.0)
