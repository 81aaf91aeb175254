"""Alternating end-to-end training.

The receiver is fit by SGD on the empirical cross-entropy with the waveform
frozen; the transmitter is updated with the score-function (REINFORCE)
estimator under a Gaussian exploration policy with the receiver frozen,
using per-sample losses fed back from the receiver.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import LabeledBatch, as_mixture, generate_batch, rng_stream
from .net import (NetworkParams, backward, forward, receiver_network,
                  sgd_step, transmit, transmit_backward, transmit_forward, transmitter_network)
from .signal import c2r, r2c, scnr

log = logging.getLogger(__name__)

P_CLAMP = 1e-12

# stream ids used by alternate_training
STREAM_INIT_TX, STREAM_INIT_RX, STREAM_RX, STREAM_TX, STREAM_VAL = 1, 2, 3, 4, 5


class ProtocolError(ValueError):
    pass


@dataclass
class PolicyConfig:
    sigma_sq: float = 0.3

    def __post_init__(self):
        if not self.sigma_sq > 0:
            raise ValueError("sigma_sq must be > 0")


@dataclass
class TrainConfig:
    eta: float = 1e-3
    eta_tx: Optional[float] = None     # transmitter rate; defaults to eta
    Q_R: int = 50_000
    Q_T: int = 400_000
    rx_steps: int = 8
    tx_steps: int = 1
    outer_iters: int = 20
    stop_tol: float = 1e-3             # <= 0 disables the plateau stop
    Q_val: int = 20_000
    sample_budget: Optional[int] = None
    loss_baseline: bool = False

    def __post_init__(self):
        if not self.eta > 0 or (self.eta_tx is not None and not self.eta_tx > 0):
            raise ValueError("learning rates must be > 0")
        for name in ("Q_R", "Q_T", "Q_val"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("rx_steps", "tx_steps", "outer_iters"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def lr_tx(self) -> float:
        return self.eta if self.eta_tx is None else self.eta_tx

    def capped_steps(self, steps: int, Q: int) -> int:
        if self.sample_budget is None:
            return steps
        return min(steps, self.sample_budget // Q)


def _clamped(p):
    return np.clip(p, P_CLAMP, 1 - P_CLAMP)


def cross_entropy(p, m) -> np.ndarray:
    """Per-sample loss ``-[m log p + (1-m) log(1-p)]`` with clamped ``p``."""
    p = _clamped(np.asarray(p, dtype=float))
    m = np.asarray(m)
    return -(m * np.log(p) + (1 - m) * np.log1p(-p))


def instantaneous_losses(theta_R: NetworkParams, z, m) -> np.ndarray:
    p = forward(theta_R, c2r(z))[-1][..., 0]
    return cross_entropy(p, m)


def receiver_loss_and_grad(theta_R: NetworkParams, batch: LabeledBatch):
    """Mean cross-entropy over the batch and its gradient.

    The gradient is pushed through the output sigmoid in closed form,
    ``dL/dlogit = (p - m)/Q``, which equals chaining dL/dp through the sigmoid
    but does not vanish when ``p`` rounds to 0 or 1.
    """
    Q = len(batch)
    if Q == 0:
        raise ValueError("empty batch")
    trace = forward(theta_R, c2r(batch.z))
    p = trace[-1][:, 0]
    m = np.asarray(batch.m, dtype=float)
    loss = float(np.mean(cross_entropy(p, m)))
    delta = ((p - m) / Q)[:, None]
    grads, _ = backward(theta_R, trace, delta, wrt="preactivation")
    return loss, grads


def train_receiver(theta_R: NetworkParams, theta_T: NetworkParams, x, envs, cfg: TrainConfig,
                   rng: np.random.Generator, steps: Optional[int] = None):
    """SGD on the receiver with the waveform ``transmit(theta_T, x)`` frozen.

    Each step draws a fresh balanced batch of ``Q_R`` returns.  Returns the
    updated parameters and the per-step training losses.
    """
    steps = cfg.capped_steps(cfg.rx_steps if steps is None else steps, cfg.Q_R)
    y = transmit(theta_T, x)
    losses = []
    for _ in range(steps):
        batch = generate_batch(y, cfg.Q_R, envs, True, rng)
        loss, grads = receiver_loss_and_grad(theta_R, batch)
        theta_R = sgd_step(theta_R, grads, cfg.eta)
        losses.append(loss)
    return theta_R, losses


def sample_policy(mean_y, policy: PolicyConfig, rng: np.random.Generator, size=None):
    """Draw ``y_q = mean + eps`` with ``eps ~ N(0, sigma^2 I)`` in C2R coordinates.

    Returns ``(y_q, score)`` where ``score = eps / sigma^2`` is the gradient of
    ``log pi`` with respect to the (real) mean.  No renormalization is applied.
    """
    mean_r = c2r(mean_y)
    shape = mean_r.shape if size is None else (size,) + mean_r.shape
    eps = np.sqrt(policy.sigma_sq) * rng.standard_normal(shape)
    return r2c(mean_r + eps), eps / policy.sigma_sq


def transmitter_grad(theta_T: NetworkParams, x, batch: LabeledBatch, policy: PolicyConfig,
                     loss_baseline: bool = False, tx_trace=None):
    """Score-function estimate of the gradient of the expected receiver loss.

    ``(1/Q) sum_q l_q (d mean/d theta)^T score_q``; the scores are recomputed
    from the sampled waveforms in ``batch.y`` and the current policy mean.
    """
    if batch.loss is None or batch.y is None:
        raise ProtocolError("transmitter batch needs sampled waveforms and receiver losses")
    tt = transmit_forward(theta_T, x) if tx_trace is None else tx_trace
    score = (c2r(batch.y) - c2r(tt.y)) / policy.sigma_sq
    l = np.asarray(batch.loss, dtype=float)
    if loss_baseline:
        l = l - l.mean()
    g_mean = (l @ score) / len(l)
    return transmit_backward(theta_T, tt, g_mean)


def train_transmitter(theta_T: NetworkParams, theta_R: NetworkParams, x, envs, cfg: TrainConfig,
                      policy: PolicyConfig, rng: np.random.Generator, steps: Optional[int] = None):
    """Policy-gradient SGD on the transmitter with the receiver frozen.

    Returns the updated parameters and the mean fed-back loss per step.
    """
    steps = cfg.capped_steps(cfg.tx_steps if steps is None else steps, cfg.Q_T)
    losses = []
    for _ in range(steps):
        tt = transmit_forward(theta_T, x)
        y_q, _ = sample_policy(tt.y, policy, rng, cfg.Q_T)
        batch = generate_batch(y_q, cfg.Q_T, envs, True, rng)
        batch.loss = instantaneous_losses(theta_R, batch.z, batch.m)
        grads = transmitter_grad(theta_T, x, batch, policy, cfg.loss_baseline, tx_trace=tt)
        theta_T = sgd_step(theta_T, grads, cfg.lr_tx)
        losses.append(float(batch.loss.mean()))
    return theta_T, losses


def heldout_loss(theta_R, theta_T, x, envs, Q: int, seed: int) -> float:
    """Receiver loss on a validation batch drawn from a fixed stream."""
    y = transmit(theta_T, x)
    batch = generate_batch(y, Q, envs, True, rng_stream(seed, STREAM_VAL))
    return float(np.mean(instantaneous_losses(theta_R, batch.z, batch.m)))


@dataclass
class TrainingResult:
    theta_T: NetworkParams
    theta_R: NetworkParams
    history: list = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return sum(1 for h in self.history if h["stage"] == "tx")


def alternate_training(cfg: TrainConfig, envs, x, seed: int, M: int = 10,
                       policy: Optional[PolicyConfig] = None, tx_output_activation="identity",
                       theta_T=None, theta_R=None) -> TrainingResult:
    """Alternate receiver and transmitter training for ``outer_iters`` rounds.

    Networks are initialized from dedicated streams of ``seed`` unless given.
    Each round runs the receiver stage then the transmitter stage; training
    stops early once the post-receiver held-out loss improves by less than
    ``stop_tol`` (relative) over the previous round.  History rows carry the
    round, stage, mean training loss, held-out loss and SCNR of the waveform.
    """
    policy = policy or PolicyConfig()
    x = np.asarray(x, dtype=complex)
    K = x.shape[-1]
    mix = as_mixture(envs)
    ref_env = mix[0][0]
    if theta_T is None:
        theta_T = transmitter_network(K, rng_stream(seed, STREAM_INIT_TX), tx_output_activation)
    if theta_R is None:
        theta_R = receiver_network(K, M, rng_stream(seed, STREAM_INIT_RX))
    rx_rng = rng_stream(seed, STREAM_RX)
    tx_rng = rng_stream(seed, STREAM_TX)

    def row(rnd, stage, losses):
        return {
            "round": rnd, "stage": stage,
            "mean_loss": float(np.mean(losses)) if len(losses) else float("nan"),
            "heldout_loss": heldout_loss(theta_R, theta_T, x, mix, cfg.Q_val, seed),
            "scnr": scnr(transmit(theta_T, x), ref_env),
        }

    history = [row(0, "init", [])]
    prev = None
    for rnd in range(1, cfg.outer_iters + 1):
        theta_R, rx_losses = train_receiver(theta_R, theta_T, x, mix, cfg, rx_rng)
        history.append(row(rnd, "rx", rx_losses))
        theta_T, tx_losses = train_transmitter(theta_T, theta_R, x, mix, cfg, policy, tx_rng)
        history.append(row(rnd, "tx", tx_losses))
        log.info("round %d: rx loss %.4f, held-out %.4f, scnr %.2f", rnd,
                 history[-2]["mean_loss"], history[-2]["heldout_loss"], history[-1]["scnr"])
        cur = history[-2]["heldout_loss"]
        if cfg.stop_tol > 0 and prev is not None and (prev - cur) < cfg.stop_tol * abs(prev):
            break
        prev = cur
    return TrainingResult(theta_T, theta_R, history)
