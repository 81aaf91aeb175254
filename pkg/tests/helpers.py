"""Shared oracles for the test suite."""
import numpy as np

from radar_e2e.channel import (balanced_labels, draw_coherent_weibull, draw_colored_noise,
                               draw_target_gain, rng_stream, simulate_returns)
from radar_e2e.config import stepped_frequency
from radar_e2e.net import (NetworkParams, backward, forward, receiver_network, transmit,
                           transmit_backward, transmit_forward, transmitter_network)
from radar_e2e.signal import EnvModel, c2r, r2c
from radar_e2e.train import PolicyConfig, instantaneous_losses, sample_policy

FD_STEP = 1e-6


def central_diff(f, v, d, h=FD_STEP):
    return (f(v + h * d) - f(v - h * d)) / (2 * h)


def rel_err(a, b, floor=1e-12):
    return abs(a - b) / max(abs(a), abs(b), floor)


def reference_forward(params: NetworkParams, r0):
    """Straight-line re-implementation of the layer recursion."""
    r = np.array(r0, dtype=float)
    for layer in params.layers:
        pre = np.array([sum(layer.W[i, j] * r[j] for j in range(len(r))) + layer.b[i]
                        for i in range(len(layer.b))])
        if layer.activation == "tanh":
            r = np.tanh(pre)
        elif layer.activation == "sigmoid":
            r = 1.0 / (1.0 + np.exp(-pre))
        else:
            r = pre
    return r


def perturbed_params(params: NetworkParams, rng, scale=0.5):
    """Glorot weights plus random biases, so bias gradients are exercised off zero."""
    v = params.flat()
    return params.with_flat(v + scale * rng.standard_normal(v.size) * (v == 0))


def receiver_probe(rng, K=8, M=10):
    """Directional FD check of backward for loss = w * p on the receiver."""
    theta = perturbed_params(receiver_network(K, M, rng), rng)
    r0 = rng.standard_normal(2 * K)
    w = rng.standard_normal()
    trace = forward(theta, r0)
    grads, d_in = backward(theta, trace, np.array([w]))
    d = rng.standard_normal(theta.flat().size)

    def loss(v):
        return w * forward(theta.with_flat(v), r0)[-1][0]

    e_param = rel_err(grads.flat() @ d, central_diff(loss, theta.flat(), d))
    dr = rng.standard_normal(2 * K)
    e_input = rel_err(d_in @ dr, central_diff(lambda r: w * forward(theta, r)[-1][0], r0, dr))
    return max(e_param, e_input)


def _tx_loss(c, a):
    """A smooth nonlinear scalar function of the transmitted waveform."""
    def f(y):
        return float(np.real(np.vdot(c, y)) + np.abs(np.vdot(a, y)) ** 2)

    def grad_real(y):
        # d/d(C2R y) of Re(c^H y) + |a^H y|^2
        s = np.vdot(a, y)
        return c2r(c + 2 * a * s)
    return f, grad_real


def transmitter_probe(rng, K=8):
    """Directional FD check through C2R, the network, R2C and normalization."""
    theta = perturbed_params(transmitter_network(K, rng), rng)
    x = rng.standard_normal(K) + 1j * rng.standard_normal(K)
    c = rng.standard_normal(K) + 1j * rng.standard_normal(K)
    a = rng.standard_normal(K) + 1j * rng.standard_normal(K)
    f, g = _tx_loss(c, a)
    tt = transmit_forward(theta, x)
    grads = transmit_backward(theta, tt, g(tt.y))
    d = rng.standard_normal(theta.flat().size)
    fd = central_diff(lambda v: f(transmit(theta.with_flat(v), x)), theta.flat(), d)
    return rel_err(grads.flat() @ d, fd)


# acceptance bookkeeping: criterion number -> one summary line
ACCEPTANCE = {}


def report(n: int, passed: bool, detail: str) -> str:
    line = f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)
    return line


def desk_run(config_path, seed: int, out_dir):
    """Run one configured experiment at the given seed; returns its manifest."""
    from radar_e2e.cli import run_experiment
    from radar_e2e.config import load_config
    cfg = load_config(config_path)
    cfg.seed = seed
    return run_experiment(cfg, out_dir)


def policy_gradient_vs_fd(seed=0, Q=1_000_000, K=2, h=1e-5):
    """Score-function estimate, its per-component standard error, and a
    common-random-numbers central difference of the smoothed objective."""
    policy = PolicyConfig(0.3)
    env = EnvModel.uniform(K=K)
    x = stepped_frequency(K)
    theta_T = transmitter_network(K, rng_stream(seed, 1))
    theta_R = receiver_network(K, 10, rng_stream(seed, 2))   # frozen random receiver
    tt = transmit_forward(theta_T, x)
    # Jacobian of the policy mean (C2R coordinates) w.r.t. theta_T, row by row
    J = np.stack([transmit_backward(theta_T, tt, e).flat() for e in np.eye(2 * K)])
    # weights fed by zero input chips have an identically zero gradient
    live = np.linalg.norm(J, axis=0) > 1e-12 * np.abs(J).max()

    rng = rng_stream(seed, 3)
    y_q, score = sample_policy(tt.y, policy, rng, Q)
    m = balanced_labels(Q, rng)
    l = instantaneous_losses(theta_R, simulate_returns(y_q, m, env, rng), m)
    contrib = l[:, None] * score
    est = contrib.mean(0) @ J
    se = np.sqrt(np.einsum("ip,ij,jp->p", J, np.cov(contrib.T) / Q, J))

    rng = rng_stream(seed, 4)
    eps = np.sqrt(policy.sigma_sq) * rng.standard_normal((Q, 2 * K))
    m2 = balanced_labels(Q, rng)
    alpha = draw_target_gain(env, rng, Q)
    gam = draw_coherent_weibull(env.shape_beta, np.asarray(env.clutter_powers), rng,
                                (Q, 2 * K - 2))
    noise = draw_colored_noise(env.noise_chol, rng, Q)

    def smoothed(v):
        yq = r2c(c2r(transmit(theta_T.with_flat(v), x)) + eps)
        z = simulate_returns(yq, m2, env, None, alpha=alpha, gammas=gam, noise=noise)
        return instantaneous_losses(theta_R, z, m2).mean()

    v0 = theta_T.flat()
    fd = np.array([(smoothed(v0 + h * e) - smoothed(v0 - h * e)) / (2 * h)
                   for e in np.eye(v0.size)])
    return est[live], se[live], fd[live]
