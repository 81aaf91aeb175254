"""Stochastic radar channel: Swerling I target, coherent Weibull clutter, colored noise."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import gamma as gamma_fn

from .signal import BETA_RANGE, EnvModel, ParameterError, shift_offsets, shifted_stack


class ConfigurationError(ValueError):
    pass


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent, reproducible generator for a ``(seed, stream_id)`` pair."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class LabeledSample:
    m: int
    z: np.ndarray
    y_sampled: Optional[np.ndarray] = None
    loss: Optional[float] = None


@dataclass
class LabeledBatch:
    """Column-stored batch of labeled samples.

    ``y`` is the per-sample transmitted waveform (present for transmitter
    training) and ``loss`` the per-sample receiver loss once filled in.
    """

    m: np.ndarray
    z: np.ndarray
    y: Optional[np.ndarray] = None
    loss: Optional[np.ndarray] = None
    env_index: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.m)

    def __getitem__(self, i) -> LabeledSample:
        return LabeledSample(
            m=int(self.m[i]), z=self.z[i],
            y_sampled=None if self.y is None else self.y[i],
            loss=None if self.loss is None else float(self.loss[i]),
        )


def complex_normal(rng: np.random.Generator, size, var: float = 1.0) -> np.ndarray:
    """CN(0, var): real and imaginary parts each N(0, var/2)."""
    s = np.sqrt(var / 2.0)
    return s * rng.standard_normal(size) + 1j * s * rng.standard_normal(size)


def draw_target_gain(env: EnvModel, rng: np.random.Generator, size=None):
    return complex_normal(rng, size, env.sigma_alpha_sq)


def weibull_scale(beta: float, power) -> np.ndarray:
    """Scale ``b`` with ``E[r^2] = b^2 Gamma(1 + 2/beta) = power``."""
    return np.sqrt(np.asarray(power, dtype=float) / gamma_fn(1.0 + 2.0 / beta))


def draw_coherent_weibull(beta: float, power, rng: np.random.Generator, size=None):
    """Weibull amplitude (shape ``beta``, mean-square ``power``) times a uniform phase.

    ``power`` may be an array broadcastable to ``size``.
    """
    if not BETA_RANGE[0] <= beta <= BETA_RANGE[1]:
        raise ParameterError(f"beta={beta} outside {BETA_RANGE}")
    if np.any(np.asarray(power) < 0):
        raise ParameterError("power must be >= 0")
    # Weibull(beta) amplitude as E**(1/beta) with E ~ Exp(1)
    r = weibull_scale(beta, power) * rng.standard_exponential(size) ** (1.0 / beta)
    phi = rng.uniform(0.0, 2 * np.pi, size)
    return r * np.cos(phi) + 1j * (r * np.sin(phi))


def draw_colored_noise(chol_n: np.ndarray, rng: np.random.Generator, size=None, w=None):
    """``L w`` with ``w`` i.i.d. CN(0, 1); ``size`` is the batch count (rows)."""
    K = chol_n.shape[0]
    if w is None:
        shape = (K,) if size is None else (size, K)
        w = complex_normal(rng, shape)
    return np.asarray(w) @ chol_n.T


def simulate_returns(y, m, env: EnvModel, rng: np.random.Generator, *,
                     alpha=None, gammas=None, noise=None) -> np.ndarray:
    """Received vectors for labels ``m`` (shape ``(Q,)``).

    ``y`` is either one waveform ``(K,)`` shared by all samples or ``(Q, K)``.
    ``alpha``, ``gammas`` (``(Q, 2K-2)``) and ``noise`` (``(Q, K)``) override
    the random draws; all draws are made for every sample regardless of label.
    """
    m = np.atleast_1d(np.asarray(m))
    Q = m.shape[0]
    y = np.asarray(y, dtype=complex)
    K = y.shape[-1]
    n_cells = 2 * K - 2
    if alpha is None:
        alpha = draw_target_gain(env, rng, Q)
    if gammas is None:
        gammas = draw_coherent_weibull(env.shape_beta, np.asarray(env.clutter_powers), rng,
                                       (Q, n_cells))
    if noise is None:
        noise = draw_colored_noise(env.noise_chol, rng, Q)
    alpha = np.broadcast_to(alpha, (Q,))
    gammas = np.asarray(gammas).reshape(Q, n_cells)
    if y.ndim == 1:
        z = gammas @ shifted_stack(y)
    else:
        # sum_k gamma_k J_k y_q without materializing the shifted copies
        z = np.zeros((Q, K), dtype=complex)
        for j, k in enumerate(shift_offsets(K)):
            g = gammas[:, j:j + 1]
            if k > 0:
                z[:, k:] += g * y[:, :K - k]
            else:
                z[:, :K + k] += g * y[:, -k:]
    z += (m * alpha)[:, None] * y
    z += noise
    return z


def simulate_return(y, m: int, env: EnvModel, rng: np.random.Generator, *,
                    alpha=None, gammas=None, noise=None) -> LabeledSample:
    """One draw of ``z = m*alpha*y + sum_k gamma_k J_k y + n``."""
    if m not in (0, 1):
        raise ValueError("m must be 0 or 1")
    K = np.shape(y)[-1]
    z = simulate_returns(
        y, [m], env, rng,
        alpha=None if alpha is None else np.atleast_1d(alpha),
        gammas=None if gammas is None else np.reshape(gammas, (1, 2 * K - 2)),
        noise=None if noise is None else np.reshape(noise, (1, K)),
    )[0]
    return LabeledSample(m=m, z=z)


EnvSpec = Union[EnvModel, Sequence]


def as_mixture(envs: EnvSpec) -> list:
    """Normalize an env argument to ``[(EnvModel, weight), ...]``."""
    if isinstance(envs, EnvModel):
        return [(envs, 1.0)]
    mix = [(e, 1.0) if isinstance(e, EnvModel) else (e[0], float(e[1])) for e in envs]
    if not mix:
        raise ConfigurationError("empty environment list")
    total = sum(w for _, w in mix)
    if any(w < 0 for _, w in mix) or abs(total - 1.0) > 1e-9:
        raise ConfigurationError(f"mixture weights must be >= 0 and sum to 1, got {total}")
    return mix


def balanced_labels(Q: int, rng: np.random.Generator) -> np.ndarray:
    """Exactly ceil(Q/2) zeros and floor(Q/2) ones, shuffled."""
    m = np.zeros(Q, dtype=np.int64)
    m[(Q + 1) // 2:] = 1
    return rng.permutation(m)


def generate_batch(y, Q: int, envs: EnvSpec, balanced: bool, rng: np.random.Generator,
                   labels=None) -> LabeledBatch:
    """Draw ``Q`` labeled returns from a (possibly mixed) environment.

    Environment index is drawn per sample by weight, then the label, then the
    channel.  ``y`` may be a shared ``(K,)`` waveform or per-sample ``(Q, K)``.
    """
    if Q < 1:
        raise ConfigurationError("Q must be >= 1")
    mix = as_mixture(envs)
    y = np.asarray(y, dtype=complex)
    if len(mix) == 1:
        idx = np.zeros(Q, dtype=np.int64)
    else:
        idx = rng.choice(len(mix), size=Q, p=[w for _, w in mix])
    if labels is not None:
        m = np.asarray(labels, dtype=np.int64)
    elif balanced:
        m = balanced_labels(Q, rng)
    else:
        # prior is taken per selected environment
        p1 = np.array([e.prior_p1 for e, _ in mix])[idx]
        m = (rng.random(Q) < p1).astype(np.int64)
    z = np.empty((Q, y.shape[-1]), dtype=complex)
    for j, (env, _) in enumerate(mix):
        sel = np.flatnonzero(idx == j)
        if sel.size == 0:
            continue
        yj = y if y.ndim == 1 else y[sel]
        z[sel] = simulate_returns(yj, m[sel], env, rng)
    return LabeledBatch(m=m, z=z, y=None if y.ndim == 1 else y, env_index=idx)
