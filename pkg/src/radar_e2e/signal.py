"""Linear-algebra primitives for the radar signal model.

Waveforms and covariance matrices are plain complex numpy arrays
(shape ``(K,)`` and ``(K, K)``).  Clutter powers are indexed by range
cell ``k = -K+1, ..., -1, 1, ..., K-1`` in ascending order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg

BETA_RANGE = (0.25, 2.0)
NORM_TOL = 1e-12
REG_FACTOR = 1e-12


class InvalidShiftError(ValueError):
    pass


class DimensionError(ValueError):
    pass


class ConditioningError(ArithmeticError):
    pass


class ParameterError(ValueError):
    pass


def shift_offsets(K: int) -> np.ndarray:
    """Range-cell offsets ``-K+1..K-1`` without zero, ascending."""
    return np.array([k for k in range(-K + 1, K) if k != 0], dtype=int)


def shift_apply(y, k: int) -> np.ndarray:
    """Return ``J_k y`` where ``[J_k]_{i,j} = 1`` iff ``i - j == k``.

    Works on the last axis, so a batch of waveforms ``(Q, K)`` is shifted row-wise.
    """
    y = np.asarray(y)
    K = y.shape[-1]
    if abs(k) > K - 1:
        raise InvalidShiftError(f"shift {k} out of range for K={K}")
    out = np.zeros_like(y)
    if k >= 0:
        out[..., k:] = y[..., : K - k]
    else:
        out[..., : K + k] = y[..., -k:]
    return out


def shifted_stack(y) -> np.ndarray:
    """All ``J_k y`` for the 2K-2 nonzero offsets, shape ``(..., 2K-2, K)``."""
    y = np.asarray(y)
    return np.stack([shift_apply(y, k) for k in shift_offsets(y.shape[-1])], axis=-2)


@dataclass(frozen=True)
class EnvModel:
    """Channel statistics for one environment.

    ``clutter_powers`` holds the per-cell powers in ascending offset order.
    """

    sigma_alpha_sq: float
    clutter_powers: tuple
    shape_beta: float
    sigma_n_sq: float
    rho: float
    prior_p1: float = 0.5
    K: int = field(init=False)

    def __post_init__(self):
        powers = tuple(float(p) for p in self.clutter_powers)
        object.__setattr__(self, "clutter_powers", powers)
        if len(powers) % 2:
            raise DimensionError("clutter_powers must have even length 2K-2")
        object.__setattr__(self, "K", len(powers) // 2 + 1)
        if self.sigma_alpha_sq < 0:
            raise ParameterError("sigma_alpha_sq must be >= 0")
        if any(p < 0 for p in powers):
            raise ParameterError("clutter powers must be >= 0")
        if not BETA_RANGE[0] <= self.shape_beta <= BETA_RANGE[1]:
            raise ParameterError(f"shape_beta={self.shape_beta} outside {BETA_RANGE}")
        if self.sigma_n_sq <= 0:
            raise ParameterError("sigma_n_sq must be > 0")
        if not 0 <= self.rho < 1:
            raise ParameterError(f"rho={self.rho} must lie in [0, 1)")
        if not 0 < self.prior_p1 < 1:
            raise ParameterError("prior_p1 must lie in (0, 1)")

    @classmethod
    def uniform(cls, K: int = 8, sigma_alpha_sq: float = 50.0, clutter_power: float = 1 / 7,
                shape_beta: float = 2.0, sigma_n_sq: float = 1.0, rho: float = 0.4,
                prior_p1: float = 0.5) -> "EnvModel":
        """Environment with the same clutter power in every cell (defaults: paper setup)."""
        return cls(sigma_alpha_sq, (clutter_power,) * (2 * K - 2), shape_beta,
                   sigma_n_sq, rho, prior_p1)

    @cached_property
    def noise_cov(self) -> np.ndarray:
        return noise_covariance(self.sigma_n_sq, self.rho, self.K)

    @cached_property
    def noise_chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.noise_cov)


def noise_covariance(sigma_n_sq: float, rho: float, K: int) -> np.ndarray:
    """Toeplitz covariance ``sigma_n_sq * rho**|i-j|``."""
    if sigma_n_sq <= 0:
        raise ParameterError("sigma_n_sq must be > 0")
    if not 0 <= rho < 1:
        raise ParameterError(f"rho={rho} gives a non-PD covariance; need 0 <= rho < 1")
    lags = np.abs(np.subtract.outer(np.arange(K), np.arange(K)))
    return (sigma_n_sq * float(rho) ** lags).astype(complex)


def clutter_covariance(y, env: EnvModel) -> np.ndarray:
    """Sum over cells of ``sigma_ck^2 (J_k y)(J_k y)^H``."""
    y = np.asarray(y, dtype=complex)
    K = y.shape[-1]
    if len(env.clutter_powers) != 2 * K - 2:
        raise DimensionError(
            f"waveform length {K} needs {2 * K - 2} clutter powers, got {len(env.clutter_powers)}")
    S = shifted_stack(y)  # (2K-2, K)
    w = np.asarray(env.clutter_powers)
    return (S.T * w) @ S.conj()


def total_covariance(y, env: EnvModel) -> np.ndarray:
    return clutter_covariance(y, env) + env.noise_cov


def _regularized_cho(omega: np.ndarray):
    omega = np.asarray(omega, dtype=complex)
    omega = 0.5 * (omega + omega.conj().T)
    K = omega.shape[0]
    scale = np.real(np.trace(omega)) / K
    if not np.isfinite(scale) or scale <= 0:
        raise ConditioningError("covariance has non-positive trace")
    floor = REG_FACTOR * scale
    if np.linalg.eigvalsh(omega)[0] < floor:
        omega = omega + floor * np.eye(K)
    try:
        return linalg.cho_factor(omega, lower=True)
    except linalg.LinAlgError as exc:
        raise ConditioningError("covariance is singular beyond regularization") from exc


def hermitian_solve(omega, y) -> np.ndarray:
    """Solve ``omega x = y`` for Hermitian PD ``omega`` via Cholesky."""
    return linalg.cho_solve(_regularized_cho(omega), np.asarray(y, dtype=complex))


def whitened_quadratic(y, omega) -> float:
    """``y^H omega^{-1} y`` without forming the inverse."""
    y = np.asarray(y, dtype=complex)
    return float(np.real(np.vdot(y, hermitian_solve(omega, y))))


def scnr(y, env: EnvModel) -> float:
    """``sigma_alpha^2 * y^H (Omega_c(y) + Omega_n)^{-1} y``."""
    return env.sigma_alpha_sq * whitened_quadratic(y, total_covariance(y, env))


def c2r(x) -> np.ndarray:
    """Interleave real/imag parts: ``[Re x1, Im x1, Re x2, ...]`` along the last axis."""
    x = np.asarray(x, dtype=complex)
    return np.stack([x.real, x.imag], axis=-1).reshape(*x.shape[:-1], 2 * x.shape[-1])


def r2c(r) -> np.ndarray:
    """Inverse of :func:`c2r`: merge successive real pairs into complex numbers."""
    r = np.asarray(r, dtype=float)
    if r.shape[-1] % 2:
        raise DimensionError("real vector must have even length")
    pairs = r.reshape(*r.shape[:-1], r.shape[-1] // 2, 2)
    return pairs[..., 0] + 1j * pairs[..., 1]
