"""Gaussian-clutter reference detector and waveform.

For complex Gaussian clutter the square-law statistic ``|z^H Omega^{-1} y|^2``
is the Neyman-Pearson test, its ROC is ``Pd = Pfa**(1/(1+SCNR))``, and the
best unit-power waveform maximizes ``y^H (Omega_c(y) + Omega_n)^{-1} y``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .signal import (EnvModel, _regularized_cho, hermitian_solve, shift_apply, shift_offsets,
                     shifted_stack, total_covariance, whitened_quadratic, c2r, r2c)


class NonConvergenceWarning(RuntimeWarning):
    pass


def square_law_score(z, y, omega_total) -> np.ndarray:
    """``|z^H Omega^{-1} y|^2`` for one ``(K,)`` or a batch ``(N, K)`` of returns."""
    w = hermitian_solve(omega_total, y)
    z = np.asarray(z, dtype=complex)
    s = np.abs(z.conj() @ w) ** 2
    return float(s) if np.ndim(s) == 0 else s


def closed_form_pd(pfa, scnr):
    pfa = np.asarray(pfa, dtype=float)
    if np.any(pfa <= 0) or np.any(pfa > 1):
        raise ValueError("pfa must lie in (0, 1]")
    if np.any(np.asarray(scnr) < 0):
        raise ValueError("scnr must be >= 0")
    pd = pfa ** (1.0 / (1.0 + np.asarray(scnr, dtype=float)))
    return float(pd) if pd.ndim == 0 else pd


def waveform_objective(y, env: EnvModel) -> float:
    return whitened_quadratic(y, total_covariance(y, env))


def min_eigvec(omega, v0, tol: float = 1e-12, max_iters: int = 20000) -> np.ndarray:
    """Unit eigenvector of the smallest eigenvalue of Hermitian PD ``omega``.

    Inverse power iteration with Cholesky solves, warm-started at ``v0``;
    stops once ``||omega v - (v^H omega v) v|| <= tol * ||omega||``.
    """
    omega = np.asarray(omega, dtype=complex)
    cho = _regularized_cho(omega)
    scale = np.linalg.norm(omega, 2)
    v = np.asarray(v0, dtype=complex)
    v = v / np.linalg.norm(v)
    for _ in range(max_iters):
        w = linalg.cho_solve(cho, v)
        v = w / np.linalg.norm(w)
        Ov = omega @ v
        if np.linalg.norm(Ov - np.vdot(v, Ov) * v) <= tol * scale:
            break
    return v


def _align_phase(v, ref):
    c = np.vdot(v, ref)
    return v if abs(c) == 0 else v * (c / abs(c))


def waveform_gradient(y, env: EnvModel) -> np.ndarray:
    """Ascent direction (conjugate Wirtinger gradient) of the waveform objective.

    With ``w = Omega(y)^{-1} y`` and ``a_k = (J_k y)^H w`` it equals
    ``w - sum_k sigma_k^2 conj(a_k) J_k^H w``.
    """
    y = np.asarray(y, dtype=complex)
    w = hermitian_solve(total_covariance(y, env), y)
    S = shifted_stack(y)                       # rows J_k y
    a = S.conj() @ w
    back = np.stack([shift_apply(w, -k) for k in shift_offsets(env.K)])  # J_k^H w = J_{-k} w
    return w - (np.asarray(env.clutter_powers) * a.conj()) @ back


@dataclass
class WaveformSolution:
    y: np.ndarray
    objective: float
    trajectory: list = field(default_factory=list)
    converged: bool = False


def _refine_bfgs(y, env: EnvModel, max_iters: int, gtol: float):
    """Quasi-Newton ascent in C2R coordinates; returns the iterates' objectives."""
    def neg(r):
        u = r2c(r)
        nu = np.linalg.norm(u)
        yv = u / nu
        f = waveform_objective(yv, env)
        g = 2.0 * c2r(waveform_gradient(yv, env))
        yr = c2r(yv)
        return -f, -(g - yr * (yr @ g)) / nu

    iterates = []
    res = optimize.minimize(neg, c2r(y), jac=True, method="BFGS",
                            options={"maxiter": max_iters, "gtol": gtol},
                            callback=lambda r: iterates.append(r.copy()))
    return iterates, res


def optimal_waveform(env: EnvModel, y0=None, max_iters: int = 500, tol: float = 1e-12,
                     gtol: float = 1e-10, max_restarts: int = 5) -> WaveformSolution:
    """Monotone ascent on ``y^H (Omega_c(y)+Omega_n)^{-1} y`` over unit-norm ``y``.

    Each step freezes the covariance at the current iterate and jumps to its
    minimum-eigenvalue eigenvector.  The first jump that would lower the
    objective is rejected and the iterate is polished by BFGS ascent instead;
    any iterate that does not improve on its predecessor ends the run.
    Without ``y0`` the stepped-frequency chirp is used.
    """
    if y0 is None:
        from .config import stepped_frequency
        y0 = stepped_frequency(env.K)
    y = np.asarray(y0, dtype=complex)
    y = y / np.linalg.norm(y)
    f = waveform_objective(y, env)
    traj = [f]
    converged = False
    for _ in range(max_iters):
        cand = _align_phase(min_eigvec(total_covariance(y, env), y), y)
        f_c = waveform_objective(cand, env)
        if f_c <= f:
            break
        gain = f_c - f
        y, f = cand, f_c
        traj.append(f)
        if gain <= tol * max(1.0, abs(f)):
            converged = True
            break
    # BFGS restarts: the objective is flat along the radial direction, which
    # can leave the inverse-Hessian estimate stale and stall the line search
    for _ in range(max_restarts + 1):
        if converged:
            break
        f_start = f
        iterates, res = _refine_bfgs(y, env, max_iters, gtol)
        for r in iterates:
            cand = r2c(r)
            cand = cand / np.linalg.norm(cand)
            f_c = waveform_objective(cand, env)
            if f_c < f:
                break
            y, f = cand, f_c
            traj.append(f)
        converged = bool(res.success or np.linalg.norm(res.jac) <= 1e3 * gtol)
        if f <= f_start:
            break
    if not converged:
        warnings.warn(f"optimal_waveform did not converge in {max_iters} iterations",
                      NonConvergenceWarning, stacklevel=2)
    return WaveformSolution(y=y, objective=f, trajectory=traj, converged=converged)
