"""Fixed-step RK4 for state-linear systems with piecewise-constant control.

The systems in this package have the form ``z' = A(u) z + b(t)`` where ``A``
is affine in the scalar control ``u`` and ``b`` is an external forcing
(the bath noise, or zero). With ``u`` constant on each step and ``b``
interpolated linearly between grid samples, one classical RK4 step is the
exact affine map

    z_k = M_k z_{k-1} + f0_k b_{k-1} + f1_k b_k .

``M_k`` is the degree-4 Taylor polynomial of ``h A_k``, so ``M_k^t`` is also
one RK4 step of the costate equation ``lam' = -A^t lam`` taken backwards in
time. Backpropagating ``lam_{k-1} = M_k^t lam_k`` is therefore both the RK4
integration of the costate and the exact adjoint of the discrete forward
map, and the gradient of the discrete terminal cost is

    dJ/du_k = lam_k . (dM_k z_{k-1} + df0_k b_{k-1} + df1_k b_k).

The step derivatives are obtained by differentiating every RK4 stage
(tangent-linear RK4), which is where ``df/du = (0, -q, ...)`` enters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError


def _rk4_tangent(A, dA, z, dz, b0, b1, h):
    bm = 0.5 * (b0 + b1)
    k1 = A @ z + b0
    t1 = dA @ z + A @ dz
    y, ty = z + 0.5 * h * k1, dz + 0.5 * h * t1
    k2 = A @ y + bm
    t2 = dA @ y + A @ ty
    y, ty = z + 0.5 * h * k2, dz + 0.5 * h * t2
    k3 = A @ y + bm
    t3 = dA @ y + A @ ty
    y, ty = z + h * k3, dz + h * t3
    k4 = A @ y + b1
    t4 = dA @ y + A @ ty
    z1 = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    dz1 = dz + h / 6.0 * (t1 + 2.0 * t2 + 2.0 * t3 + t4)
    return z1, dz1


@dataclass
class StepMaps:
    """Per-step affine maps and their derivatives with respect to ``u_k``.

    ``M``/``dM`` have shape ``(K, d, d)``; ``f0``, ``f1`` and derivatives have
    shape ``(K, d)`` (``None`` when the system is unforced).
    """

    M: np.ndarray
    dM: np.ndarray
    f0: np.ndarray | None = None
    f1: np.ndarray | None = None
    df0: np.ndarray | None = None
    df1: np.ndarray | None = None


def step_maps(A, dA, h, forcing=None):
    """Build the RK4 step maps for generators ``A`` (shape ``(K, d, d)``).

    ``dA`` is the constant matrix ``dA/du``; ``forcing`` is the direction
    (length ``d``) along which the scalar external signal acts.
    """
    K, d, _ = A.shape
    dA = np.broadcast_to(dA, A.shape)
    eye = np.broadcast_to(np.eye(d), (K, d, d))
    zero = np.zeros((K, d, d))
    M, dM = _rk4_tangent(A, dA, eye, zero, zero, zero, h)
    maps = StepMaps(M, dM)
    if forcing is not None:
        e = np.broadcast_to(np.asarray(forcing, float)[:, None], (K, d, 1))
        z = np.zeros((K, d, 1))
        f0, df0 = _rk4_tangent(A, dA, z, z, e, z, h)
        f1, df1 = _rk4_tangent(A, dA, z, z, z, e, h)
        maps.f0, maps.df0 = f0[..., 0], df0[..., 0]
        maps.f1, maps.df1 = f1[..., 0], df1[..., 0]
    return maps


def forward(maps, z0, xi=None):
    """Propagate a batch of states.

    Parameters
    ----------
    z0 : ndarray, shape (R, d)
    xi : ndarray, shape (R, K + 1), optional
        External signal sampled on the state grid.

    Returns
    -------
    Z : ndarray, shape (K + 1, R, d)
    """
    K = maps.M.shape[0]
    R, d = z0.shape
    Z = np.empty((K + 1, R, d))
    Z[0] = z0
    Mt = np.swapaxes(maps.M, 1, 2)
    with np.errstate(over="ignore", invalid="ignore"):
        if xi is None:
            for k in range(K):
                Z[k + 1] = Z[k] @ Mt[k]
        else:
            f0, f1 = maps.f0, maps.f1
            for k in range(K):
                Z[k + 1] = Z[k] @ Mt[k] + xi[:, k, None] * f0[k] + xi[:, k + 1, None] * f1[k]
    return Z


def forward_observe(maps, z0, xi, observe):
    """Like :func:`forward` but keeps only ``observe(z)`` at every step.

    ``observe`` maps an ``(R, d)`` state batch to an ``(R,)`` array; the result
    has shape ``(K + 1, R)``.
    """
    K = maps.M.shape[0]
    Mt = np.swapaxes(maps.M, 1, 2)
    z = np.array(z0, dtype=float)
    out = np.empty((K + 1, z.shape[0]))
    out[0] = observe(z)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K):
            z = z @ Mt[k] + xi[:, k, None] * maps.f0[k] + xi[:, k + 1, None] * maps.f1[k]
            out[k + 1] = observe(z)
    return out


def backward(maps, lam_final):
    """Backpropagate costates ``lam_{k-1} = M_k^t lam_k``; returns ``(K+1, R, d)``."""
    K = maps.M.shape[0]
    L = np.empty((K + 1,) + lam_final.shape)
    L[K] = lam_final
    M = maps.M
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K, 0, -1):
            L[k - 1] = L[k] @ M[k - 1]
    return L


def gradient_terms(maps, Z, L, xi=None):
    """Per-realization gradient ``dJ/du_k``, shape ``(R, K)``."""
    g = np.einsum("kri,kij,krj->rk", L[1:], maps.dM, Z[:-1], optimize=True)
    if xi is not None:
        g += np.einsum("kri,ki->rk", L[1:], maps.df0) * xi[:, :-1]
        g += np.einsum("kri,ki->rk", L[1:], maps.df1) * xi[:, 1:]
    return g


def check_finite(Z, times, first_realization=None):
    """Raise :class:`DivergenceError` at the first non-finite state.

    ``first_realization`` is the ensemble index of ``Z[:, 0]``; leave it
    ``None`` for a single deterministic trajectory.
    """
    ok = np.isfinite(Z).all(axis=2)
    if ok.all():
        return
    k, r = np.argwhere(~ok)[0]
    realization = None if first_realization is None else int(r) + first_realization
    raise DivergenceError(times[k], realization)
