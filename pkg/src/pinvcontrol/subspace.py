"""Pseudoinverse-based transformations between time samples and waveform coefficients.

A set of ``n`` sampled waveforms is stored row-wise in an ``n x N`` matrix
``B``. With ``B+`` the Moore-Penrose pseudoinverse,

* ``P = B+ B`` is the orthogonal projector onto the span of the waveforms,
* ``c = (B^t)+ u`` are the minimum-norm expansion coefficients of ``P u``,
* ``B^t c`` maps coefficients back to the time domain,

so that ``B^t (B^t)+ u = P u`` for any ``u``, whether or not the waveforms
are orthogonal, normalized or even linearly independent.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import io
from .errors import NumericalError

#: Largest ``N`` for which the ``N x N`` projector is stored explicitly.
MATERIALIZE_LIMIT = 4096


def as_basis(B):
    """Validate and return ``B`` as a finite 2-D float array."""
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[None, :]
    if B.ndim != 2 or B.shape[0] < 1 or B.shape[1] < 1:
        raise ValueError(f"basis must be a non-empty 2-D array, got shape {B.shape}")
    if not np.all(np.isfinite(B)):
        raise ValueError("basis contains non-finite entries")
    return B


def default_rank_tol(shape):
    return max(shape) * np.finfo(float).eps


def _svd(B):
    try:
        return np.linalg.svd(B, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc


@dataclass(frozen=True, eq=False)
class Pseudoinverse:
    """``B+`` together with the reduced SVD it was computed from.

    Attributes
    ----------
    source : ndarray, shape (n, N)
    pinv : ndarray, shape (N, n)
    rank : int
        Number of singular values above ``rank_tol * sigma_max``.
    singular_values : ndarray
        All singular values of ``source`` in nonincreasing order.
    """

    source: np.ndarray
    pinv: np.ndarray
    rank: int
    singular_values: np.ndarray
    U: np.ndarray = field(repr=False)
    Vt: np.ndarray = field(repr=False)

    @property
    def row_space(self):
        """Orthonormal rows spanning the row space of ``source`` (``rank x N``)."""
        return self.Vt[: self.rank]


def pinv(B, rank_tol=None):
    """Moore-Penrose pseudoinverse of ``B`` via the singular value decomposition.

    Singular values ``s <= rank_tol * s_max`` are treated as zero; the default
    ``rank_tol`` is ``max(n, N) * eps``.
    """
    B = as_basis(B)
    if rank_tol is None:
        rank_tol = default_rank_tol(B.shape)
    U, s, Vt = _svd(B)
    cutoff = rank_tol * s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > cutoff))
    if rank and s[rank - 1] < np.finfo(float).tiny:
        raise NumericalError(f"pseudoinverse overflows: singular value {s[rank - 1]:.3e} is subnormal")
    s_inv = np.zeros_like(s)
    s_inv[:rank] = 1.0 / s[:rank]
    Bp = (Vt.T * s_inv) @ U.T
    for arr in (Bp, s, U, Vt):
        arr.setflags(write=False)
    return Pseudoinverse(B, Bp, rank, s, U, Vt)


def penrose_residuals(B, Bp):
    """Relative residuals of the four Penrose identities.

    Returns ``(r1, r2, r3, r4)`` for ``B B+ B = B``, ``B+ B B+ = B+``,
    ``(B B+)^t = B B+`` and ``(B+ B)^t = B+ B``, each divided by the norm of
    the matrix it should reproduce.
    """
    B = np.asarray(B, dtype=float)
    Bp = np.asarray(Bp, dtype=float)
    # the residuals are invariant under B -> cB, B+ -> B+/c; rescale to avoid overflow
    scale = np.abs(B).max(initial=0.0)
    if scale > 0:
        B, Bp = B / scale, Bp * scale
    BBp = B @ Bp
    BpB = Bp @ B
    nB = max(np.linalg.norm(B), np.finfo(float).tiny)
    nBp = max(np.linalg.norm(Bp), np.finfo(float).tiny)
    return (
        np.linalg.norm(BBp @ B - B) / nB,
        np.linalg.norm(Bp @ BBp - Bp) / nBp,
        np.linalg.norm(BBp - BBp.T) / max(np.linalg.norm(BBp), 1.0),
        np.linalg.norm(BpB - BpB.T) / max(np.linalg.norm(BpB), 1.0),
    )


class SubspaceProjector:
    """Orthogonal projector ``P = B+ B`` onto the span of the rows of ``B``.

    For ``N <= materialize_limit`` the ``N x N`` matrix is formed once and
    applied directly; otherwise ``P u`` is evaluated as ``B+ (B u)``.
    """

    def __init__(self, B, rank_tol=None, materialize_limit=MATERIALIZE_LIMIT):
        if isinstance(B, Pseudoinverse):
            self.pinv = B
        else:
            self.pinv = pinv(B, rank_tol)
        self.basis = self.pinv.source
        self.N = self.basis.shape[1]
        self._matrix = None
        if self.N <= materialize_limit:
            self._matrix = self.pinv.pinv @ self.basis
            self._matrix.setflags(write=False)

    @property
    def rank(self):
        return self.pinv.rank

    @property
    def materialized(self):
        return self._matrix is not None

    @property
    def matrix(self):
        if self._matrix is None:
            return self.pinv.pinv @ self.basis
        return self._matrix

    def apply(self, u):
        u = _check_signal(u, self.N)
        if self._matrix is not None:
            return self._matrix @ u
        return self.pinv.pinv @ (self.basis @ u)

    __call__ = apply

    def __repr__(self):
        n, N = self.basis.shape
        return f"SubspaceProjector(n={n}, N={N}, rank={self.rank})"


def projector(B, rank_tol=None):
    return SubspaceProjector(B, rank_tol)


def project(P, u):
    """Project the control signal ``u`` onto the waveform subspace."""
    return P.apply(u)


def _check_signal(u, N):
    u = np.asarray(u, dtype=float)
    if u.shape[0] != N:
        raise ValueError(f"signal has length {u.shape[0]}, expected {N}")
    return u


def _as_pinv(B):
    return B if isinstance(B, Pseudoinverse) else pinv(B)


def coefficients(B, u):
    """Minimum-norm coefficients ``c = (B^t)+ u`` with ``B^t c = P u``.

    ``B`` may be a basis matrix or a precomputed :class:`Pseudoinverse`.
    Uses ``(B^t)+ = (B+)^t``.
    """
    Bp = _as_pinv(B)
    u = _check_signal(u, Bp.source.shape[1])
    return Bp.pinv.T @ u


def synthesize(B, c):
    """Superpose the waveforms with weights ``c``: ``B^t c``."""
    B = B.source if isinstance(B, Pseudoinverse) else as_basis(B)
    c = np.asarray(c, dtype=float)
    if c.shape[0] != B.shape[0]:
        raise ValueError(f"got {c.shape[0]} coefficients for {B.shape[0]} waveforms")
    return B.T @ c


def orthonormal_basis(B, rank_tol=None):
    """Orthonormal rows spanning the same subspace as ``B``.

    Taken from the reduced SVD ``B = U S V^t``: the returned matrix is the
    first ``rank(B)`` rows of ``V^t``, so rank deficiency is removed and
    ``V V^t`` equals ``B+ B``.
    """
    Bp = B if isinstance(B, Pseudoinverse) else pinv(B, rank_tol)
    return np.array(Bp.row_space)


def gram_condition(B, rank_tol=None):
    """Eigenvalue ratio ``lambda_max / lambda_min`` of the Gram matrix ``B B^t``.

    Only nonzero eigenvalues (singular values above the rank cutoff) enter.
    Equals 1 for orthonormal rows.
    """
    Bp = B if isinstance(B, Pseudoinverse) else pinv(B, rank_tol)
    if Bp.rank == 0:
        raise NumericalError("condition number undefined for a zero basis")
    s = Bp.singular_values[: Bp.rank]
    return float((s[0] / s[-1]) ** 2)


def load_basis_csv(path):
    """Read a basis matrix from CSV (rows = waveforms, columns = time samples)."""
    return as_basis(io.read_matrix(path))


def save_basis_csv(path, B):
    return io.write_matrix(path, as_basis(B))
