"""Dense linear-algebra kernels: Jacobi SVD, energy bases, projections, cosine distance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DECOMP_TOL = 1e-8
NORM_EPS = 1e-12
_MAX_SWEEPS = 80


class DegenerateVectorError(ValueError):
    """Raised when a vector that must have a direction has (near) zero norm."""


@dataclass(frozen=True)
class SvdResult:
    left: np.ndarray  # m x k
    singular_values: np.ndarray  # k, descending
    right: np.ndarray  # n x k

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right.T


def _as_finite_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if a.size == 0:
        raise ValueError("matrix is empty")
    if not np.all(np.isfinite(a)):
        bad = np.argwhere(~np.isfinite(a))[0]
        raise ValueError(f"matrix has a non-finite entry at {tuple(int(i) for i in bad)}")
    return a


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: n-1 rounds (n padded to even) of disjoint column pairs."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        p, q = [], []
        for i in range(size // 2):
            a, b = players[i], players[size - 1 - i]
            if a >= 0 and b >= 0:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi_orthogonalize(rows: np.ndarray, v: np.ndarray) -> None:
    """One-sided (Hestenes) Jacobi, in place, until all pairs of rows are orthogonal.

    ``rows`` holds the matrix columns as rows (C order keeps each gather
    contiguous); ``v`` accumulates the right rotations the same way. Each
    round rotates a set of disjoint pairs at once, so one sweep is n-1
    vectorised rounds instead of n(n-1)/2 scalar rotations.
    """
    n = rows.shape[0]
    if n < 2:
        return
    schedule = _round_robin(n)
    eps = np.finfo(np.float64).eps
    tol = n * eps
    # columns at roundoff level are left alone; they fall under the rank floor later
    negligible = (eps * np.linalg.norm(rows)) ** 2
    for _ in range(_MAX_SWEEPS):
        rotated = False
        for p, q in schedule:
            ap, aq = rows[p], rows[q]
            alpha = np.einsum("ij,ij->i", ap, ap)
            beta = np.einsum("ij,ij->i", aq, aq)
            gamma = np.einsum("ij,ij->i", ap, aq)
            active = (np.abs(gamma) > tol * np.sqrt(alpha * beta)) & (np.minimum(alpha, beta) > negligible)
            if not active.any():
                continue
            rotated = True
            if not active.all():
                p, q = p[active], q[active]
                ap, aq = ap[active], aq[active]
                alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = (1.0 / np.sqrt(1.0 + t * t))[:, None]
            s = c * t[:, None]
            rows[p] = c * ap - s * aq
            rows[q] = s * ap + c * aq
            vp, vq = v[p], v[q]
            v[p] = c * vp - s * vq
            v[q] = s * vp + c * vq
        if not rotated:
            return
    raise RuntimeError("Jacobi SVD did not converge")


def _complete_orthonormal(u: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Replace the columns of ``u`` not flagged in ``keep`` by an orthonormal completion."""
    m = u.shape[0]
    kept = u[:, keep]
    q, _ = np.linalg.qr(np.hstack([kept, np.eye(m)]), mode="reduced")
    filler = q[:, kept.shape[1]:]
    out = u.copy()
    out[:, ~keep] = filler[:, : int(np.sum(~keep))]
    return out


def svd(a) -> SvdResult:
    """Thin SVD ``a = U diag(s) V^T`` with k = min(m, n).

    The input is preconditioned by two Householder QR factorisations
    (``a = Q1 R``, ``R^T = Q2 L^T``) and the triangular ``L`` is diagonalised by
    one-sided Jacobi, which then converges in a handful of sweeps. Singular
    values come out descending; equal values keep their column order.
    """
    a = _as_finite_matrix(a)
    m, n = a.shape
    if m < n:
        res = svd(a.T)
        return SvdResult(res.right, res.singular_values, res.left)

    q1, r = np.linalg.qr(a, mode="reduced")
    q2, l_t = np.linalg.qr(r.T, mode="reduced")
    rows = np.ascontiguousarray(l_t)  # rows of L^T are the columns of L
    v = np.eye(n)
    _jacobi_orthogonalize(rows, v)

    sigma = np.linalg.norm(rows, axis=1)
    order = np.argsort(-sigma, kind="stable")
    sigma, rows, v = sigma[order], rows[order], v[order]

    floor = sigma[0] * max(m, n) * np.finfo(np.float64).eps if sigma[0] > 0 else 0.0
    keep = sigma > floor
    u = np.zeros((n, n))
    u[:, keep] = (rows[keep] / sigma[keep, None]).T
    sigma = np.where(keep, sigma, 0.0)
    if not keep.all():
        u = _complete_orthonormal(u, keep)
    return SvdResult(q1 @ u, sigma, q2 @ v.T)


def numerical_rank(s: np.ndarray, shape: tuple[int, int]) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > s[0] * max(shape) * np.finfo(np.float64).eps))


def energy_basis(a, energy: float) -> np.ndarray:
    """Smallest set of leading left singular vectors holding ``energy`` of the squared spectrum.

    An all-zero matrix yields an empty (m x 0) basis.
    """
    if not 0.0 < energy <= 1.0:
        raise ValueError(f"energy must be in (0, 1], got {energy}")
    a = _as_finite_matrix(a)
    if not np.any(a):
        return np.zeros((a.shape[0], 0))
    res = svd(a)
    rank = numerical_rank(res.singular_values, a.shape)
    s2 = res.singular_values[:rank] ** 2
    cum = np.cumsum(s2)
    total = cum[-1]
    k = int(np.searchsorted(cum, energy * total - 1e-12 * total, side="left")) + 1
    k = min(k, rank)
    return res.left[:, :k].copy()


def project(v, basis: np.ndarray) -> np.ndarray:
    """Orthogonal projection ``B B^T v`` onto the span of an orthonormal basis.

    ``v`` may be a vector or a matrix whose columns are projected independently.
    """
    v = np.asarray(v, dtype=np.float64)
    basis = np.asarray(basis, dtype=np.float64)
    if basis.ndim != 2 or v.shape[0] != basis.shape[0]:
        raise ValueError(f"dimension mismatch: vector {v.shape} vs basis {basis.shape}")
    if basis.shape[1] == 0:
        return np.zeros_like(v)
    return basis @ (basis.T @ v)


def cosine_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na <= NORM_EPS or nb <= NORM_EPS:
        raise DegenerateVectorError("cosine distance undefined for a zero-norm vector")
    return float(1.0 - (a @ b) / (na * nb))
