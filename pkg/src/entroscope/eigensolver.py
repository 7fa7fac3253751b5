"""Lowest eigenpairs of sparse symmetric operators.

:func:`lanczos_lowest` runs a restarted Lanczos iteration with full
reorthogonalization. The ground state is sought from the normalized all-ones
vector; the first excited level comes from a second run, deflated against
the ground state and started from a fixed-seed random vector. If that second
run lands below the first, the all-ones vector was blind to the ground state
and the search is redone from pseudorandom vectors.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal

log = logging.getLogger(__name__)

DENSE_LIMIT = 4096
START_SEED = 20050101


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 500
    tol: float = 1e-9
    degeneracy_tol: float = 1e-6
    krylov_dim: int = 150

    @classmethod
    def from_dict(cls, data: dict | None) -> "SolverOptions":
        data = dict(data or {})
        unknown = set(data) - {"max_iter", "tol", "degeneracy_tol", "krylov_dim"}
        if unknown:
            raise ValueError(f"unknown solver options {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class GroundState:
    energy: float
    vector: np.ndarray
    gap: float
    iterations: int
    residual: float
    degenerate_flag: bool
    excited_energy: float | None = None


def _matvec(op) -> Callable[[np.ndarray], np.ndarray]:
    if callable(op) and not hasattr(op, "shape"):
        return op
    if hasattr(op, "matvec"):
        return op.matvec
    return lambda v: op @ v


def _lanczos_run(matvec, dim: int, start: np.ndarray, deflate: list[np.ndarray], opts: SolverOptions):
    """Lowest eigenpair of ``matvec`` restricted to the complement of ``deflate``."""

    def project(w):
        for u in deflate:
            w -= (u @ w) * u
        return w

    x = project(start.astype(float).copy())
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise ConvergenceError("start vector vanishes after deflation", np.inf)
    x /= nx
    m_max = min(opts.krylov_dim, dim - len(deflate))
    total = 0
    best = (np.inf, None, None)
    while True:
        V = np.empty((m_max + 1, dim))
        V[0] = x
        alpha, beta = [], []
        for j in range(m_max):
            w = project(matvec(V[j]))
            total += 1
            a = float(V[j] @ w)
            alpha.append(a)
            w -= a * V[j]
            if j:
                w -= beta[-1] * V[j - 1]
            # two passes of classical Gram-Schmidt against the whole basis
            for _ in range(2):
                w -= V[: j + 1].T @ (V[: j + 1] @ w)
                project(w)
            b = float(np.linalg.norm(w))
            if j == 0:
                theta, s = np.array([alpha[0]]), np.ones((1, 1))
            else:
                theta, s = eigh_tridiagonal(np.array(alpha), np.array(beta), select="i", select_range=(0, 0))
            est = abs(b * s[-1, 0])
            breakdown = b < 1e-12 * max(1.0, abs(a))
            if est < 0.1 * opts.tol or breakdown or j == m_max - 1 or total >= opts.max_iter:
                ritz = s[:, 0] @ V[: j + 1]
                ritz /= np.linalg.norm(ritz)
                resid = float(np.linalg.norm(project(matvec(ritz)) - theta[0] * ritz))
                if resid < best[0]:
                    best = (resid, float(theta[0]), ritz)
                if resid <= opts.tol:
                    return float(theta[0]), ritz, total, resid
                if total >= opts.max_iter:
                    raise ConvergenceError(f"Lanczos did not converge in {opts.max_iter} iterations", best[0])
                if breakdown or j == m_max - 1:
                    break
            beta.append(b)
            V[j + 1] = w / b
        x = best[2]


def _pseudorandom(dim: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(dim)


def lanczos_lowest(op, k: int = 2, opts: SolverOptions | None = None, dim: int | None = None) -> GroundState:
    """Ground state (and first excited energy when ``k >= 2``) of a symmetric operator.

    ``op`` may be a dense or sparse matrix, a ``LinearOperator`` or a plain
    callable ``v -> H v`` (then ``dim`` is required).
    """
    opts = opts or SolverOptions()
    dim = dim if dim is not None else op.shape[0]
    if dim < 2:
        raise ValueError("operator dimension must be at least 2")
    mv = _matvec(op)
    e0, v0, it0, r0 = _lanczos_run(mv, dim, np.ones(dim), [], opts)
    e1 = None
    if k >= 2:
        e1, v1, _, _ = _lanczos_run(mv, dim, _pseudorandom(dim, START_SEED), [v0], opts)
        scale = max(1.0, abs(e0))
        if e1 < e0 - 1e-10 * scale:
            log.info("all-ones start vector missed the ground state; restarting from random vectors")
            e0, v0, it0, r0 = _lanczos_run(mv, dim, _pseudorandom(dim, START_SEED + 1), [], opts)
            e1, _, _, _ = _lanczos_run(mv, dim, _pseudorandom(dim, START_SEED + 2), [v0], opts)
    gap = (e1 - e0) if e1 is not None else np.inf
    # sign fix: largest-magnitude amplitude positive, so curves are reproducible
    pivot = int(np.argmax(np.abs(v0)))
    if v0[pivot] < 0:
        v0 = -v0
    return GroundState(
        energy=e0,
        vector=v0,
        gap=gap,
        iterations=it0,
        residual=r0,
        degenerate_flag=bool(gap < opts.degeneracy_tol),
        excited_energy=e1,
    )


def residual_norm(op, state: GroundState) -> float:
    return float(np.linalg.norm(_matvec(op)(state.vector) - state.energy * state.vector))


def dense_lowest(h, k: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Full dense eigen-decomposition, ascending; the ``k`` lowest pairs if given."""
    dim = h.shape[0]
    if dim > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to dim <= {DENSE_LIMIT}, got {dim}")
    a = h.toarray() if sp.issparse(h) else np.asarray(h, dtype=float)
    w, v = np.linalg.eigh(a)
    if k is not None:
        return w[:k], v[:, :k]
    return w, v
