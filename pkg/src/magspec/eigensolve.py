"""Smallest eigenpairs of sparse Hermitian operators.

The main path is a block LOBPCG iteration with explicit orthonormalisation of
the search space, started from the constant vector plus seeded random
vectors. If it stagnates (typically on a tight cluster of low eigenvalues) the
block is widened; if that also fails, the solver switches to inverse iteration
with preconditioned conjugate-gradient inner solves. A converged result always
carries a residual recomputed from scratch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .assembly import GeneralizedPair, OperatorMatrix
from .errors import MassNotPD, NoConvergence, TooLarge, ZeroVector

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000
AMG_THRESHOLD = 4096
MAX_BLOCK = 32


@dataclass(frozen=True)
class SolverOpts:
    """Knobs for :func:`ground_state`.

    ``preconditioner`` is ``"jacobi"`` (diagonal scaling), ``"amg"``
    (one smoothed-aggregation V-cycle), ``"none"`` or ``"auto"``, which picks
    AMG once the matrix has ``AMG_THRESHOLD`` rows or more.
    """

    tol: float = 1e-8
    max_iter: int = 20000
    block_size: int = 2
    seed: int = 0
    preconditioner: str = "auto"
    stall_window: int = 400

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if self.preconditioner not in ("auto", "jacobi", "amg", "none"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class EigenResult:
    lam: float
    vector: np.ndarray
    residual: float
    iters: int
    converged: bool = True
    method: str = "lobpcg"

    @property
    def lambda_(self) -> float:
        return self.lam


def _unwrap(S) -> tuple[sp.csr_matrix, float]:
    """Matrix and the floor used in the residual target."""
    if isinstance(S, OperatorMatrix):
        A, floor = S.matrix, S.scale * 1e-3
    else:
        A = sp.csr_matrix(S)
        floor = float(np.abs(A.diagonal()).max()) * 1e-3
    # A complex matrix with no imaginary part (zero field) is solved in real arithmetic.
    # The copy matters: ``.real`` is a strided view and pyamg's kernels need contiguous data.
    if np.iscomplexobj(A.data) and not np.any(A.data.imag):
        A = sp.csr_matrix((np.ascontiguousarray(A.data.real), A.indices, A.indptr), shape=A.shape)
    return A, floor


def _target(tol: float, lam: float, floor: float) -> float:
    return tol * max(abs(lam), floor)


def _make_preconditioner(A: sp.csr_matrix, kind: str) -> Callable[[np.ndarray], np.ndarray]:
    if kind == "auto":
        kind = "amg" if A.shape[0] >= AMG_THRESHOLD else "jacobi"
    if kind == "none":
        return lambda R: R
    if kind == "amg":
        import pyamg

        # Smoothed aggregation works directly on complex Hermitian input.
        ml = pyamg.smoothed_aggregation_solver(A, max_coarse=50)
        M = ml.aspreconditioner(cycle="V")
        return lambda R: np.column_stack([M @ R[:, k] for k in range(R.shape[1])])
    d = A.diagonal().real
    inv = 1.0 / np.where(np.abs(d) > 0, d, 1.0)
    return lambda R: R * inv[:, None]


def _orthonormalize(V: np.ndarray, against: np.ndarray | None = None,
                    drop: float = 1e-10) -> np.ndarray:
    """Orthonormal basis for ``V`` with the span of ``against`` projected out."""
    if V.shape[1] == 0:
        return V
    norms0 = np.linalg.norm(V, axis=0)
    norms0[norms0 == 0] = 1.0
    V = V / norms0
    if against is not None:
        for _ in range(2):
            V = V - against @ (against.conj().T @ V)
    Q, R = np.linalg.qr(V)
    keep = np.abs(np.diag(R)) > drop
    Q = Q[:, keep]
    if against is not None and Q.shape[1]:
        Q = Q - against @ (against.conj().T @ Q)
        Q, _ = np.linalg.qr(Q)
    return Q


def _start_block(N: int, m: int, complex_: bool, seed: int, x0: np.ndarray | None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    cols = [] if x0 is None else [np.asarray(x0).ravel()]
    cols.append(np.ones(N))
    while len(cols) < m:
        v = rng.standard_normal(N)
        if complex_:
            v = v + 1j * rng.standard_normal(N)
        cols.append(v)
    return np.column_stack(cols[:m]).astype(complex if complex_ else float)


def _rayleigh_ritz(A, Q):
    AQ = A @ Q
    H = Q.conj().T @ AQ
    H = 0.5 * (H + H.conj().T)
    theta, C = np.linalg.eigh(H)
    return theta, C, AQ


def _residual(A, x, lam) -> float:
    return float(np.linalg.norm(A @ x - lam * x))


def _lobpcg(A, T, X, tol, floor, max_iter, stall_window):
    """Returns ``(lam, x, residual, iters, converged)``."""
    X = _orthonormalize(X)
    theta, C, AQ = _rayleigh_ritz(A, X)
    m = X.shape[1]
    X = X @ C
    AX = AQ @ C
    lam = theta
    P = None
    best = (np.inf, lam[0], X[:, 0].copy())
    since_best = 0
    it = 0
    for it in range(1, max_iter + 1):
        R = AX - X * lam[None, :]
        rnorm = np.linalg.norm(R[:, 0])
        if rnorm <= _target(tol, lam[0], floor):
            x = X[:, 0] / np.linalg.norm(X[:, 0])
            lam0 = float(np.real(np.vdot(x, A @ x)))
            res = _residual(A, x, lam0)
            if res <= _target(tol, lam0, floor):
                return lam0, x, res, it, True
            # Drift between the updated and recomputed products; refresh them.
            AX = A @ X
            continue
        if rnorm < 0.5 * best[0]:
            best = (rnorm, lam[0], X[:, 0].copy())
            since_best = 0
        else:
            since_best += 1
            if since_best > stall_window:
                break
        W = T(R)
        extra = W if P is None else np.column_stack([W, P])
        Q = _orthonormalize(extra, against=X)
        basis = np.column_stack([X, Q])
        theta, C, AQ = _rayleigh_ritz(A, basis)
        Cm = C[:, :m]
        Xn = basis @ Cm
        P = Q @ Cm[m:, :]
        X, AX, lam = Xn, AQ @ Cm, theta[:m]
        # Keep X numerically orthonormal.
        if it % 50 == 0:
            X = _orthonormalize(X)
            theta, C, AQ = _rayleigh_ritz(A, X)
            X, AX, lam = X @ C, AQ @ C, theta
            P = None
    x = best[2] / np.linalg.norm(best[2])
    lam0 = float(np.real(np.vdot(x, A @ x)))
    return lam0, x, _residual(A, x, lam0), it, False


def _pcg(A, b, M, rtol, maxiter):
    x = np.zeros_like(b)
    r = b.copy()
    z = M(r[:, None])[:, 0]
    p = z.copy()
    rz = np.vdot(r, z)
    bnorm = np.linalg.norm(b)
    for _ in range(maxiter):
        Ap = A @ p
        alpha = rz / np.vdot(p, Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= rtol * bnorm:
            break
        z = M(r[:, None])[:, 0]
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x


def _inverse_iteration(A, T, x, tol, floor, max_outer=500):
    """Power iteration on ``A^{-1}``; ``A`` must be positive definite."""
    x = x / np.linalg.norm(x)
    lam = float(np.real(np.vdot(x, A @ x)))
    for it in range(1, max_outer + 1):
        y = _pcg(A, x, T, rtol=1e-12, maxiter=20 * A.shape[0])
        x = y / np.linalg.norm(y)
        lam = float(np.real(np.vdot(x, A @ x)))
        res = _residual(A, x, lam)
        if res <= _target(tol, lam, floor):
            return lam, x, res, it, True
    return lam, x, _residual(A, x, lam), max_outer, False


def _phase_fix(x: np.ndarray) -> np.ndarray:
    """Rotate so the largest entry is real positive (makes output reproducible)."""
    k = int(np.argmax(np.abs(x)))
    if np.iscomplexobj(x):
        return x * (np.abs(x[k]) / x[k])
    return x if x[k] >= 0 else -x


def ground_state(S, opts: SolverOpts = SolverOpts(), x0: np.ndarray | None = None) -> EigenResult:
    """Smallest eigenpair of a Hermitian operator.

    ``S`` is an :class:`OperatorMatrix` or any sparse Hermitian matrix. ``x0``
    optionally warm-starts the block. Raises :class:`NoConvergence` with the best
    iterate attached if neither LOBPCG nor the inverse-iteration fallback reaches
    ``residual <= tol * max(lam, 1e-3 * 4/h**2)``.
    """
    A, floor = _unwrap(S)
    N = A.shape[0]
    complex_ = np.iscomplexobj(A.data)
    if N <= 2:
        vals, vecs = np.linalg.eigh(A.toarray())
        x = _phase_fix(vecs[:, 0])
        return EigenResult(float(vals[0]), x, _residual(A, x, vals[0]), 0, True, "dense")
    m = min(opts.block_size, N - 1)
    T = _make_preconditioner(A, opts.preconditioner)
    X = _start_block(N, m, complex_, opts.seed, x0)
    lam, x, res, iters, ok = _lobpcg(A, T, X, opts.tol, floor, opts.max_iter, opts.stall_window)
    method = "lobpcg"
    # A tight cluster at the bottom of the spectrum stalls a narrow block; widen it.
    while not ok and m < min(MAX_BLOCK, N - 1) and iters < opts.max_iter:
        m = min(4 * m, MAX_BLOCK, N - 1)
        log.info("LOBPCG stalled (residual %.3g); retrying with block size %d", res, m)
        X = _start_block(N, m, complex_, opts.seed + m, x)
        lam2, x2, res2, it2, ok = _lobpcg(A, T, X, opts.tol, floor, opts.max_iter - iters,
                                          opts.stall_window)
        iters += it2
        if ok or res2 < res:
            lam, x, res = lam2, x2, res2
    if not ok and iters < opts.max_iter:
        log.info("LOBPCG stalled after %d iterations (residual %.3g); inverse iteration", iters, res)
        lam2, x2, res2, it2, ok2 = _inverse_iteration(A, T, x, opts.tol, floor,
                                                      min(500, opts.max_iter - iters))
        if ok2 or res2 < res:
            lam, x, res, ok, method = lam2, x2, res2, ok2, "inverse-iteration"
            iters += it2
    x = _phase_fix(x)
    result = EigenResult(lam, x, res, iters, ok, method)
    if not ok:
        raise NoConvergence(f"no convergence after {iters} iterations, residual {res:.3g}", result)
    return result


def ground_state_generalized(P: GeneralizedPair, opts: SolverOpts = SolverOpts()) -> EigenResult:
    """Smallest ``lam`` with ``A v = lam M v`` for the weighted-form pair.

    Solved through the symmetric scaling ``M^{-1/2} A M^{-1/2}``; the reported
    residual is ``||A v - lam M v||`` for the unit-norm ``v``.
    """
    mass = np.asarray(P.mass, dtype=float)
    if not np.all(mass > 0) or not np.all(np.isfinite(mass)):
        raise MassNotPD("mass matrix is not positive definite")
    A = P.stiffness
    d = 1.0 / np.sqrt(mass)
    At = (sp.diags(d) @ A @ sp.diags(d)).tocsr()
    At = ((At + At.conj().T) * 0.5).tocsr()
    tol = opts.tol
    x0 = None
    res_g = np.inf
    for _ in range(4):
        r = ground_state(At, replace(opts, tol=tol), x0=x0)
        v = d * r.vector
        v = v / np.linalg.norm(v)
        lam = r.lam
        Mv = mass * v
        res_g = float(np.linalg.norm(A @ v - lam * Mv))
        if res_g <= opts.tol * abs(lam) * np.linalg.norm(Mv):
            return EigenResult(lam, v, res_g, r.iters, True, r.method)
        tol /= 10
        x0 = r.vector
    result = EigenResult(lam, v, res_g, r.iters, False, r.method)
    raise NoConvergence(f"generalized residual {res_g:.3g} above target", result)


def dense_oracle(S) -> np.ndarray:
    """Full spectrum by dense Hermitian eigendecomposition (ascending)."""
    A = S.matrix if isinstance(S, OperatorMatrix) else sp.csr_matrix(S)
    if A.shape[0] > DENSE_LIMIT:
        raise TooLarge(f"dense oracle limited to dim {DENSE_LIMIT}, got {A.shape[0]}")
    return np.linalg.eigvalsh(A.toarray())


def dense_ground_vector(S) -> tuple[float, np.ndarray]:
    A = S.matrix if isinstance(S, OperatorMatrix) else sp.csr_matrix(S)
    if A.shape[0] > DENSE_LIMIT:
        raise TooLarge(f"dense oracle limited to dim {DENSE_LIMIT}, got {A.shape[0]}")
    vals, vecs = np.linalg.eigh(A.toarray())
    return float(vals[0]), _phase_fix(vecs[:, 0])


def rayleigh(S, v) -> float:
    """``(v* S v) / (v* v)``."""
    A = S.matrix if isinstance(S, OperatorMatrix) else S
    v = np.asarray(v)
    vv = float(np.real(np.vdot(v, v)))
    if vv == 0:
        raise ZeroVector("Rayleigh quotient of the zero vector")
    q = np.vdot(v, A @ v) / vv
    if abs(q.imag) > 1e-12 * max(abs(q.real), 1.0):
        raise ValueError(f"Rayleigh quotient has imaginary part {q.imag:.3g}; matrix not Hermitian?")
    return float(q.real)
