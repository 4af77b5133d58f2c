"""l1-penalized least squares (basis pursuit denoising) with a KKT certificate.

Solves ``min_x 0.5*||y - Bx||^2 + lam*||x||_1`` for one or many right-hand
sides that share ``B``.  The workhorse is ADMM on column-normalized atoms.
Every few iterations the current support is "polished" by solving the
reduced normal equations exactly; a column is accepted once the polished
point satisfies the subgradient conditions

    |b_i^T (y - Bx)| <= lam + tol                  for all i
    |b_i^T (y - Bx) - lam*sign(x_i)| <= tol        where x_i != 0

Columns that ADMM cannot certify within ``max_iters`` are finished with
coordinate descent (see :mod:`rtfa._kernels`).
"""

import threading
import weakref
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import _kernels
from .ramanujan import PeriodDictionary

GRAM_LIMIT = 5000  # atoms; above this the Gram matrix is never materialized
ADMM_LIMIT = 4000  # min(rows, atoms); above this ADMM factorizations are skipped


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 5000
    primal_tol: float = 1e-7
    dual_tol: float = 1e-7
    kkt_tol: float = 1e-6
    rho: float = 1.0
    polish_every: int = 10
    cd_sweeps: int = 20000

    def __post_init__(self):
        if self.max_iters < 1 or self.polish_every < 1 or self.cd_sweeps < 1:
            raise ValueError("iteration counts must be >= 1")
        for name in ("primal_tol", "dual_tol", "kkt_tol", "rho"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass
class SparseSolution:
    x: np.ndarray
    kkt_residual: float
    iterations: int
    objective: float


@dataclass
class BatchSolution:
    x: np.ndarray
    kkt_residual: np.ndarray
    iterations: np.ndarray
    objective: np.ndarray

    def column(self, j: int) -> SparseSolution:
        return SparseSolution(
            self.x[:, j].copy(), float(self.kkt_residual[j]), int(self.iterations[j]), float(self.objective[j])
        )


class NotConverged(RuntimeError):
    """Raised when the KKT certificate cannot be reached.

    ``solution`` holds the best iterate (a :class:`SparseSolution` or a
    :class:`BatchSolution`) and ``columns`` the offending column indices.
    """

    def __init__(self, message, solution, columns=()):
        super().__init__(message)
        self.solution = solution
        self.columns = tuple(int(c) for c in columns)

    @property
    def kkt_residual(self):
        r = getattr(self.solution, "kkt_residual", None)
        return float(np.max(r)) if r is not None else float(getattr(self.solution, "kkt_max", np.inf))


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def kkt_from_gradient(g, x, lam):
    """Largest violation of the lasso subgradient conditions.

    ``g = B^T (y - Bx)``; works column-wise on 2-D input.
    """
    nz = x != 0
    on = np.abs(g - lam * np.sign(x))
    off = np.maximum(np.abs(g) - lam, 0.0)
    viol = np.where(nz, on, off)
    return viol.max(axis=0) if viol.size else np.zeros(viol.shape[1:])


def kkt_residual(B, y, x, lam):
    B = B.b_matrix if isinstance(B, PeriodDictionary) else np.asarray(B, dtype=float)
    return float(kkt_from_gradient(B.T @ (y - B @ x), x, lam))


def objective(B, y, x, lam):
    B = B.b_matrix if isinstance(B, PeriodDictionary) else np.asarray(B, dtype=float)
    r = y - B @ x
    return 0.5 * float(r @ r) + lam * float(np.abs(x).sum())


class LassoOperator:
    """Column-normalized copy of ``B`` plus cached ADMM factorizations."""

    def __init__(self, B, gram=None):
        self.B = np.asarray(B, dtype=float)
        m, n = self.B.shape
        sq = np.einsum("ij,ij->j", self.B, self.B)
        self.scale = np.sqrt(sq)
        live = self.scale > 0
        inv = np.zeros(n)
        inv[live] = 1.0 / self.scale[live]
        self.live = live
        self.Bn = self.B * inv
        self.col_sq = sq
        self._gram_n = None
        if gram is not None:
            self._gram_n = gram * np.outer(inv, inv)
        self._factors = {}
        self._lock = threading.Lock()
        self._fortran = None

    @property
    def shape(self):
        return self.B.shape

    @property
    def use_admm(self):
        return min(self.B.shape) <= ADMM_LIMIT

    @property
    def gram_n(self):
        if self._gram_n is None and self.B.shape[1] <= GRAM_LIMIT:
            with self._lock:
                if self._gram_n is None:
                    self._gram_n = self.Bn.T @ self.Bn
        return self._gram_n

    @property
    def fortran_B(self):
        if self._fortran is None:
            self._fortran = np.asfortranarray(self.B)
        return self._fortran

    def gram_block(self, S):
        g = self.gram_n
        if g is not None:
            return g[np.ix_(S, S)]
        bs = self.Bn[:, S]
        return bs.T @ bs

    def _factor(self, rho):
        with self._lock:
            f = self._factors.get(rho)
            if f is None:
                m, n = self.B.shape
                if m >= n:
                    mat = self.gram_n if self.gram_n is not None else self.Bn.T @ self.Bn
                    mat = mat + rho * np.eye(n)
                else:
                    mat = self.Bn @ self.Bn.T + rho * np.eye(m)
                f = linalg.cho_factor(mat, lower=True, check_finite=False)
                if len(self._factors) > 8:
                    self._factors.clear()
                self._factors[rho] = f
            return f

    def solve(self, rho, q):
        """(Bn^T Bn + rho I)^{-1} q."""
        m, n = self.B.shape
        f = self._factor(rho)
        if m >= n:
            return linalg.cho_solve(f, q, check_finite=False)
        t = linalg.cho_solve(f, self.Bn @ q, check_finite=False)
        return (q - self.Bn.T @ t) / rho


_OPERATORS = weakref.WeakKeyDictionary()
_OP_LOCK = threading.Lock()


def operator_for(B) -> LassoOperator:
    if isinstance(B, LassoOperator):
        return B
    if isinstance(B, PeriodDictionary):
        with _OP_LOCK:
            op = _OPERATORS.get(B)
            if op is None:
                gram = B.gram if B.n_cols <= GRAM_LIMIT else None
                op = LassoOperator(B.b_matrix, gram)
                _OPERATORS[B] = op
        return op
    return LassoOperator(B)


def _polish(op, y_col, ct_col, support, sign, lam, tol, refine=25):
    """Active-set refinement started from ``support`` with signs ``sign``.

    Solves the reduced normal equations, drops atoms whose sign flips, adds
    atoms that violate the optimality bound, and repeats.  Returns
    ``(x, residual)`` once the certificate holds, else ``(None, best residual)``.
    """
    n = op.B.shape[1]
    S = np.asarray(support, dtype=np.int64)
    sg = np.asarray(sign, dtype=float)
    w_all = np.where(op.live, lam / np.where(op.live, op.scale, 1.0), np.inf)
    gram = op.gram_n
    best = np.inf
    for _ in range(refine + 1):
        xs = np.zeros(0)
        if S.size:
            rhs = ct_col[S] - w_all[S] * sg
            G = op.gram_block(S)
            try:
                c = linalg.cho_factor(G, lower=True, check_finite=False)
                xs = linalg.cho_solve(c, rhs, check_finite=False)
            except linalg.LinAlgError:
                xs = np.linalg.lstsq(G, rhs, rcond=None)[0]
            flipped = xs * sg <= 0
            if flipped.any():
                S, sg = S[~flipped], sg[~flipped]
                continue
        if gram is not None:
            gt = ct_col - gram[:, S] @ xs
        else:
            gt = op.Bn.T @ (y_col - op.Bn[:, S] @ xs)
        x = np.zeros(n)
        x[S] = xs / op.scale[S]
        res = float(kkt_from_gradient(gt * op.scale, x, lam))
        if res <= tol:
            return x, res
        best = min(best, res)
        ratio = np.abs(gt) / w_all
        ratio[S] = 0.0
        viol = np.flatnonzero(ratio > 1.0)
        if viol.size == 0:
            break
        take = max(5, S.size // 10)
        if viol.size > take:
            viol = viol[np.argsort(ratio[viol])[::-1][:take]]
        S = np.concatenate([S, viol])
        sg = np.concatenate([sg, np.sign(gt[viol])])
    return None, best


def _finish_cd(op, y_col, x0, lam, opts, tol):
    x = np.array(x0, dtype=float)
    weights = np.full(op.B.shape[1], float(lam))
    sweeps = _kernels.cd_lasso(op.fortran_B, np.ascontiguousarray(y_col), x, weights, op.col_sq, opts.cd_sweeps, 0.5 * tol)
    support = np.flatnonzero(x)
    xp, res = _polish(op, y_col, op.Bn.T @ y_col, support, np.sign(x[support]), lam, tol)
    if xp is not None:
        return xp, res, int(sweeps)
    g = op.B.T @ (y_col - op.B @ x)
    return x, float(kkt_from_gradient(g, x, lam)), int(sweeps)


def solve_batch(B, Y, lam, opts: SolverOptions = None, x0=None, raise_on_failure=True) -> BatchSolution:
    """Independent lasso problems ``min 0.5||Y[:, j] - Bx||^2 + lam||x||_1``.

    All columns share one factorization and are iterated together; a
    column leaves the iteration as soon as it is certified.
    """
    opts = opts or SolverOptions()
    if not lam > 0:
        raise ValueError("lambda must be strictly positive")
    op = operator_for(B)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    m, n = op.shape
    if Y.shape[0] != m:
        raise ValueError(f"signal length {Y.shape[0]} does not match dictionary rows {m}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("signal contains non-finite values")
    T = Y.shape[1]
    tol = opts.kkt_tol
    X = np.zeros((n, T))
    resid = np.full(T, np.inf)
    iters = np.zeros(T, dtype=np.int64)
    done = np.zeros(T, dtype=bool)

    Ct = op.Bn.T @ Y
    w = np.where(op.live, lam / np.where(op.live, op.scale, 1.0), np.inf)
    rho = float(opts.rho)
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float).reshape(n, -1)
        if x0.shape[1] == 1 and T > 1:
            x0 = np.repeat(x0, T, axis=1)
        z = x0 * op.scale[:, None]
        u = (Ct - op.Bn.T @ (op.Bn @ z)) / rho
    else:
        z = np.zeros((n, T))
        u = np.zeros((n, T))

    tried = [None] * T

    def certify(cols):
        for j in cols:
            zj = z[:, j]
            support = np.flatnonzero(zj)
            key = (support.tobytes(), np.signbit(zj[support]).tobytes())
            if key == tried[j]:
                continue
            tried[j] = key
            xp, res = _polish(op, Y[:, j], Ct[:, j], support, np.sign(zj[support]), lam, tol)
            resid[j] = min(resid[j], res)
            if xp is not None:
                X[:, j] = xp
                resid[j] = res
                done[j] = True

    certify(range(T))
    prev_support = z != 0

    if op.use_admm:
        for it in range(1, opts.max_iters + 1):
            a = np.flatnonzero(~done)
            if a.size == 0:
                break
            za, ua = z[:, a], u[:, a]
            xa = op.solve(rho, Ct[:, a] + rho * (za - ua))
            zn = soft_threshold(xa + ua, w[:, None] / rho)
            un = ua + xa - zn
            z[:, a] = zn
            u[:, a] = un
            iters[a] = it
            r = np.linalg.norm(xa - zn, axis=0)
            s = rho * np.linalg.norm(zn - za, axis=0)
            eps_p = opts.primal_tol * np.maximum(np.maximum(np.linalg.norm(xa, axis=0), np.linalg.norm(zn, axis=0)), 1e-12)
            eps_d = opts.dual_tol * np.maximum(rho * np.linalg.norm(un, axis=0), 1e-12)
            met = (r <= eps_p) & (s <= eps_d)
            if it % opts.polish_every == 0 or met.any():
                support = z[:, a] != 0
                stable = np.all(support == prev_support[:, a], axis=0)
                prev_support[:, a] = support
                certify(a[stable | met])
            if it % 5 == 0:
                R = np.sqrt(np.sum(r * r))
                Sd = np.sqrt(np.sum(s * s))
                if R > 10.0 * Sd:
                    rho *= 2.0
                    u[:, a] /= 2.0
                elif Sd > 10.0 * R:
                    rho /= 2.0
                    u[:, a] *= 2.0

    for j in np.flatnonzero(~done):
        xs, res, sweeps = _finish_cd(op, Y[:, j], z[:, j] / np.where(op.live, op.scale, 1.0), lam, opts, tol)
        X[:, j] = xs
        resid[j] = res
        iters[j] += sweeps
        done[j] = res <= tol

    R = Y - op.B @ X
    obj = 0.5 * np.einsum("ij,ij->j", R, R) + lam * np.abs(X).sum(axis=0)
    sol = BatchSolution(X, resid, iters, obj)
    bad = np.flatnonzero(resid > tol)
    if bad.size and raise_on_failure:
        raise NotConverged(
            f"{bad.size} of {T} problems not certified (worst KKT residual {resid[bad].max():.3g})", sol, bad
        )
    return sol


def bpdn_solve(dictionary, y, lam, opts: SolverOptions = None, x0=None) -> SparseSolution:
    """Certified minimizer of ``0.5*||y - Bx||^2 + lam*||x||_1``.

    ``dictionary`` is a :class:`PeriodDictionary` (its ``b_matrix`` is used)
    or any 2-D array.  Raises :class:`NotConverged` carrying the best iterate.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("y must be a vector; use bpdn_solve_multi for several columns")
    try:
        sol = solve_batch(dictionary, y[:, None], lam, opts, x0)
    except NotConverged as exc:
        raise NotConverged(str(exc), exc.solution.column(0)) from None
    return sol.column(0)


def bpdn_solve_multi(dictionary, y_cols, lam, opts: SolverOptions = None, x0=None) -> SparseSolution:
    """Certified minimizer of ``0.5*||Y - B x 1^T||_F^2 + lam*||x||_1``.

    Uses the identity ``sum_j ||y_j - Bx||^2 = k ||ybar - Bx||^2 + const``:
    the problem is the single-column one on the column mean with ``lam/k``.
    The reported residual and objective refer to the multi-column problem.
    """
    opts = opts or SolverOptions()
    Y = np.asarray(y_cols, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    k = Y.shape[1]
    if k < 1:
        raise ValueError("need at least one column")
    ybar = Y.mean(axis=1)
    inner = SolverOptions(
        opts.max_iters, opts.primal_tol, opts.dual_tol, opts.kkt_tol / k, opts.rho, opts.polish_every, opts.cd_sweeps
    )
    try:
        s = bpdn_solve(dictionary, ybar, lam / k, inner, x0)
        failed = None
    except NotConverged as exc:
        s = exc.solution
        failed = exc
    B = dictionary.b_matrix if isinstance(dictionary, PeriodDictionary) else np.asarray(dictionary, dtype=float)
    Bx = B @ s.x
    g = B.T @ (Y.sum(axis=1) - k * Bx)
    res = float(kkt_from_gradient(g, s.x, lam))
    R = Y - Bx[:, None]
    obj = 0.5 * float(np.sum(R * R)) + lam * float(np.abs(s.x).sum())
    out = SparseSolution(s.x, res, s.iterations, obj)
    if failed is not None:
        raise NotConverged(str(failed), out)
    return out
