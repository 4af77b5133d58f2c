"""Ramanujan periodicity transform (RPT) and its multi-column variant."""

from dataclasses import dataclass, field

import numpy as np

from .ramanujan import PeriodDictionary, ZetaLike, euler_totient, get_dictionary
from .solver import SolverOptions, bpdn_solve, bpdn_solve_multi

ZERO_ABS = 1e-10
ZERO_REL = 1e-6


@dataclass
class PTResult:
    """Coefficients, energy per period, intrinsic periods and their columns."""

    x: np.ndarray
    eop: np.ndarray
    ip: tuple
    sop: np.ndarray
    kkt_residual: float = 0.0
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def p_max(self) -> int:
        return self.eop.shape[0]


def _offsets(p_max):
    return np.concatenate([[0], np.cumsum([euler_totient(p) for p in range(1, p_max + 1)])])


def clean_zeros(x, abs_tol=ZERO_ABS, rel_tol=ZERO_REL):
    """Copy of ``x`` with entries at or below ``abs_tol + rel_tol*max|x|`` set to 0."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x.copy()
    cut = abs_tol + rel_tol * np.max(np.abs(x))
    return np.where(np.abs(x) <= cut, 0.0, x)


def eop_of(x, p_max: int, offsets=None) -> np.ndarray:
    """Energy per period: sum of squared coefficients over each period's columns."""
    x = np.asarray(x, dtype=float)
    off = _offsets(p_max) if offsets is None else offsets
    if x.ndim != 1 or x.shape[0] != off[-1]:
        raise ValueError(f"x has length {x.shape}, expected Phi({p_max}) = {off[-1]}")
    csum = np.concatenate([[0.0], np.cumsum(x * x)])
    e = csum[off[1:]] - csum[off[:-1]]
    return np.maximum(e, 0.0)


def eop_matrix(X, p_max: int, offsets=None) -> np.ndarray:
    """Column-wise :func:`eop_of` for an ``(Phi(p_max), T)`` coefficient matrix."""
    off = _offsets(p_max) if offsets is None else offsets
    X = np.asarray(X, dtype=float)
    if X.shape[0] != off[-1]:
        raise ValueError(f"X has {X.shape[0]} rows, expected {off[-1]}")
    # segment sums; np.add.reduceat needs non-empty segments, which always holds (phi >= 1)
    return np.add.reduceat(X * X, off[:-1], axis=0)


def support_of(ip, offsets) -> np.ndarray:
    if not ip:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([np.arange(offsets[p - 1], offsets[p]) for p in ip]).astype(np.int64)


def assemble(x, p_max, offsets=None, kkt=0.0, iterations=0, meta=None) -> PTResult:
    off = _offsets(p_max) if offsets is None else offsets
    xc = clean_zeros(x)
    eop = eop_of(xc, p_max, off)
    ip = tuple(int(p) for p in np.flatnonzero(eop > 0) + 1)
    return PTResult(xc, eop, ip, support_of(ip, off), float(kkt), int(iterations), dict(meta or {}))


def _dictionary(n, p_max, zeta):
    if isinstance(zeta, PeriodDictionary):
        if zeta.n_rows != n or zeta.p_max != p_max:
            raise ValueError("supplied dictionary does not match the signal length or p_max")
        return zeta
    return get_dictionary(n, p_max, zeta)


def rpt(y, p_max: int, zeta: ZetaLike = "unit", lam: float = 1.0, opts: SolverOptions = None) -> PTResult:
    """Sparse period decomposition of ``y`` over the Ramanujan dictionary.

    ``zeta`` selects the per-period penalty (or pass a prebuilt
    :class:`PeriodDictionary`).  Raises ``NotConverged`` from the solver.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("y must be one-dimensional")
    if y.shape[0] < p_max:
        raise ValueError(f"signal length {y.shape[0]} is shorter than p_max={p_max}")
    d = _dictionary(y.shape[0], p_max, zeta)
    s = bpdn_solve(d, y, lam, opts)
    return assemble(s.x, p_max, d.offsets, s.kkt_residual, s.iterations, {"lambda": lam, "zeta": d.zeta_id})


def vrpt(y_cols, p_max: int, zeta: ZetaLike = "unit", lam: float = 1.0, opts: SolverOptions = None) -> PTResult:
    """One shared coefficient vector for all columns of ``y_cols`` (N x k)."""
    Y = np.asarray(y_cols, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[1] < 1:
        raise ValueError("need at least one column")
    if Y.shape[0] < p_max:
        raise ValueError(f"signal length {Y.shape[0]} is shorter than p_max={p_max}")
    d = _dictionary(Y.shape[0], p_max, zeta)
    s = bpdn_solve_multi(d, Y, lam, opts)
    return assemble(
        s.x, p_max, d.offsets, s.kkt_residual, s.iterations, {"lambda": lam, "zeta": d.zeta_id, "k": Y.shape[1]}
    )


__all__ = ["PTResult", "rpt", "vrpt", "eop_of", "eop_matrix", "assemble", "clean_zeros"]
