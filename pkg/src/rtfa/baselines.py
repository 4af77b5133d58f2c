"""Greedy periodicity transforms over Ramanujan subspaces.

Each period ``p`` owns the subspace spanned by the columns of ``C_{p,N}``.
The algorithms below project the running residual onto these subspaces and
subtract what they keep.  Results are reported as :class:`PTResult` with the
least-squares coefficients of each kept projection in the ``C_{p,N}`` basis,
so ``eop`` has the same units as the sparse transform with unit penalty.
The energy each projection removed is in ``meta['removed']``.
"""

from functools import lru_cache

import numpy as np

from .ramanujan import build_cpn, euler_totient
from .rpt import PTResult, assemble


@lru_cache(maxsize=8)
def _bases(n_rows: int, p_max: int):
    out = []
    for p in range(1, p_max + 1):
        C = build_cpn(p, n_rows).astype(float)
        Q, _ = np.linalg.qr(C)
        out.append((C, Q))
    return tuple(out)


def _offsets(p_max):
    return np.concatenate([[0], np.cumsum([euler_totient(p) for p in range(1, p_max + 1)])])


class _Projector:
    def __init__(self, y, p_max):
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size < p_max:
            raise ValueError("y must be a vector at least p_max long")
        self.y = y
        self.p_max = p_max
        self.bases = _bases(y.size, p_max)
        self.off = _offsets(p_max)
        self.x = np.zeros(self.off[-1])
        self.removed = np.zeros(p_max)

    def project(self, p, r):
        Q = self.bases[p - 1][1]
        return Q @ (Q.T @ r)

    def energies(self, r):
        return np.array([np.sum((Q.T @ r) ** 2) for _, Q in self.bases])

    def keep(self, p, proj, sign=1.0):
        C = self.bases[p - 1][0]
        coef = np.linalg.lstsq(C, proj, rcond=None)[0]
        self.x[self.off[p - 1] : self.off[p]] += sign * coef
        self.removed[p - 1] += sign * float(proj @ proj)

    def result(self, **meta):
        return assemble(self.x, self.p_max, self.off, meta={"removed": self.removed.copy(), **meta})


def projection(y, p: int) -> np.ndarray:
    """Orthogonal projection of ``y`` onto the period-``p`` Ramanujan subspace."""
    y = np.asarray(y, dtype=float)
    Q = _bases(y.size, p)[p - 1][1]
    return Q @ (Q.T @ y)


def small_to_large(y, p_max: int, threshold: float) -> PTResult:
    """Walk p = 1..p_max and keep a projection when its norm exceeds
    ``threshold`` times the norm of the current residual."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    pr = _Projector(y, p_max)
    r = pr.y.copy()
    kept = []
    for p in range(1, p_max + 1):
        proj = pr.project(p, r)
        nr = np.linalg.norm(r)
        if nr > 0 and np.linalg.norm(proj) > threshold * nr:
            pr.keep(p, proj)
            r = r - proj
            kept.append(p)
    return pr.result(selected=tuple(kept), residual=r)


def _argmax_excluding(e, excluded):
    e = e.copy()
    for p in excluded:
        e[p - 1] = -np.inf
    return int(np.argmax(e)) + 1  # first maximum, so ties go to the lowest period


def best_correlation(y, p_max: int, m: int) -> PTResult:
    """``m`` rounds of: pick the period whose projection of the residual is
    largest, subtract that projection."""
    if m < 1:
        raise ValueError("m must be >= 1")
    pr = _Projector(y, p_max)
    r = pr.y.copy()
    chosen = []
    for _ in range(min(m, p_max)):
        p = _argmax_excluding(pr.energies(r), chosen)
        proj = pr.project(p, r)
        pr.keep(p, proj)
        r = r - proj
        chosen.append(p)
    return pr.result(selected=tuple(chosen), residual=r)


def m_best(y, p_max: int, m: int, max_sweeps: int = 20) -> PTResult:
    """Keep a list of ``m`` periods; sweep over the list replacing a member
    whenever another period removes more energy from the residual that
    excludes that member.  Stops after a sweep with no replacement."""
    if m < 1:
        raise ValueError("m must be >= 1")
    pr = _Projector(y, p_max)
    r = pr.y.copy()
    chosen, projs = [], []
    for _ in range(min(m, p_max)):
        p = _argmax_excluding(pr.energies(r), chosen)
        proj = pr.project(p, r)
        r = r - proj
        chosen.append(p)
        projs.append(proj)
    sweeps = 0
    converged = False
    for sweeps in range(1, max_sweeps + 1):
        changed = False
        for i in range(len(chosen)):
            r_i = r + projs[i]
            e = pr.energies(r_i)
            others = [q for k, q in enumerate(chosen) if k != i]
            q = _argmax_excluding(e, others)
            if q != chosen[i] and e[q - 1] > e[chosen[i] - 1]:
                chosen[i] = q
                changed = True
            projs[i] = pr.project(chosen[i], r_i)
            r = r_i - projs[i]
        if not changed:
            converged = True
            break
    for p, proj in zip(chosen, projs):
        pr.keep(p, proj)
    return pr.result(selected=tuple(chosen), residual=r, sweeps=sweeps, converged=converged)
