"""Ramanujan sums, Ramanujan subspaces and the periodicity dictionary.

Columns and rows are 0-based.  Column ``i`` of a dictionary belongs to the
period ``col_period[i]``; the columns of period ``p`` occupy the half-open
range ``Phi(p-1) : Phi(p)``, which is the 1-based range
``Phi(p-1)+1 .. Phi(p)`` shifted down by one.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import gcd
from typing import Callable, Sequence, Union

import numpy as np

ZetaLike = Union[str, Callable[[np.ndarray], np.ndarray], Sequence[float]]

_IMAG_TOL = 1e-9


def _check_positive(n, name="n"):
    if int(n) != n or n < 1:
        raise ValueError(f"{name} must be a positive integer, got {n!r}")
    return int(n)


def euler_totient(n: int) -> int:
    """Number of integers in 1..n coprime to n."""
    n = _check_positive(n)
    result = n
    m = n
    d = 2
    while d * d <= m:
        if m % d == 0:
            while m % d == 0:
                m //= d
            result -= result // d
        d += 1
    if m > 1:
        result -= result // m
    return result


def totient_cumsum(n: int) -> int:
    """Phi(n) = phi(1) + ... + phi(n)."""
    n = _check_positive(n)
    return sum(euler_totient(k) for k in range(1, n + 1))


def divisors(n: int) -> list:
    """Divisors of n in increasing order (trial division)."""
    n = _check_positive(n)
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def coprimes(p: int) -> np.ndarray:
    p = _check_positive(p, "p")
    return np.array([k for k in range(1, p + 1) if gcd(k, p) == 1], dtype=np.int64)


@lru_cache(maxsize=None)
def _one_period(p: int) -> np.ndarray:
    ks = coprimes(p)
    n = np.arange(p, dtype=np.int64)
    # reduce k*n mod p first so the exponent stays small
    phase = 2.0 * np.pi * ((np.outer(n, ks) % p) / p)
    s = np.exp(1j * phase).sum(axis=1)
    if np.max(np.abs(s.imag)) > _IMAG_TOL:
        raise ArithmeticError(f"Ramanujan sum c_{p} has imaginary residue {np.max(np.abs(s.imag)):.3g}")
    out = np.rint(s.real).astype(np.int64)
    if np.max(np.abs(s.real - out)) > _IMAG_TOL:
        raise ArithmeticError(f"Ramanujan sum c_{p} is not integral to tolerance")
    out.flags.writeable = False
    return out


def ramanujan_sequence(p: int) -> np.ndarray:
    """One period ``c_p(0), ..., c_p(p-1)`` as a read-only int64 array."""
    return _one_period(_check_positive(p, "p"))


def ramanujan_sum(p: int, n: int) -> int:
    """c_p(n), the sum of e^{2 pi i k n / p} over k in 1..p coprime to p."""
    p = _check_positive(p, "p")
    return int(_one_period(p)[int(n) % p])


def build_bp(p: int) -> np.ndarray:
    """The p x p circulant with entry (i, j) = c_p(i - j)."""
    c = ramanujan_sequence(p)
    i = np.arange(p)
    return c[(i[:, None] - i[None, :]) % p]


def build_cp(p: int) -> np.ndarray:
    """First phi(p) columns of B_p."""
    return build_bp(p)[:, : euler_totient(p)]


def build_cpn(p: int, n_rows: int) -> np.ndarray:
    """C_p extended periodically to ``n_rows`` rows."""
    p = _check_positive(p, "p")
    n_rows = _check_positive(n_rows, "n_rows")
    if n_rows < p:
        raise ValueError(f"n_rows ({n_rows}) must be >= p ({p})")
    cp = build_cp(p)
    return cp[np.arange(n_rows) % p]


def build_fp(p: int) -> np.ndarray:
    """[C_{d1,p} | C_{d2,p} | ...] over the divisors d of p, a p x p matrix."""
    return np.hstack([build_cpn(d, p) for d in divisors(p)])


# --------------------------------------------------------------------------
# periodicity penalization
# --------------------------------------------------------------------------

_NAMED_ZETA = {
    "unit": lambda p: np.ones_like(p, dtype=float),
    "linear": lambda p: p.astype(float),
    "quad": lambda p: p.astype(float) ** 2,
}
_ZETA_ALIASES = {"1": "unit", "one": "unit", "p": "linear", "quadratic": "quad", "p2": "quad"}


def zeta_weights(zeta: ZetaLike, p_max: int):
    """Resolve ``zeta`` to ``(zeta_id, weights)`` where ``weights[p-1] = zeta(p)``.

    ``zeta`` may be one of ``"unit"``, ``"linear"``, ``"quad"``, a callable
    applied to the integer array ``1..p_max``, or an explicit table.
    """
    periods = np.arange(1, p_max + 1)
    if isinstance(zeta, str):
        name = _ZETA_ALIASES.get(zeta.lower(), zeta.lower())
        if name not in _NAMED_ZETA:
            raise ValueError(f"unknown penalization {zeta!r}; use unit, linear or quad")
        w = _NAMED_ZETA[name](periods)
    elif callable(zeta):
        name = "custom"
        w = np.asarray(zeta(periods), dtype=float)
        if w.shape != periods.shape:
            w = np.array([float(zeta(int(p))) for p in periods])
    else:
        name = "custom"
        w = np.asarray(zeta, dtype=float)
        if w.shape != (p_max,):
            raise ValueError(f"zeta table must have length p_max={p_max}, got {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("zeta must be strictly positive on 1..p_max")
    return name, w


# --------------------------------------------------------------------------
# dictionary
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PeriodDictionary:
    """Ramanujan dictionary A = [C_{1,N} | ... | C_{P,N}], penalty D and B = A D^-1."""

    n_rows: int
    p_max: int
    zeta_id: str
    a_matrix: np.ndarray
    d_diag: np.ndarray
    b_matrix: np.ndarray
    col_period: np.ndarray

    @property
    def n_cols(self) -> int:
        return self.a_matrix.shape[1]

    @cached_property
    def offsets(self) -> np.ndarray:
        """``offsets[p] = Phi(p)``, with ``offsets[0] = 0``."""
        counts = np.bincount(self.col_period, minlength=self.p_max + 1)
        return np.concatenate([[0], np.cumsum(counts[1:])])

    def columns_of(self, p: int) -> slice:
        if not 1 <= p <= self.p_max:
            raise ValueError(f"period {p} outside 1..{self.p_max}")
        return slice(int(self.offsets[p - 1]), int(self.offsets[p]))

    def zeta(self, p: int) -> float:
        return float(self.d_diag[self.offsets[p - 1]])

    @cached_property
    def col_sq_norms(self) -> np.ndarray:
        return np.einsum("ij,ij->j", self.b_matrix, self.b_matrix)

    @cached_property
    def gram(self) -> np.ndarray:
        g = self.b_matrix.T @ self.b_matrix
        g.flags.writeable = False
        return g

    @property
    def key(self):
        return (self.n_rows, self.p_max, self.zeta_id, self.d_diag.tobytes())


def build_dictionary(n_rows: int, p_max: int, zeta: ZetaLike = "unit") -> PeriodDictionary:
    n_rows = _check_positive(n_rows, "n_rows")
    p_max = _check_positive(p_max, "p_max")
    if n_rows < p_max:
        raise ValueError(f"n_rows ({n_rows}) must be >= p_max ({p_max})")
    name, w = zeta_weights(zeta, p_max)
    blocks = [build_cpn(p, n_rows) for p in range(1, p_max + 1)]
    a = np.hstack(blocks).astype(float)
    col_period = np.concatenate(
        [np.full(blk.shape[1], p, dtype=np.int64) for p, blk in enumerate(blocks, start=1)]
    )
    d = w[col_period - 1]
    b = a / d
    for arr in (a, d, b, col_period):
        arr.flags.writeable = False
    return PeriodDictionary(n_rows, p_max, name, a, d, b, col_period)


@lru_cache(maxsize=16)
def _cached(n_rows, p_max, zeta):
    return build_dictionary(n_rows, p_max, zeta)


def get_dictionary(n_rows: int, p_max: int, zeta: ZetaLike = "unit") -> PeriodDictionary:
    """Like :func:`build_dictionary`, memoized on ``(n_rows, p_max, zeta)``.

    Tables are converted to tuples for hashing; arbitrary callables are
    evaluated once and cached by their weight table.
    """
    if isinstance(zeta, str):
        key = zeta
    else:
        key = tuple(float(v) for v in zeta_weights(zeta, p_max)[1])
    return _cached(int(n_rows), int(p_max), key)
