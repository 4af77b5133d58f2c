"""Exact evaluation of the support-recovery guarantees for the sparse period
transform, and Monte Carlo trials that test them.

Notation follows the code: ``S`` is the set of dictionary columns owned by
the true periods, ``G = B_S^T B_S``, ``n_s = |S|``.  The truncated
correlation maxima bound every partial inner product between two shifted
Ramanujan sequences over fewer than one common period.
"""

from dataclasses import dataclass, field
from math import gcd
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .ramanujan import PeriodDictionary, build_cp, euler_totient, get_dictionary, ramanujan_sequence
from .rpt import assemble
from .signals import adjacent_swap_permutation
from .solver import NotConverged, SolverOptions, bpdn_solve


def _lcm(a, b):
    return a * b // gcd(a, b)


def truncated_correlation(p: int, q: int, convention: str = "terms") -> float:
    """max over shifts s < phi(p), t < phi(q) and lengths m < lcm(p, q) of
    ``|sum_n c_p(n - s) c_q(n - t)|`` (unweighted).

    ``convention="terms"`` sums ``n = 0..m-1`` (the partial sums that occur in
    ``B^T B``); ``"shifted"`` sums ``n = 1..m``.
    """
    start = {"terms": 0, "shifted": 1}[convention]
    cp = ramanujan_sequence(p).astype(float)
    cq = ramanujan_sequence(q).astype(float)
    return float(_kernels.trunc_corr_max(cp, cq, euler_totient(p), euler_totient(q), _lcm(p, q), start))


def truncated_correlation_maxima(d: PeriodDictionary, true_periods, convention: str = "terms"):
    """``(m_ss, m_ssc)``: weighted truncated-correlation maxima within the true
    periods and between true and remaining periods."""
    S = sorted(set(int(p) for p in true_periods))
    if not S or S[0] < 1 or S[-1] > d.p_max:
        raise ValueError("true periods must lie in 1..p_max")
    rest = [q for q in range(1, d.p_max + 1) if q not in S]
    z = {p: d.zeta(p) for p in range(1, d.p_max + 1)}
    m_ss = max(truncated_correlation(p, q, convention) / (z[p] * z[q]) for p in S for q in S)
    m_ssc = max((truncated_correlation(p, q, convention) / (z[p] * z[q]) for p in S for q in rest), default=0.0)
    return m_ss, m_ssc


def _inf_norm(A):
    return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0


@dataclass
class TheoremInstance:
    dict: PeriodDictionary
    true_periods: tuple
    x_star: np.ndarray
    components: list  # per-period clean signals y_i
    n_s: int
    m_ss: float
    m_ssc: float
    eig_min_cp: dict  # p -> smallest eigenvalue of C_p^T C_p
    k_bound: float
    support: np.ndarray
    gram_inv_inf: float  # ||G^{-1}||_inf
    resid_op_inf: float  # ||B_Sc^T (I - B_S G^{-1} B_S^T)||_inf
    pinv_inf: float  # ||G^{-1} B_S^T||_inf
    cross_inf: float  # ||B_Sc^T B_S G^{-1}||_inf
    eig_min_gram: float
    col_norm_sq_max: float  # C
    beta: np.ndarray

    @property
    def y(self):
        return self.dict.b_matrix @ self.x_star

    @property
    def m(self):
        return max(self.m_ss, self.m_ssc)

    @property
    def m1_sy(self):
        return self.resid_op_inf * float(np.max(np.abs(self.y)))

    @property
    def m2_sy(self):
        return self.pinv_inf * float(np.max(np.abs(self.y)))

    @property
    def incoherence(self):
        """``n_s^2 * m_ssc / K``; the guarantees need this below 1."""
        return self.n_s**2 * self.m_ssc / self.k_bound if self.k_bound > 0 else np.inf

    @property
    def well_posed(self):
        return self.k_bound > self.n_s**2 * self.m_ssc


def make_instance(n_rows: int, p_max: int, true_periods, zeta="unit", x_star=None, seed=None,
                  coef_scale: float = 1.0, convention: str = "terms") -> TheoremInstance:
    """Instance with signal ``B x*`` supported on the columns of ``true_periods``.

    Without ``x_star`` the active coefficients are drawn i.i.d. from
    ``coef_scale * N(0, 1)``.
    """
    d = get_dictionary(n_rows, p_max, zeta)
    periods = tuple(sorted(set(int(p) for p in true_periods)))
    if not periods or periods[0] < 1 or periods[-1] > p_max:
        raise ValueError("true periods must lie in 1..p_max")
    S = np.concatenate([np.arange(d.offsets[p - 1], d.offsets[p]) for p in periods])
    if x_star is None:
        rng = np.random.default_rng(seed)
        x_star = np.zeros(d.n_cols)
        x_star[S] = coef_scale * rng.standard_normal(S.size)
    x_star = np.asarray(x_star, dtype=float)
    if np.any(np.delete(x_star, S) != 0):
        raise ValueError("x_star has entries outside the true periods")
    B = d.b_matrix
    comps = [B[:, d.columns_of(p)] @ x_star[d.columns_of(p)] for p in periods]
    m_ss, m_ssc = truncated_correlation_maxima(d, periods, convention)
    eig = {p: float(np.linalg.eigvalsh(build_cp(p).T @ build_cp(p).astype(float))[0]) for p in periods}
    n_s = int(S.size)
    M = max(m_ss, m_ssc)
    K = min((n_rows // p) * eig[p] / d.zeta(p) ** 2 for p in periods) - n_s * M
    BS = B[:, S]
    Sc = np.setdiff1d(np.arange(d.n_cols), S)
    BSc = B[:, Sc]
    G = BS.T @ BS
    Ginv = np.linalg.inv(G)
    pinv = Ginv @ BS.T
    cross = BSc.T @ BS @ Ginv
    resid_op = BSc.T - cross @ BS.T
    beta = np.array([np.max(np.abs(x_star[d.columns_of(p)])) for p in periods])
    return TheoremInstance(
        d, periods, x_star, comps, n_s, m_ss, m_ssc, eig, float(K), S,
        _inf_norm(Ginv), _inf_norm(resid_op), _inf_norm(pinv), _inf_norm(cross),
        float(np.linalg.eigvalsh(G)[0]), float(d.col_sq_norms.max()), beta,
    )


def lemma_bounds(inst: TheoremInstance) -> dict:
    """Exact eigenvalue and cross-term norms next to their closed-form bounds."""
    K = inst.k_bound
    rep = {
        "K": K,
        "n_s": inst.n_s,
        "m_ss": inst.m_ss,
        "m_ssc": inst.m_ssc,
        "eig_min_exact": inst.eig_min_gram,
        "cross_norm_exact": inst.cross_inf,
        "gram_inv_norm_exact": inst.gram_inv_inf,
    }
    if K <= 0:
        rep.update(valid=False, note="N too small for the bound (K <= 0)")
        return rep
    cross_bound = inst.n_s**2 * inst.m_ssc / K
    rep.update(
        valid=True,
        eig_bound_holds=inst.eig_min_gram >= K * (1 - 1e-12),
        cross_bound=cross_bound,
        cross_bound_holds=inst.cross_inf <= cross_bound * (1 + 1e-12),
        gram_inv_bound=1.0 / K,
        gram_inv_bound_holds=inst.gram_inv_inf <= (1.0 / K) * (1 + 1e-12),
    )
    return rep


# ---------------------------------------------------------------------------
# perturbations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    """Multiplicative envelope: fixed ``e``, or ``1 + max_dev*U(-1, 1)`` per trial."""

    max_dev: float = 0.0
    e: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0 <= self.max_dev < 1:
            raise ValueError("max_dev must lie in [0, 1) so the envelope stays positive")

    def sample(self, rng, n):
        if self.e is not None:
            return np.asarray(self.e, dtype=float)
        return 1.0 + self.max_dev * rng.uniform(-1.0, 1.0, n)


@dataclass(frozen=True)
class Jitter:
    """Each component is permuted inside consecutive blocks of its own period
    length; each block swaps one random adjacent pair with probability ``prob``."""

    prob: float = 0.5
    block_len: Optional[Sequence[int]] = None

    def sample(self, rng, inst: TheoremInstance):
        n = inst.dict.n_rows
        perms = []
        for i, p in enumerate(inst.true_periods):
            L = p if self.block_len is None else int(self.block_len[i])
            blocks = [(a, min(a + L, n)) for a in range(0, n, L)]
            perms.append(adjacent_swap_permutation(n, blocks, rng, self.prob))
        return perms


@dataclass(frozen=True)
class Noise:
    sigma: float


@dataclass
class ConditionReport:
    kind: str
    precondition: bool
    holds: bool
    margin: float
    beta_threshold: float
    detectable: tuple
    details: dict = field(default_factory=dict)


def theorem_conditions(inst: TheoremInstance, perturbation, lam: float, realized=None) -> ConditionReport:
    """Evaluate the hypothesis of the matching recovery guarantee.

    ``realized`` is the drawn perturbation (envelope vector, list of
    permutations) when it differs from what ``perturbation`` fixes.
    """
    K = inst.k_bound
    pre = inst.well_posed
    slack = 1.0 - inst.incoherence if pre else -np.inf
    ginv = inst.gram_inv_inf
    if isinstance(perturbation, Envelope):
        e = realized if realized is not None else perturbation.e
        dev = float(np.max(np.abs(np.asarray(e) - 1.0))) if e is not None else float(perturbation.max_dev)
        bound = (lam / inst.m1_sy) * slack if pre and inst.m1_sy > 0 else (np.inf if pre else -np.inf)
        thr = dev * inst.m2_sy + lam * ginv
        holds = pre and dev < bound
        return ConditionReport("envelope", pre, bool(holds), bound - dev, thr, _detectable(inst, thr),
                               {"max_dev": dev, "dev_bound": bound})
    if isinstance(perturbation, Jitter):
        ninf = [float(np.max(np.abs(y))) for y in inst.components]
        m1 = sum(inst.resid_op_inf * v for v in ninf)
        m2 = sum(inst.pinv_inf * v for v in ninf)
        lam_min = 2 * K * m1 / (K - inst.n_s**2 * inst.m_ssc) if pre else np.inf
        thr = 2 * m2 + lam * ginv
        holds = pre and lam > lam_min
        return ConditionReport("jitter", pre, bool(holds), lam - lam_min, thr, _detectable(inst, thr),
                               {"lambda_min": lam_min})
    if isinstance(perturbation, Noise):
        prob = noise_probability(inst, perturbation.sigma, lam)
        thr = noise_beta_threshold(inst, perturbation.sigma, lam)
        return ConditionReport("noise", pre, bool(pre and prob > 0), prob, thr, _detectable(inst, thr),
                               {"probability": prob})
    raise TypeError(f"unknown perturbation {perturbation!r}")


def _detectable(inst, thr):
    return tuple(p for p, b in zip(inst.true_periods, inst.beta) if b > thr)


def noise_probability(inst: TheoremInstance, sigma: float, lam: float) -> float:
    """Lower bound on the probability of support containment under white noise."""
    if not inst.well_posed:
        return -np.inf
    if sigma == 0:
        return 1.0
    K = inst.k_bound
    gap = K - inst.n_s**2 * inst.m_ssc
    expo = lam**2 * gap**2 / (2 * inst.col_norm_sq_max * sigma**2 * K**2)
    return float(1.0 - (inst.dict.n_cols - inst.n_s) * np.exp(-expo))


def noise_beta_threshold(inst: TheoremInstance, sigma: float, lam: float) -> float:
    K = inst.k_bound
    gap = K - inst.n_s**2 * inst.m_ssc
    rest = inst.dict.n_cols - inst.n_s
    log_term = np.log(inst.n_s) - np.log(rest) if rest > 0 else 0.0
    inner = lam**2 * gap**2 / K**4 + 2 * inst.col_norm_sq_max * sigma**2 * log_term / K**2
    return float(np.sqrt(max(inner, 0.0)) + lam * inst.gram_inv_inf)


def noise_lambda(inst: TheoremInstance, sigma: float, target: float = 0.9) -> float:
    """Smallest penalty whose noise guarantee reaches probability ``target``.

    Scales as ``sigma * sqrt(C)``, i.e. with the square root of the length.
    """
    K = inst.k_bound
    gap = K - inst.n_s**2 * inst.m_ssc
    rest = inst.dict.n_cols - inst.n_s
    kappa = np.sqrt(2.0 * np.log(rest / (1.0 - target)))
    return float(kappa * sigma * np.sqrt(inst.col_norm_sq_max) * K / gap)


@dataclass
class TrialReport:
    kind: str
    trials: int
    hypothesis_held: int
    contained: int
    detected: int
    detect_checked: int
    solver_failures: int
    guarantee: float
    reports: list = field(default_factory=list, repr=False)

    @property
    def containment_rate(self):
        n = self.trials - self.solver_failures
        return self.contained / n if n else float("nan")

    @property
    def detection_rate(self):
        return self.detected / self.detect_checked if self.detect_checked else float("nan")


def perturbed_signal(inst: TheoremInstance, perturbation, rng):
    """Draw one perturbed observation and the realized perturbation."""
    if isinstance(perturbation, Envelope):
        e = perturbation.sample(rng, inst.dict.n_rows)
        return e * inst.y, e
    if isinstance(perturbation, Jitter):
        perms = perturbation.sample(rng, inst)
        return sum(y[p] for y, p in zip(inst.components, perms)), perms
    if isinstance(perturbation, Noise):
        return inst.y + rng.normal(0.0, perturbation.sigma, inst.dict.n_rows), None
    raise TypeError(f"unknown perturbation {perturbation!r}")


def recovery_trial(inst: TheoremInstance, perturbation, lam: float, trials: int = 100, seed=0,
                   opts: SolverOptions = None) -> TrialReport:
    """Solve ``trials`` perturbed problems and count support containment and
    detection of every period the guarantee says must be found."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = np.random.SeedSequence(seed).spawn(trials)
    support = set(inst.support.tolist())
    held = contained = detected = checked = failures = 0
    reports = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        y, realized = perturbed_signal(inst, perturbation, rng)
        rep = theorem_conditions(inst, perturbation, lam, realized)
        reports.append(rep)
        held += rep.holds
        try:
            sol = bpdn_solve(inst.dict, y, lam, opts)
        except NotConverged:
            failures += 1
            continue
        res = assemble(sol.x, inst.dict.p_max, inst.dict.offsets)
        contained += set(res.sop.tolist()) <= support
        if rep.detectable:
            checked += 1
            detected += set(rep.detectable) <= set(res.ip)
    guarantee = 1.0
    if isinstance(perturbation, Noise):
        guarantee = noise_probability(inst, perturbation.sigma, lam)
    return TrialReport(type(perturbation).__name__.lower(), trials, held, contained, detected, checked, failures,
                       guarantee, reports)
