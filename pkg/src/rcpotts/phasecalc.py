"""Phase thresholds, fixed points and derived constants for Potts/RC on random regular graphs.

All quantities depend only on ``(q, d, beta)``.  The ordered fixed point is
parametrised by ``t > 1`` solving

    e^beta - 1 = g(t) := (t - 1)(t^{d-1} + q - 1) / (t^{d-1} - t),

and is evaluated internally in ``s = ln t`` with ``expm1`` so that the
removable singularity at ``t = 1`` (where ``g -> q/(d-2)``) is harmless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.optimize import brentq, minimize_scalar

# Numerical tolerances, kept in one place.
TOL = {
    "root_rel": 1e-11,      # relative residual for solve_t
    "beta_u_abs": 1e-10,    # bisection tolerance on beta_u
    "gw_abs": 1e-13,        # extinction probability tolerance
    "s_xatol": 1e-13,       # minimisation tolerance in s = ln t
    "grid_per_decade": 64,
    "grid_t_lo": 1e-8,      # smallest t - 1 on the scan grid
    "grid_t_hi": 1e6,       # initial largest t - 1 on the scan grid
}

DEFAULT_THETA = 0.05


class NoOrderedRoot(ValueError):
    """Raised when the ordered fixed-point equation has no root (beta < beta_u)."""


def _check_qd(q: int, d: int) -> None:
    if int(q) != q or int(d) != d or q < 3 or d < 3:
        raise ValueError(f"need integers q >= 3 and d >= 3, got q={q}, d={d}")


def p_of_beta(beta: float) -> float:
    return -math.expm1(-beta)


def p_hat(p: float, q: float) -> float:
    """Inclusion probability of a cut edge, p / ((1-p) q + p)."""
    return p / ((1.0 - p) * q + p)


# -- thresholds -------------------------------------------------------------

def beta_c(q: int, d: int) -> float:
    _check_qd(q, d)
    return math.log((q - 2) / ((q - 1) ** (1 - 2 / d) - 1))


def beta_u_prime(q: int, d: int) -> float:
    """ln(1 + q/(d-1)), the upper threshold as written in the definition of the phases."""
    _check_qd(q, d)
    return math.log1p(q / (d - 1))


def beta_u_prime_alt(q: int, d: int) -> float:
    """ln(1 + q/(d-2)), the upper threshold used in the subcritical exploration argument.

    This is also where the ordered equation's small-t branch ends (g(1+) = q/(d-2))
    and where p_hat equals 1/(d-1).
    """
    _check_qd(q, d)
    return math.log1p(q / (d - 2))


def _g_of_s(s, q, d):
    """g(e^s) with expm1 so that s -> 0 is well conditioned."""
    s = np.asarray(s, dtype=float)
    num = np.expm1(s) * (np.exp((d - 1) * s) + q - 1)
    den = np.exp(s) * np.expm1((d - 2) * s)
    return num / den


def _s_min(q: int, d: int) -> float:
    """Location of the minimum of g over s > 0 (0.0 if g is increasing)."""
    # Coarse scan then bounded refinement on the bracketing cell.
    grid = np.geomspace(1e-6, 50.0, 2000)
    vals = _g_of_s(grid, q, d)
    k = int(np.argmin(vals))
    if k == 0:
        return 0.0
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(lambda s: float(_g_of_s(s, q, d)), bounds=(lo, hi),
                          method="bounded", options={"xatol": TOL["s_xatol"]})
    return float(res.x)


def beta_u(q: int, d: int) -> float:
    """inf of beta for which the ordered equation has a root t > 1.

    Computed as ln(1 + min_{t>1} g(t)).
    """
    _check_qd(q, d)
    s = _s_min(q, d)
    gmin = q / (d - 2) if s == 0.0 else float(_g_of_s(s, q, d))
    return math.log1p(gmin)


def _solvable(q: int, d: int, beta: float) -> bool:
    """Grid-scan test for a root of g(t) = e^beta - 1 with t > 1."""
    target = math.expm1(beta)
    s = _scan_grid()
    vals = _g_of_s(s, q, d)
    if np.any(vals <= target):
        return True
    # refine around the grid minimum, where a narrow dip could hide
    k = int(np.argmin(vals))
    lo, hi = s[max(k - 1, 0)], s[min(k + 1, len(s) - 1)]
    res = minimize_scalar(lambda x: float(_g_of_s(x, q, d)), bounds=(lo, hi),
                          method="bounded", options={"xatol": TOL["s_xatol"]})
    return float(res.fun) <= target


def beta_u_bisect(q: int, d: int) -> float:
    """beta_u by bisection on solvability of the ordered equation (cross-check path)."""
    _check_qd(q, d)
    lo, hi = 0.0, beta_c(q, d)
    if not _solvable(q, d, hi) or _solvable(q, d, lo):
        raise RuntimeError("solvability does not bracket beta_u")
    while hi - lo > TOL["beta_u_abs"]:
        mid = 0.5 * (lo + hi)
        if _solvable(q, d, mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _scan_grid(t_hi: float | None = None) -> np.ndarray:
    """Geometric grid in t - 1, returned as s = ln t."""
    t_hi = TOL["grid_t_hi"] if t_hi is None else t_hi
    lo, hi = math.log10(TOL["grid_t_lo"]), math.log10(t_hi)
    num = int(math.ceil((hi - lo) * TOL["grid_per_decade"])) + 1
    return np.log1p(np.logspace(lo, hi, num))


def solve_t(q: int, d: int, beta: float) -> float:
    """Largest root t > 1 of e^beta - 1 = g(t)."""
    _check_qd(q, d)
    target = math.expm1(beta)
    t_hi = TOL["grid_t_hi"]
    while t_hi < 2 * target + 10:  # g(t) ~ t for large t
        t_hi *= 10
    s = _scan_grid(t_hi)
    f = _g_of_s(s, q, d) - target
    idx = np.flatnonzero(np.sign(f[:-1]) != np.sign(f[1:]))
    if len(idx) == 0:
        # a tangential root may sit between grid points near the minimum
        sm = _s_min(q, d)
        if sm > 0 and float(_g_of_s(sm, q, d)) <= target:
            lo, hi = sm, s[-1]
        else:
            raise NoOrderedRoot(f"no ordered root for q={q}, d={d}, beta={beta} (beta < beta_u)")
    else:
        k = idx[-1]
        lo, hi = s[k], s[k + 1]
    sr = brentq(lambda x: float(_g_of_s(x, q, d)) - target, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    # one Newton polish in s using a central difference
    h = 1e-7 * max(sr, 1e-3)
    fp = (float(_g_of_s(sr + h, q, d)) - float(_g_of_s(sr - h, q, d))) / (2 * h)
    if fp > 0:
        cand = sr - (float(_g_of_s(sr, q, d)) - target) / fp
        if lo <= cand <= hi and abs(float(_g_of_s(cand, q, d)) - target) < abs(float(_g_of_s(sr, q, d)) - target):
            sr = cand
    return math.exp(sr)


# -- extended precision -----------------------------------------------------

def beta_c_mp(q: int, d: int, dps: int = 40):
    _check_qd(q, d)
    with mpmath.workdps(dps):
        return mpmath.log(mpmath.mpf(q - 2) / (mpmath.power(q - 1, 1 - mpmath.mpf(2) / d) - 1))


def solve_t_mp(q: int, d: int, beta, t0: float | None = None, dps: int = 40):
    """Extended-precision largest root, polished from the double-precision root."""
    t0 = solve_t(q, d, float(beta)) if t0 is None else t0
    with mpmath.workdps(dps):
        target = mpmath.expm1(mpmath.mpf(beta))

        def f(t):
            return (t - 1) * (t ** (d - 1) + q - 1) / (t ** (d - 1) - t) - target
        return mpmath.findroot(f, mpmath.mpf(t0))


# -- phase vectors and edge statistics -------------------------------------

def nu_dis(q: int) -> np.ndarray:
    return np.full(q, 1.0 / q)


def nu_ord_from_t(q: int, d: int, t: float) -> np.ndarray:
    td = t ** d
    nu = np.full(q, 1.0 / (td + q - 1))
    nu[0] = td / (td + q - 1)
    return nu


def rho_dis(q: int, beta: float) -> np.ndarray:
    W = np.ones((q, q))
    np.fill_diagonal(W, math.exp(beta))
    return W / W.sum()


def rho_ord(q: int, d: int, beta: float, nu: np.ndarray) -> np.ndarray:
    w = nu ** ((d - 1) / d)
    W = np.outer(w, w)
    W[np.diag_indices(q)] *= math.exp(beta)
    W = np.triu(W)
    W = W + np.triu(W, 1).T
    return W / W.sum()


def rho_ord_blocks(q: int, d: int, beta: float, nu1: float, nu2: float) -> tuple[float, float, float, float]:
    """Distinct entries of rho_ord without forming the q x q matrix.

    Returns (rho_11, rho_i1, rho_ii, rho_ij) for colours i != j in 2..q.
    """
    w1, w2 = nu1 ** ((d - 1) / d), nu2 ** ((d - 1) / d)
    eb = math.exp(beta)
    Z = eb * w1 * w1 + 2 * (q - 1) * w1 * w2 + (q - 1) * w2 * w2 * (eb + q - 2)
    return eb * w1 * w1 / Z, w1 * w2 / Z, eb * w2 * w2 / Z, w2 * w2 / Z


def m_dis(q: int, d: int, beta: float) -> float:
    eb1 = math.expm1(beta)
    return 0.5 * d * eb1 / (eb1 + q)


def m_ord(q: int, d: int, beta: float, t: float | None = None) -> float:
    t = solve_t(q, d, beta) if t is None else t
    x = t ** (d - 1) / (t ** (d - 1) + q - 1)
    y = x * x + (1 - x) ** 2 / (q - 1)
    eb1 = math.expm1(beta)
    return 0.5 * d * eb1 * y / (1 + eb1 * y)


def rho_gap(q: int, d: int) -> float:
    """m_ord(beta_c) - m_dis(beta_c)."""
    bc = beta_c(q, d)
    return m_ord(q, d, bc) - m_dis(q, d, bc)


def phase_windows(q: int, d: int, n: int) -> tuple[float, float]:
    """Edge-count windows: |F| <= dis_max is disordered, |F| >= ord_min is ordered."""
    bc = beta_c(q, d)
    md, mo = m_dis(q, d, bc), m_ord(q, d, bc)
    gap = mo - md
    return n * md + n * gap / 4, n * mo - n * gap / 4


@dataclass(frozen=True)
class PhaseProfile:
    q: int
    d: int
    beta: float
    p: float
    p_hat: float
    beta_u: float
    beta_c: float
    beta_u_prime: float
    beta_u_prime_alt: float
    nu_dis: np.ndarray
    rho_dis: np.ndarray
    m_dis: float
    rho_gap: float
    # ordered quantities; None when beta < beta_u
    t: float | None
    a: float | None
    nu_ord: np.ndarray | None
    rho_ord: np.ndarray | None
    m_ord: float | None

    @property
    def has_ordered(self) -> bool:
        return self.t is not None

    def windows(self, n: int) -> tuple[float, float]:
        return phase_windows(self.q, self.d, n)


def phase_profile(q: int, d: int, beta: float) -> PhaseProfile:
    _check_qd(q, d)
    if beta <= 0:
        raise ValueError("beta must be positive")
    p = p_of_beta(beta)
    bu = beta_u(q, d)
    try:
        t = solve_t(q, d, beta)
    except NoOrderedRoot:
        t = None
    if t is not None:
        nu_o = nu_ord_from_t(q, d, t)
        a = float(nu_o[0])
        rho_o = rho_ord(q, d, beta, nu_o)
        mo = m_ord(q, d, beta, t)
    else:
        nu_o = rho_o = a = mo = None
    return PhaseProfile(
        q=q, d=d, beta=beta, p=p, p_hat=p_hat(p, q),
        beta_u=bu, beta_c=beta_c(q, d),
        beta_u_prime=beta_u_prime(q, d), beta_u_prime_alt=beta_u_prime_alt(q, d),
        nu_dis=nu_dis(q), rho_dis=rho_dis(q, beta), m_dis=m_dis(q, d, beta),
        rho_gap=rho_gap(q, d), t=t, a=a, nu_ord=nu_o, rho_ord=rho_o, m_ord=mo,
    )


# -- Galton-Watson quantities ------------------------------------------------

@dataclass(frozen=True)
class GWSolution:
    d: int
    p: float
    phi: float
    chi: float
    phi_hat: float
    regime: str


def gw_solution(d: int, p: float) -> GWSolution:
    """Extinction probability of the Bin(d-1, p) branching process and friends.

    phi = (1 - p + p phi)^(d-1), chi = 1 - (p phi + 1 - p)^d,
    phi_hat = (p phi + 1 - p)^(d-2).
    """
    if d < 3:
        raise ValueError("d must be at least 3")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    crit = 1.0 / (d - 1)
    if p < crit:
        regime, phi = "subcritical", 1.0
    elif p == crit:
        regime, phi = "critical", 1.0
    elif p == 1.0:
        regime, phi = "supercritical", 0.0
    else:
        regime = "supercritical"

        def h(x):
            return (1.0 - p + p * x) ** (d - 1) - x
        # h(0) > 0, h < 0 just below 1 because h'(1) = (d-1)p - 1 > 0
        hi = 1.0 - 1e-3
        while h(hi) >= 0:
            hi = 1.0 - (1.0 - hi) / 10
            if 1.0 - hi < 1e-15:
                break
        phi = brentq(h, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=2000)
    base = p * phi + 1.0 - p
    return GWSolution(d=d, p=p, phi=phi, chi=1.0 - base ** d, phi_hat=base ** (d - 2), regime=regime)


def gw_extinction_mc(d: int, p: float, trees: int, depth: int, seed) -> tuple[float, float]:
    """Monte Carlo fraction of Bin(d-1, p) trees extinct by generation ``depth``.

    Returns (estimate, standard error).  Populations above ``cap`` are
    treated as surviving, with the cap chosen so that extinction from there
    is below 1e-12.
    """
    from .rng import as_rng
    rng = as_rng(seed)
    sz = np.ones(trees, dtype=np.int64)
    gw = gw_solution(d, p)
    cap = 10**9 if gw.phi >= 1 else max(1, int(math.ceil(-12 * math.log(10) / math.log(max(gw.phi, 1e-300)))))
    alive = np.ones(trees, dtype=bool)
    for _ in range(depth):
        idx = np.flatnonzero(alive & (sz > 0) & (sz < cap))
        if len(idx) == 0:
            break
        sz[idx] = rng.binomial(sz[idx] * (d - 1), p)
    extinct = sz == 0
    est = float(extinct.mean())
    return est, math.sqrt(max(est * (1 - est), 1e-300) / trees)


# -- ordered percolation constants ------------------------------------------

@dataclass(frozen=True)
class OrderedPercParams:
    p1: float
    phi1: float
    phi_hat1: float
    R: float
    A: float


def ordered_perc_params(q: int, d: int, beta: float) -> OrderedPercParams:
    t = solve_t(q, d, beta)
    td = t ** d
    nu1, nu2 = td / (td + q - 1), 1.0 / (td + q - 1)
    r11, ri1, _, _ = rho_ord_blocks(q, d, beta, nu1, nu2)
    p1 = p_of_beta(beta) * r11 / nu1
    gw = gw_solution(d, p1)
    sq = math.sqrt(gw.phi_hat)
    A = max(1.0 - (1.0 - sq) * r11 / nu1, 1.0 - (1.0 - sq) * ri1 / nu2)
    R = (t ** (d + 1) + (q - 2) * td - (q - 1) * t) / ((td - t) * (t ** (d - 1) + q - 1))
    return OrderedPercParams(p1=float(p1), phi1=gw.phi, phi_hat1=gw.phi_hat, R=R, A=A)


@dataclass(frozen=True)
class Lemma54Report:
    holds: bool
    lhs: float          # (d-1)^-5
    rhs: float          # sqrt(phi_hat1) + R
    sqrt_phi_hat1: float
    R: float


def check_lemma54(q: int, d: int, beta: float) -> Lemma54Report:
    """Test 1/(d-1)^5 > sqrt(phi_hat1) + R at the given beta >= beta_c."""
    if beta < beta_c(q, d) * (1 - 1e-12):
        raise ValueError("check_lemma54 requires beta >= beta_c")
    op = ordered_perc_params(q, d, beta)
    lhs = (d - 1) ** -5.0
    sp = math.sqrt(op.phi_hat1)
    return Lemma54Report(holds=lhs > sp + op.R, lhs=lhs, rhs=sp + op.R, sqrt_phi_hat1=sp, R=op.R)


def check_lemma54_grid(q: int, d: int, ratios=(1.0, 1.25, 1.5, 2.0, 3.0, 5.0)) -> list[Lemma54Report]:
    bc = beta_c(q, d)
    return [check_lemma54(q, d, r * bc) for r in ratios]


def default_radius(n: int, d: int, delta: float = 0.05) -> int:
    return int(math.floor((0.5 - delta) * math.log(n) / math.log(d - 1)))
