"""Closed-form engine: gamma moment matching, cluster-count PMFs, the
characteristic functions of the received-power components, and their moments.

Everything here is deterministic; randomness lives in :mod:`uccfn.simulator`.
All infinite series are truncated where the governing Poisson tail mass drops
below ``TAIL_MASS`` and renormalized whenever the series is a PMF average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import stats

from .config import SystemParams, DerivedParams, derive
from .geometry import lens_area, lens_area_linearized, s_area

TAIL_MASS = 1e-8

__all__ = [
    "GammaApprox", "CondPmf", "CharFn",
    "gamma_moment_match", "cluster_size_pmfs", "served_cluster_size_pmf",
    "cond_ue_count_pmf", "cond_rrh_count_pmf",
    "cf_desired_power_one_rrh", "cf_intra_interference_one_rrh",
    "cf_signal_plus_weighted_intra", "cf_inter_cluster",
    "build_signal_cf", "build_signal_cf_conditional", "build_inter_cluster_cf",
    "moments_signal_plus_intra", "moments_inter_cluster", "moments_total_power",
    "mean_components", "cf_moments_fd",
]


# --------------------------------------------------------------------------
# Small containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaApprox:
    """Moment-matched gamma shape/scale for one power-share quotient."""

    k: float
    s: float

    def rho(self) -> float:
        """Second moment s^2 * Gamma(2+k)/Gamma(k) = s^2 * k * (k+1)."""
        return self.s * self.s * self.k * (self.k + 1.0)


@dataclass(frozen=True, eq=False)
class CondPmf:
    """A finite, renormalized PMF on a contiguous integer support."""

    support: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "support", np.asarray(self.support, dtype=np.intp))
        p = np.asarray(self.probabilities, dtype=float)
        object.__setattr__(self, "probabilities", p)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be nonnegative and sum to 1")

    def mean(self) -> float:
        return float(self.support @ self.probabilities)

    def expect(self, fn) -> float:
        return float(np.sum(fn(self.support.astype(float)) * self.probabilities))

    def sample(self, size, rng) -> np.ndarray:
        return rng.choice(self.support, size=size, p=self.probabilities)


@dataclass(frozen=True, eq=False)
class CharFn:
    """A characteristic function t -> E[exp(jtX)] with inversion hints.

    ``fn`` must accept an ndarray of real t and return complex values;
    ``scale`` is a typical magnitude of X used to align oscillation periods
    in the Gil-Pelaez engine.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    description: str = ""
    scale: float = 1.0

    def __call__(self, t):
        return self.fn(np.asarray(t, dtype=float))


# --------------------------------------------------------------------------
# Gamma moment matching
# --------------------------------------------------------------------------

def gamma_moment_match(n: int, m: int) -> GammaApprox:
    """Gamma fit (shape, scale) of the power-share quotient for a cluster of
    ``n`` serving RRHs with ``m`` antennas each.

    Matches the second-order Taylor ratio moments: mean 1/n and variance
    (3n-1)/(n^3 m); the single-RRH single-antenna case is exactly Exp(1).
    """
    if n < 1:
        raise ValueError(f"cluster size must be >= 1, got {n}")
    if m < 1:
        raise ValueError(f"antenna count must be >= 1, got {m}")
    if n == 1 and m == 1:
        return GammaApprox(1.0, 1.0)
    return GammaApprox(n * m / (3.0 * n - 1.0), (3.0 * n - 1.0) / (n * n * m))


def _gamma_tables(n_max: int, m: int):
    """(k, s) arrays for cluster sizes 1..n_max (index 0 unused)."""
    ks = np.empty(n_max + 1)
    ss = np.empty(n_max + 1)
    ks[0] = ss[0] = np.nan
    for n in range(1, n_max + 1):
        g = gamma_moment_match(n, m)
        ks[n], ss[n] = g.k, g.s
    return ks, ss


# --------------------------------------------------------------------------
# Poisson machinery
# --------------------------------------------------------------------------

def _poisson_support(mu, tail=TAIL_MASS, renormalize=True):
    """Support 0..K covering all but ``tail`` mass of Poisson(mu)."""
    if mu <= 0:
        return np.array([0], dtype=np.intp), np.array([1.0])
    hi = int(mu + 12.0 * math.sqrt(mu) + 25)
    ks = np.arange(hi + 1)
    pmf = stats.poisson.pmf(ks, mu)
    cut = int(np.searchsorted(np.cumsum(pmf), 1.0 - tail)) + 1
    ks, pmf = ks[:cut], pmf[:cut]
    if renormalize:
        pmf = pmf / pmf.sum()
    return ks.astype(np.intp), pmf


def cluster_size_pmfs(params: SystemParams, tail=TAIL_MASS):
    """(serving-count PMF, served-count PMF, nonempty serving-count PMF).

    Serving count: Poisson(lambda_r * pi * (r1^2 - r0^2)); served count:
    Poisson(lambda_u * pi * r1^2); the third is the first conditioned on >= 1
    (zero-truncated).
    """
    der = derive(params)
    ks_r, p_r = _poisson_support(der.n_av_r, tail)
    ks_u, p_u = _poisson_support(der.n_av_u, tail)
    mu = der.n_av_r
    hi = int(mu + 12.0 * math.sqrt(max(mu, 1.0)) + 25)
    ms = np.arange(1, hi + 1)
    pt = stats.poisson.pmf(ms, mu) / (1.0 - math.exp(-mu))
    cut = int(np.searchsorted(np.cumsum(pt), 1.0 - tail)) + 1
    ms, pt = ms[:cut], pt[:cut]
    return (CondPmf(ks_r, p_r), CondPmf(ks_u, p_u), CondPmf(ms, pt / pt.sum()))


def served_cluster_size_pmf(params: SystemParams, tail=TAIL_MASS) -> CondPmf:
    """Cluster-size law of a user known to be served: one guaranteed server
    plus a Poisson number of further RRHs in the association annulus.

    This is the law the Monte Carlo model realizes; conditioning a plain
    Poisson on being nonzero instead would resample the guaranteed server and
    overweight small clusters (1/m moments come out ~30% high at four RRHs
    per cluster).
    """
    der = derive(params)
    ks, pmf = _poisson_support(der.n_av_r, tail)
    return CondPmf(ks + 1, pmf)


def _binom_poisson_pmf(n, prob, mu, tail=TAIL_MASS):
    """PMF of Binomial(n, prob) + Poisson(mu), truncated and renormalized."""
    kb = np.arange(n + 1)
    pb = stats.binom.pmf(kb, n, prob)
    kp, pp = _poisson_support(mu, tail=1e-12, renormalize=False)
    pmf = np.convolve(pb, pp)
    cut = int(np.searchsorted(np.cumsum(pmf), 1.0 - tail)) + 1
    pmf = pmf[:cut]
    return pmf / pmf.sum()


def cond_ue_count_pmf(n_ue: int, r, params: SystemParams,
                      linearized=False, tail=TAIL_MASS) -> CondPmf:
    """PMF of the number of other UEs served by a cluster RRH at distance ``r``
    from the probe UE, given ``n_ue`` other UEs inside the probe's disk.

    The overlap of the two radius-r1 disks splits the counts into a binomial
    (shared lens) plus an independent Poisson (outer crescent).
    """
    if not (params.r0 <= r <= params.r1):
        raise ValueError(f"r must lie in [{params.r0}, {params.r1}], got {r}")
    if n_ue < 0:
        raise ValueError("n_ue must be >= 0")
    area = (lens_area_linearized(r, params.r1) if linearized
            else lens_area(r, params.r1))
    disk = math.pi * params.r1 ** 2
    pmf = _binom_poisson_pmf(n_ue, area / disk,
                             params.lambda_u * (disk - area), tail)
    return CondPmf(np.arange(len(pmf)), pmf)


def cond_rrh_count_pmf(n_rrh: int, r, params: SystemParams,
                       tail=TAIL_MASS) -> CondPmf:
    """PMF of the cluster size of a UE served by a cluster RRH at distance
    ``r``, given ``n_rrh`` RRHs in the probe's cluster.

    The serving RRH lies in the served UE's disk by construction; each of the
    other n_rrh - 1 probe-cluster RRHs lands there with the linear
    effective-overlap share ``s_area``, and the rest of the plane contributes
    an independent Poisson count.  Support therefore starts at 1.
    """
    if not (params.r0 <= r <= params.r1):
        raise ValueError(f"r must lie in [{params.r0}, {params.r1}], got {r}")
    if n_rrh < 1:
        raise ValueError("n_rrh must be >= 1")
    area = s_area(r, params.r1)
    disk = math.pi * params.r1 ** 2
    pmf = _binom_poisson_pmf(n_rrh - 1, area / disk,
                             params.lambda_r * (disk - area), tail)
    return CondPmf(np.arange(1, len(pmf) + 1), pmf)


# --------------------------------------------------------------------------
# Quadrature grid shared by CFs and moment integrals
# --------------------------------------------------------------------------

def _log_panels_gl(lo, hi, n_panels, order):
    """Composite Gauss-Legendre nodes/weights on log-spaced panels."""
    edges = np.geomspace(lo, hi, n_panels + 1)
    x, w = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return nodes, wts


class _ClusterTables:
    """Per-parameter radial grid plus the conditional-count tables on it.

    Shared by the vectorized CFs and the moment integrals so that both see
    the identical truncation/renormalization contract.
    """

    def __init__(self, params: SystemParams, tail=TAIL_MASS,
                 n_panels=12, order=8):
        self.params = params
        self.derived = derive(params)
        self.c = params.p_t / self.derived.kappa  # P_t * kappa^-1
        r, w = _log_panels_gl(params.r0, params.r1, n_panels, order)
        self.r = r
        # weights absorbing the radial pdf 2r/(r1^2-r0^2); they sum to 1
        self.wf = w * 2.0 * r / (params.r1 ** 2 - params.r0 ** 2)
        self.x_alpha = r ** (-params.alpha)

        p_r, p_u, p_nz = cluster_size_pmfs(params, tail)
        self.p_r, self.p_u, self.p_nz = p_r, p_u, p_nz
        self.nr_max = int(p_r.support[-1])

        disk = math.pi * params.r1 ** 2
        area_u = lens_area(r, params.r1)
        self.w_u = area_u / disk
        self.mu_gamma = params.lambda_u * (disk - area_u)

        area_s = s_area(r, params.r1)
        sig = area_s / disk
        mu_delta = params.lambda_r * (disk - area_s)

        # conditional cluster-size table q[n_idx, m-1, r_idx] for n = 1..nr_max;
        # count = 1 (the serving RRH) + binomial over the other probe-cluster
        # RRHs + Poisson rest-of-plane
        kp_hi = 0
        rows = []
        for ri in range(len(r)):
            kp, pp = _poisson_support(mu_delta[ri], tail=1e-12, renormalize=False)
            rows.append(pp)
            kp_hi = max(kp_hi, len(pp))
        n_max = max(self.nr_max, 1)
        m_hi = n_max + kp_hi
        q = np.zeros((n_max, m_hi, len(r)))
        kb = np.arange(n_max + 1)
        for ri in range(len(r)):
            pp = rows[ri]
            for n in range(1, n_max + 1):
                pb = stats.binom.pmf(kb[:n], n - 1, sig[ri])
                conv = np.convolve(pb, pp)[:m_hi]  # mass of count 1 + j at j
                q[n - 1, : len(conv), ri] = conv / conv.sum()
        # trim negligible cluster-size columns, then renormalize rows
        col_mass = q.max(axis=(0, 2))
        used = np.nonzero(col_mass > 1e-12)[0]
        self.m_max = int(used[-1]) + 1 if len(used) else 1
        q = q[:, : self.m_max, :]
        q /= q.sum(axis=1, keepdims=True)
        self.q = q
        self.q_r = np.ascontiguousarray(q.transpose(2, 0, 1))  # (R, N, m)
        ks, ss = _gamma_tables(self.m_max, params.m)
        self.k_m = ks[1:]
        self.s_m = ss[1:]
        # conditional expectations used by the moment formulas
        minv = 1.0 / np.arange(1, self.m_max + 1)
        rho = self.s_m ** 2 * self.k_m * (self.k_m + 1.0)
        self.e_inv = np.einsum("nmr,m->nr", q, minv)
        self.e_rho = np.einsum("nmr,m->nr", q, rho)


@lru_cache(maxsize=8)
def _tables(params: SystemParams) -> _ClusterTables:
    return _ClusterTables(params)


# --------------------------------------------------------------------------
# Single-RRH characteristic functions (spec-surface scalar forms)
# --------------------------------------------------------------------------

def cf_desired_power_one_rrh(t, r, params: SystemParams):
    """CF of the useful power delivered by one cluster RRH at distance ``r``:
    a Gamma(m, P_t kappa^-1 r^-alpha) law, (1 - j t c r^-alpha)^-m.
    """
    der = derive(params)
    c = params.p_t / der.kappa
    t = np.asarray(t, dtype=float)
    val = (1.0 - 1j * t * c * r ** (-params.alpha)) ** (-float(params.m))
    return complex(val) if val.ndim == 0 else val


def cf_intra_interference_one_rrh(t, n_rrh, n_ue, r, params: SystemParams):
    """CF of the interference created by one cluster RRH at distance ``r``
    serving other UEs, conditioned on the probe-disk counts (n_rrh, n_ue).

    Direct evaluation of the nested mixture: outer sum over the served-UE
    count, inner gamma-mixture over each served UE's cluster size.
    """
    der = derive(params)
    c = params.p_t / der.kappa
    t = np.asarray(t, dtype=float)
    q = cond_rrh_count_pmf(n_rrh, r, params)
    ks, ss = _gamma_tables(int(q.support[-1]), params.m)
    x = t[..., None] * c * r ** (-params.alpha)
    inner = np.sum(
        q.probabilities * (1.0 - 1j * x * ss[q.support]) ** (-ks[q.support]),
        axis=-1)
    pu = cond_ue_count_pmf(n_ue, r, params)
    val = np.sum(pu.probabilities * inner[..., None] ** pu.support, axis=-1)
    return complex(val) if val.ndim == 0 else val


# --------------------------------------------------------------------------
# Vectorized CF of P_S + weight * P_I1
# --------------------------------------------------------------------------

def _chunk_size(tables: _ClusterTables) -> int:
    per_node = len(tables.r) * (tables.m_max + 4 * max(tables.nr_max, 1))
    return int(np.clip(6.0e6 // max(per_node, 1), 64, 4096))

def _signal_cf_chunk(tables: _ClusterTables, t: np.ndarray, weight: float):
    """phi(t | n_rrh, n_ue) integrals for one t-chunk.

    Returns I with shape (n_ue_states, n_rrh_states, len(t)) holding the
    radial integral of Eq.-style phi_T * phi_V for every conditioning pair;
    raising I to the n_rrh power and Poisson-averaging is the caller's job.
    """
    p = tables.params
    xt = t[None, :] * (tables.c * tables.x_alpha)[:, None]          # (R, T)
    phi_t = (1.0 - 1j * xt) ** (-float(p.m))
    n_states = tables.nr_max
    nu_vals = tables.p_u.support

    if weight == 0.0 or p.lambda_u == 0.0 or n_states == 0:
        base = (tables.wf[:, None] * phi_t).sum(axis=0)             # (T,)
        return np.broadcast_to(base, (len(nu_vals), max(n_states, 1), len(t)))

    b = (1.0 - 1j * (weight * xt)[:, None, :] * tables.s_m[None, :, None]
         ) ** (-tables.k_m[None, :, None])                          # (R, m, T)
    g = tables.q_r @ b                                              # (R, N, T)
    del b
    z = (1.0 - tables.w_u)[:, None, None] + tables.w_u[:, None, None] * g
    mix = np.exp(tables.mu_gamma[:, None, None] * (g - 1.0))
    del g
    pre = mix
    pre *= (tables.wf[:, None] * phi_t)[:, None, :]
    out = np.empty((len(nu_vals), n_states, len(t)), dtype=complex)
    cur = pre.copy()
    max_nu = int(nu_vals[-1])
    col = 0
    for nu in range(max_nu + 1):
        if nu > 0:
            cur *= z
        if nu == nu_vals[col]:
            out[col] = cur.sum(axis=0)
            col += 1
            if col == len(nu_vals):
                break
    return out


def build_signal_cf(params: SystemParams, weight: float,
                    description: str = "") -> CharFn:
    """CF of P_S + weight * P_I1 (probe UE), Poisson-averaged over the
    cluster RRH/UE counts with the radial integral raised to the RRH count.
    """
    tables = _tables(params)
    p_r = tables.p_r.probabilities
    nr = tables.p_r.support.astype(float)
    p_u = tables.p_u.probabilities
    m1, v1 = moments_signal_plus_intra(params)
    # oscillation-rate hint: spread dominates the mean for this law
    scale = (m1 + math.sqrt(max(v1, 0.0))) * max(1.0, abs(weight))

    def fn(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(len(t), dtype=complex)
        step = _chunk_size(tables)
        for s in range(0, len(t), step):
            tc = t[s:s + step]
            integ = _signal_cf_chunk(tables, tc, weight)            # (U, N, T)
            powed = integ ** nr[None, 1:, None] if len(nr) > 1 else integ[:, :0, :]
            acc = np.einsum("u,n,unt->t", p_u, p_r[1:], powed)
            acc = acc + p_r[0]
            out[s:s + step] = acc
        return out

    return CharFn(fn, description or f"signal+({weight})*intra", max(scale, 1e-300))


def build_signal_cf_conditional(params: SystemParams, weight: float,
                                n_rrh: int, n_ue: int) -> CharFn:
    """Conditional variant of :func:`build_signal_cf` for fixed counts."""
    tables = _tables(params)
    if n_rrh == 0:
        return CharFn(lambda t: np.ones(np.shape(np.atleast_1d(t)), complex),
                      "signal cf (empty cluster)", 1e-300)
    u_idx = int(np.searchsorted(tables.p_u.support, n_ue))
    if (u_idx >= len(tables.p_u.support)
            or tables.p_u.support[u_idx] != n_ue) and params.lambda_u > 0:
        raise ValueError(f"n_ue={n_ue} outside the truncated support")
    n_idx = n_rrh - 1
    if n_idx >= tables.nr_max:
        raise ValueError(f"n_rrh={n_rrh} outside the truncated support")

    def fn(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(len(t), dtype=complex)
        step = _chunk_size(tables)
        for s in range(0, len(t), step):
            integ = _signal_cf_chunk(tables, t[s:s + step], weight)
            out[s:s + step] = integ[min(u_idx, integ.shape[0] - 1), n_idx] ** n_rrh
        return out

    m1, v1 = moments_signal_plus_intra(params)
    scale = (m1 + math.sqrt(max(v1, 0.0))) * max(1.0, abs(weight))
    return CharFn(fn, f"signal+({weight})*intra | ({n_rrh},{n_ue})",
                  max(scale, 1e-300))


def cf_signal_plus_weighted_intra(t, weight, params: SystemParams,
                                  n_rrh=None, n_ue=None):
    """Scalar-facing wrapper; conditional when (n_rrh, n_ue) are given."""
    if n_rrh is None:
        cf = build_signal_cf(params, weight)
    else:
        cf = build_signal_cf_conditional(params, weight, n_rrh, n_ue or 0)
    val = cf(np.atleast_1d(t))
    return complex(val[0]) if np.ndim(t) == 0 else val


# --------------------------------------------------------------------------
# CF of the outside-cluster interference
# --------------------------------------------------------------------------

class _InterClusterModel:
    def __init__(self, params: SystemParams, inner_radius=None, tail=TAIL_MASS):
        self.params = params
        self.derived = derive(params)
        self.c = params.p_t / self.derived.kappa
        self.r_min = params.r1 if inner_radius is None else float(inner_radius)
        if self.r_min <= 0:
            raise ValueError("inner radius must be positive")
        if params.alpha <= 2:
            raise ValueError("alpha must exceed 2 for a convergent far field")
        _, p_u, _ = cluster_size_pmfs(params, tail)
        keep = p_u.support >= 1
        # intensity weights: truncated raw Poisson masses, not renormalized
        raw = stats.poisson.pmf(p_u.support[keep], self.derived.n_av_u)
        self.n_vals = p_u.support[keep].astype(float)
        self.n_wts = raw
        served = served_cluster_size_pmf(params, tail)
        self.served = served
        ks, ss = _gamma_tables(int(served.support[-1]), params.m)
        self.k_m = ks[served.support]
        self.s_m = ss[served.support]
        self.pt = served.probabilities
        self.q_exp = params.alpha / (params.alpha - 2.0)

    def exponent(self, t):
        """-log phi(t): 2 pi lambda_r sum_n p(n) * I_n(t)."""
        p = self.params
        t = np.asarray(t, dtype=float)
        if len(self.n_vals) == 0:
            return np.zeros(t.shape, dtype=complex)
        x1 = t * self.c * self.r_min ** (-p.alpha)
        xm = np.max(np.abs(x1))
        if xm == 0.0:
            return np.zeros(t.shape, dtype=complex)
        lo_clip = max(1e-12, 10.0 ** (-250.0 / self.q_exp))
        w_lo = float(np.clip(0.02 * (xm + 1.0) ** (-1.0 / self.q_exp),
                             lo_clip, 5e-3))
        n_panels = max(int(1.6 * math.log10(1.0 / w_lo)) + 2, 4)
        w, wq = _log_panels_gl(w_lo, 1.0, n_panels, 10)
        # rectangle stub for (0, w_lo): the transformed integrand is ~constant
        w = np.concatenate([[w_lo], w])
        wq = np.concatenate([[w_lo], wq])
        wq = wq * w ** (-self.q_exp)
        xs = x1[None, :] * (w ** self.q_exp)[:, None]               # (W, T)
        basis = (1.0 - 1j * xs[None, :, :] * self.s_m[:, None, None]
                 ) ** (-self.k_m[:, None, None])
        psi = np.tensordot(self.pt, basis, axes=(0, 0))             # (W, T)
        del basis
        acc = np.zeros(t.shape, dtype=complex)
        cur = np.ones_like(psi)
        prev_n = 0.0
        for n, pw in zip(self.n_vals, self.n_wts):
            cur *= psi ** int(n - prev_n) if n - prev_n > 1 else psi
            prev_n = n
            acc += pw * (wq @ (1.0 - cur))
        factor = self.r_min ** 2 / (p.alpha - 2.0)
        return 2.0 * math.pi * p.lambda_r * factor * acc


@lru_cache(maxsize=16)
def _inter_model(params: SystemParams, inner_radius) -> _InterClusterModel:
    return _InterClusterModel(params, inner_radius)


def build_inter_cluster_cf(params: SystemParams, inner_radius=None) -> CharFn:
    """CF of the interference from RRHs beyond ``inner_radius`` (default r1)."""
    model = _inter_model(params, inner_radius)
    mean, var = moments_inter_cluster(params, inner_radius=inner_radius)

    def fn(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.shape, dtype=complex)
        for s in range(0, len(t), 1024):
            out[s:s + 1024] = np.exp(-model.exponent(t[s:s + 1024]))
        return out

    return CharFn(fn, f"inter-cluster interference (r>{model.r_min:g} m)",
                  max(mean + math.sqrt(max(var, 0.0)), 1e-300))


def cf_inter_cluster(t, params: SystemParams, inner_radius=None):
    cf = build_inter_cluster_cf(params, inner_radius)
    val = cf(np.atleast_1d(t))
    return complex(val[0]) if np.ndim(t) == 0 else val


# --------------------------------------------------------------------------
# Moments
# --------------------------------------------------------------------------

def _moment_pieces(tables: _ClusterTables):
    """Per-(count pair) L and quadratic integrals on the shared radial grid."""
    p = tables.params
    r, wf = tables.r, tables.wf
    w_a = wf * r ** (-p.alpha)
    w_2a = wf * r ** (-2.0 * p.alpha)
    i_a = w_a.sum()
    i_2a = w_2a.sum()
    nu = tables.p_u.support.astype(float)[:, None]                  # (U, 1)
    wu, mg = tables.w_u[None, :], tables.mu_gamma[None, :]
    eu1 = nu * wu + mg                                              # (U, R)
    eu2 = nu * (nu - 1.0) * wu ** 2 + 2.0 * nu * wu * mg + mg ** 2
    einv, erho = tables.e_inv, tables.e_rho                         # (N, R)
    m = float(p.m)
    # L[n, u] = m*i_a + int eu1*einv r^-a f
    cross_a = np.einsum("r,ur,nr->nu", w_a, eu1, einv)
    big_l = m * i_a + cross_a
    t1 = (m * (m + 1.0) * i_2a
          + 2.0 * m * np.einsum("r,ur,nr->nu", w_2a, eu1, einv)
          + np.einsum("r,ur,nr->nu", w_2a, eu1, erho)
          + np.einsum("r,ur,nr->nu", w_2a, eu2, einv ** 2))
    return big_l, t1, i_a


def moments_signal_plus_intra(params: SystemParams):
    """(mean, variance) of the probe UE's useful-plus-intra-cluster power."""
    tables = _tables(params)
    big_l, t1, _ = _moment_pieces(tables)
    p_r = tables.p_r.probabilities
    p_u = tables.p_u.probabilities
    nr = tables.p_r.support.astype(float)
    if tables.nr_max == 0:
        return 0.0, 0.0
    nvec = nr[1:]
    mean_u = np.einsum("n,u,n,nu->", p_r[1:], p_u, nvec, big_l)
    e2_u = np.einsum("n,u,n,nu->", p_r[1:], p_u, nvec,
                     t1 + (nvec[:, None] - 1.0) * big_l ** 2)
    mean = tables.c * mean_u
    var = tables.c ** 2 * e2_u - mean ** 2
    return float(mean), float(var)


def mean_components(params: SystemParams):
    """(useful mean, intra-cluster mean, inter-cluster mean) in watts."""
    tables = _tables(params)
    p = tables.params
    w_a = tables.wf * tables.r ** (-p.alpha)
    i_a = w_a.sum()
    e_nr = tables.p_r.mean()
    m_ps = tables.c * e_nr * p.m * i_a
    mean_tot, _ = moments_signal_plus_intra(params)
    m_pi2, _ = moments_inter_cluster(params)
    return m_ps, mean_tot - m_ps, m_pi2


def moments_inter_cluster(params: SystemParams, inner_radius=None, tail=TAIL_MASS):
    """(mean, variance) of the interference from outside the probe cluster.

    Campbell / second-order product-density closed forms over the reduced
    point processes of RRHs serving a fixed number of users.
    """
    p = params
    der = derive(p)
    if p.lambda_u == 0.0:
        return 0.0, 0.0
    r_min = p.r1 if inner_radius is None else float(inner_radius)
    c = p.p_t / der.kappa
    _, p_u, _ = cluster_size_pmfs(p, tail)
    served = served_cluster_size_pmf(p, tail)
    e_inv = float(np.sum(served.probabilities / served.support))
    rho = np.array([gamma_moment_match(int(m_), p.m).rho()
                    for m_ in served.support])
    e_rho = float(served.probabilities @ rho)
    n = p_u.support.astype(float)
    e_nn1 = float(p_u.probabilities @ (n * (n - 1.0)))
    annulus = p.r1 ** 2 - p.r0 ** 2
    mean = (2.0 * math.pi ** 2 * c * r_min ** (2.0 - p.alpha)
            / (p.alpha - 2.0) * p.lambda_r * p.lambda_u * annulus * e_inv)
    var = (2.0 * math.pi * c ** 2 * r_min ** (2.0 - 2.0 * p.alpha)
           / (2.0 * p.alpha - 2.0) * p.lambda_r
           * (math.pi * p.lambda_u * annulus * e_rho + e_nn1 * e_inv ** 2))
    return float(mean), float(var)


def moments_total_power(params: SystemParams):
    """(mean, variance) of the total received power at the probe UE, by
    componentwise addition (the two parts are modeled as independent)."""
    m1, v1 = moments_signal_plus_intra(params)
    m2, v2 = moments_inter_cluster(params)
    return m1 + m2, v1 + v2


# --------------------------------------------------------------------------
# Finite-difference moments of a CF (consistency checks)
# --------------------------------------------------------------------------

def cf_moments_fd(cf: CharFn, scale=None, rel_step=1e-3):
    """(mean, variance) of the law behind ``cf`` via Richardson-extrapolated
    central differences at 0.

    ``scale`` sets the step h = rel_step/scale and should be of the order of
    mean + std of the law (heavy-tailed laws need the std, or the higher
    cumulants pollute the difference quotient)."""
    s = float(scale if scale is not None else cf.scale)
    h = rel_step / max(s, 1e-300)
    vals = cf(np.array([h, 2.0 * h]))
    f1, f2 = vals[0].imag / h, vals[1].imag / (2.0 * h)
    mean = (4.0 * f1 - f2) / 3.0
    g1 = 2.0 * (1.0 - vals[0].real) / h ** 2
    g2 = 2.0 * (1.0 - vals[1].real) / (2.0 * h) ** 2
    second = (4.0 * g1 - g2) / 3.0
    return mean, second - mean ** 2
