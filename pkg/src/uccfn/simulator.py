"""Monte Carlo oracle: samples the exact downlink model (coherent maximum
ratio transmission with cluster-norm power allocation) and the gamma-quotient
approximated interference model, at the probe UE in the origin.

Trial RNG streams derive from (seed, trial index), so results do not depend
on how trials are scheduled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic, geometry
from .config import SystemParams, ValidationError, db_to_linear, dbm_to_watts, derive
from .geometry import ClusterMap, PointSet
from .inversion import DistCurve, JointSurface

MODELS = ("exact", "gamma_approx")

__all__ = [
    "ConfigurationError", "TrialResult", "NetworkRealization", "EmpiricalStats",
    "far_field_mean", "sample_network", "evaluate_realization", "run_trials",
    "power_budget_check", "empirical_joint", "sample_power_share_quotient",
    "write_samples_csv",
]


class ConfigurationError(ValidationError):
    """Simulation setup inconsistent with the deployment geometry."""


@dataclass(frozen=True)
class TrialResult:
    """Received-power decomposition of one trial, all in watts."""

    p_s: float
    p_i: float
    p_i1: float
    p_i2: float
    sinr: float
    rate: float
    ipd: float


@dataclass
class NetworkRealization:
    """One sampled topology with its association structure."""

    rrhs: PointSet
    ues: PointSet
    cmap: ClusterMap
    probe_idx: int

    def rrh_origin_dist(self):
        return self.rrhs.radii()


@dataclass
class EmpiricalStats:
    """Columnar per-trial samples plus derived empirical distributions."""

    p_s: np.ndarray
    p_i: np.ndarray
    p_i1: np.ndarray
    p_i2: np.ndarray
    sinr: np.ndarray
    rate: np.ndarray
    ipd: np.ndarray
    rate_ccdf: DistCurve
    ipd_cdf: DistCurve
    joint_f: JointSurface
    joint_g: JointSurface
    moments: dict
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.p_s)

    def trial(self, i) -> TrialResult:
        return TrialResult(self.p_s[i], self.p_i[i], self.p_i1[i],
                           self.p_i2[i], self.sinr[i], self.rate[i], self.ipd[i])


# --------------------------------------------------------------------------
# Window and far-field handling
# --------------------------------------------------------------------------

def far_field_mean(params: SystemParams, radius) -> float:
    """Expected interference from all RRHs beyond ``radius``.

    Every UE whose cluster is nonempty sinks exactly one power budget across
    its servers, so the mean interference density seen from far RRHs is
    lambda_u * (1 - exp(-n_av_r)) * P_t * kappa^-1 * r^-alpha, integrated over
    the excluded plane.  Exact for both simulation models.
    """
    der = derive(params)
    c = params.p_t / der.kappa
    served = 1.0 - math.exp(-der.n_av_r)
    return (2.0 * math.pi * params.lambda_u * served * c
            * radius ** (2.0 - params.alpha) / (params.alpha - 2.0))


def _resample_outside(points, r0, window, rng):
    """Move points closer than r0 to the origin uniformly into the annulus."""
    d = np.hypot(points[:, 0], points[:, 1])
    bad = d < r0
    n = int(bad.sum())
    if n:
        r = np.sqrt(r0 * r0 + rng.random(n) * (window * window - r0 * r0))
        phi = 2.0 * math.pi * rng.random(n)
        points[bad, 0] = r * np.cos(phi)
        points[bad, 1] = r * np.sin(phi)
    return points


def sample_network(params: SystemParams, window_scale, rng) -> NetworkRealization:
    """Sample one buffered topology.

    RRHs are drawn on a disk two cluster radii beyond the core window (so the
    cluster of every UE inside the UE window is complete) and conditioned to
    keep the probe UE's exclusion zone empty; UEs on one cluster radius beyond
    the core, thinned by the exclusion disks, with the probe appended last.
    """
    if window_scale < 2.0:
        raise ConfigurationError(
            f"window_scale must be >= 2 cluster radii, got {window_scale}")
    r_core = window_scale * params.r1
    rrhs = geometry.sample_ppp(params.lambda_r, r_core + 2.0 * params.r1, rng)
    pts = _resample_outside(rrhs.points.copy(), params.r0,
                            rrhs.window_radius, rng)
    rrhs = PointSet(pts, rrhs.window_radius)
    # one distance matrix drives both the exclusion thinning and association
    raw = geometry.sample_ppp(params.lambda_u, r_core + params.r1, rng)
    if len(rrhs) and len(raw):
        d2_raw = geometry.cross_sq_distances(rrhs.points, raw.points)
        keep = d2_raw.min(axis=0) >= params.r0 ** 2
        ue_pts = raw.points[keep]
        d2_kept = d2_raw[:, keep]
    else:
        ue_pts = raw.points
        d2_kept = np.empty((len(rrhs), len(raw)))
    ue_pts = np.vstack([ue_pts, [[0.0, 0.0]]])
    ues = PointSet(ue_pts, raw.window_radius)
    sq = np.concatenate([d2_kept, rrhs.radii()[:, None] ** 2], axis=1) \
        if len(rrhs) else np.empty((0, len(ues)))
    cmap = geometry.build_association(rrhs, ues, params.r1, sq_dists=sq)
    return NetworkRealization(rrhs, ues, cmap, probe_idx=len(ues) - 1)


# --------------------------------------------------------------------------
# Per-trial evaluation
# --------------------------------------------------------------------------

def _complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) \
        / math.sqrt(2.0)


def _finish(p_s, p_i1, p_i2, tail, n0):
    p_i1 = float(p_i1)
    p_i2 = float(p_i2) + tail
    p_i = p_i1 + p_i2
    denom = p_i + n0
    if denom > 0.0:
        sinr = p_s / denom
    else:
        sinr = 0.0 if p_s == 0.0 else math.inf
    rate = math.log2(1.0 + sinr) if math.isfinite(sinr) else math.inf
    return TrialResult(float(p_s), p_i, p_i1, p_i2, sinr, rate,
                       float(p_s) + p_i)


def evaluate_realization(params: SystemParams, net: NetworkRealization, rng,
                         model="exact", count_radius=None,
                         tail=0.0) -> TrialResult:
    """One fading draw on a fixed topology.

    ``count_radius`` limits which RRHs contribute interference (their served
    UEs keep full-cluster power normalization); ``tail`` is the deterministic
    far-field mean added to the inter-cluster component.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    p = params
    der = derive(p)
    c = p.p_t / der.kappa
    cmap, u_star = net.cmap, net.probe_idx
    d0 = net.rrh_origin_dist()
    n_rrh, n_ue = len(net.rrhs), len(net.ues)
    if count_radius is None:
        count_radius = net.rrhs.window_radius

    h_star = _complex_normal(rng, (n_rrh, p.m)) if n_rrh else \
        np.empty((0, p.m), complex)

    pi, pu, dist = cmap.pair_rrh, cmap.pair_ue, cmap.pair_dist
    if len(pi) == 0:
        return _finish(0.0, 0.0, 0.0, tail, p.n0)

    counted = d0[pi] <= count_radius
    centric = d0[pi] <= p.r1
    star_pairs = pu == u_star

    # probe's useful power: coherent MRT collapses to P_t |g|^2
    star_sel = star_pairs.nonzero()[0]
    g2_star = float(np.sum(dist[star_sel] ** (-p.alpha)
                           * np.sum(np.abs(h_star[pi[star_sel]]) ** 2, axis=1)))
    p_s = c * g2_star

    if model == "gamma_approx":
        csize = np.bincount(pu, minlength=n_ue)
        take = counted & ~star_pairs
        if not take.any():
            return _finish(p_s, 0.0, 0.0, tail, p.n0)
        sizes = csize[pu[take]]
        ks, ss = analytic._gamma_tables(int(sizes.max()), p.m)
        z = rng.gamma(ks[sizes], ss[sizes])
        contrib = c * z * d0[pi[take]] ** (-p.alpha)
        cen = centric[take]
        return _finish(p_s, contrib[cen].sum(), contrib[~cen].sum(), tail, p.n0)

    # exact model
    h_pair = _complex_normal(rng, (len(pi), p.m))
    h_pair[star_sel] = h_star[pi[star_sel]]
    gain = dist ** (-p.alpha) * np.sum(np.abs(h_pair) ** 2, axis=1)
    g2 = np.zeros(n_ue)
    np.add.at(g2, pu, gain)
    inner = np.einsum("pk,pk->p", np.conj(h_pair), h_star[pi])
    amp = (dist ** (-p.alpha / 2.0) * d0[pi] ** (-p.alpha / 2.0) * inner
           / np.sqrt(g2[pu]))
    a_in = np.zeros(n_ue, complex)
    a_out = np.zeros(n_ue, complex)
    sel_in = counted & centric
    sel_out = counted & ~centric
    np.add.at(a_in, pu[sel_in], amp[sel_in])
    np.add.at(a_out, pu[sel_out], amp[sel_out])
    a_tot = a_in + a_out
    keep = np.ones(n_ue, bool)
    keep[u_star] = False
    # split Eq.-5 power by projection so parts recombine exactly
    p_i1 = c * float(np.sum((np.conj(a_tot[keep]) * a_in[keep]).real))
    p_i2 = c * float(np.sum((np.conj(a_tot[keep]) * a_out[keep]).real))
    return _finish(p_s, p_i1, p_i2, tail, p.n0)


# --------------------------------------------------------------------------
# Trial loop and empirical statistics
# --------------------------------------------------------------------------

def _trial_rng(seed, trial):
    return np.random.default_rng(np.random.SeedSequence((seed, trial)))


_COLS = ("p_s", "p_i", "p_i1", "p_i2", "sinr", "rate", "ipd")


def _run_block(params, model, seed, lo, hi, window_scale, r_core, tail):
    out = np.empty((len(_COLS), hi - lo))
    for trial in range(lo, hi):
        rng = _trial_rng(seed, trial)
        net = sample_network(params, window_scale, rng)
        res = evaluate_realization(params, net, rng, model,
                                   count_radius=r_core, tail=tail)
        for j, k in enumerate(_COLS):
            out[j, trial - lo] = getattr(res, k)
    return out


def run_trials(params: SystemParams, n_trials, model="exact", seed=0,
               theta_grid_db=None, theta_p_grid_dbm=None, window_scale=10.0,
               tail_correction=True, n_jobs=1) -> EmpiricalStats:
    """Simulate ``n_trials`` independent topologies + fading realizations.

    Performance is measured at the probe UE in the origin.  Interference is
    counted from RRHs within ``window_scale * r1``; the mean of the neglected
    far field is added back deterministically unless ``tail_correction`` is
    off.  Per-trial RNG streams derive from (seed, trial), so the output is
    identical for any ``n_jobs``.
    """
    from .inversion import default_theta_grid_db, default_theta_p_grid_dbm

    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    theta_grid_db = (default_theta_grid_db() if theta_grid_db is None
                     else np.asarray(theta_grid_db, float))
    theta_p_grid_dbm = (default_theta_p_grid_dbm() if theta_p_grid_dbm is None
                        else np.asarray(theta_p_grid_dbm, float))
    r_core = window_scale * params.r1
    tail = far_field_mean(params, r_core) if tail_correction else 0.0

    if n_jobs > 1 and n_trials > 1:
        from concurrent.futures import ProcessPoolExecutor
        edges = np.linspace(0, n_trials, 4 * n_jobs + 1).astype(int)
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futs = [pool.submit(_run_block, params, model, seed, int(lo),
                                int(hi), window_scale, r_core, tail)
                    for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]
            blocks = [f.result() for f in futs]
        data = np.concatenate(blocks, axis=1)
    else:
        data = _run_block(params, model, seed, 0, n_trials,
                          window_scale, r_core, tail)
    cols = {k: data[j] for j, k in enumerate(_COLS)}

    joint_f, joint_g = empirical_joint((cols["sinr"], cols["ipd"]),
                                       theta_grid_db, theta_p_grid_dbm)
    rate_ccdf = _empirical_ccdf(cols["sinr"], theta_grid_db)
    ipd_cdf = _empirical_cdf(cols["ipd"], theta_p_grid_dbm)
    s1 = cols["p_s"] + cols["p_i1"]
    moments = {
        "signal_plus_intra": (float(s1.mean()), float(s1.var())),
        "inter_cluster": (float(cols["p_i2"].mean()), float(cols["p_i2"].var())),
        "total": (float(cols["ipd"].mean()), float(cols["ipd"].var())),
    }
    meta = {"model": model, "seed": seed, "n_trials": n_trials,
            "window_scale": window_scale, "tail_mean_w": tail}
    return EmpiricalStats(rate_ccdf=rate_ccdf, ipd_cdf=ipd_cdf,
                          joint_f=joint_f, joint_g=joint_g,
                          moments=moments, meta=meta, **cols)


def _binom_hw(p_hat, n):
    return 1.96 * np.sqrt(np.maximum(p_hat * (1.0 - p_hat), 0.0) / n)


def _empirical_ccdf(sinr, theta_grid_db):
    thr = db_to_linear(np.asarray(theta_grid_db, float))
    p = (sinr[None, :] > thr[:, None]).mean(axis=1)
    return DistCurve(theta_grid_db, p, "coverage_ccdf", "dB",
                     ci_halfwidth=_binom_hw(p, len(sinr)))


def _empirical_cdf(ipd, theta_p_grid_dbm):
    thr = dbm_to_watts(np.asarray(theta_p_grid_dbm, float))
    p = (ipd[None, :] < thr[:, None]).mean(axis=1)
    return DistCurve(theta_p_grid_dbm, p, "ipd_cdf", "dBm",
                     ci_halfwidth=_binom_hw(p, len(ipd)))


def empirical_joint(samples, theta_grid_db, theta_p_grid_dbm):
    """Empirical joint surfaces over the (rate, power) threshold grid.

    F: fraction of trials with SIR above and power above both thresholds;
    G: same with power below.  Surfaces carry 95% binomial half-widths as
    their lower/upper band.
    """
    if isinstance(samples, EmpiricalStats):
        sinr, ipd = samples.sinr, samples.ipd
    else:
        sinr, ipd = samples
    theta_grid_db = np.asarray(theta_grid_db, float)
    theta_p_grid_dbm = np.asarray(theta_p_grid_dbm, float)
    if theta_grid_db.size == 0 or theta_p_grid_dbm.size == 0:
        raise ValueError("empty threshold grid")
    n = len(sinr)
    rate_ok = sinr[None, :] > db_to_linear(theta_grid_db)[:, None]
    below = ipd[None, :] < dbm_to_watts(theta_p_grid_dbm)[:, None]
    f_hat = (rate_ok[:, None, :] & ~below[None, :, :]).mean(axis=2)
    g_hat = (rate_ok[:, None, :] & below[None, :, :]).mean(axis=2)
    meta = {"n_trials": n}
    f = JointSurface(theta_grid_db, theta_p_grid_dbm,
                     f_hat - _binom_hw(f_hat, n), f_hat + _binom_hw(f_hat, n),
                     "F", {**meta, "point": f_hat})
    g = JointSurface(theta_grid_db, theta_p_grid_dbm,
                     g_hat - _binom_hw(g_hat, n), g_hat + _binom_hw(g_hat, n),
                     "G", {**meta, "point": g_hat})
    return f, g


# --------------------------------------------------------------------------
# Power-budget identity
# --------------------------------------------------------------------------

def power_budget_check(params: SystemParams, net: NetworkRealization, rng):
    """Summed allocated power per served UE under one fading draw.

    Returns (totals, served_mask): ``totals[u]`` is Sum_i P_t |g_iu|^2/|g_u|^2
    for UEs with a nonempty cluster; empty-cluster UEs are excluded from the
    identity and reported through the mask.
    """
    p = params
    cmap = net.cmap
    n_ue = len(net.ues)
    pi, pu, dist = cmap.pair_rrh, cmap.pair_ue, cmap.pair_dist
    h = _complex_normal(rng, (len(pi), p.m))
    gain = dist ** (-p.alpha) * np.sum(np.abs(h) ** 2, axis=1)
    g2 = np.zeros(n_ue)
    np.add.at(g2, pu, gain)
    served = g2 > 0.0
    totals = np.zeros(n_ue)
    np.add.at(totals, pu, p.p_t * gain / g2[pu])
    return totals[served], served


# --------------------------------------------------------------------------
# Share-quotient sampling (moment-matching oracle)
# --------------------------------------------------------------------------

def sample_power_share_quotient(n, m, size, rng, chunk=200_000):
    """Draws of the equal-distance power-share quotient for a cluster of
    ``n`` RRHs with ``m`` antennas: sum_k X_k Y_k / sum_{i,k} X_ik with all
    gains unit-exponential and X_1k shared between numerator and denominator.
    """
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    out = np.empty(size)
    for start in range(0, size, chunk):
        stop = min(start + chunk, size)
        sz = stop - start
        x = rng.exponential(size=(sz, n, m))
        y = rng.exponential(size=(sz, m))
        out[start:stop] = (x[:, 0, :] * y).sum(axis=1) / x.sum(axis=(1, 2))
    return out


def write_samples_csv(stats: EmpiricalStats, path):
    """Per-trial samples, powers in watts."""
    with open(path, "w", newline="") as fh:
        pairs = [f"{k}={v}" for k, v in sorted(stats.meta.items())]
        fh.write("# uccfn-samples," + ",".join(pairs) + "\n")
        w = csv.writer(fh)
        w.writerow(["p_s", "p_i1", "p_i2", "rate", "ipd"])
        for i in range(len(stats)):
            w.writerow([f"{stats.p_s[i]:.10g}", f"{stats.p_i1[i]:.10g}",
                        f"{stats.p_i2[i]:.10g}", f"{stats.rate[i]:.10g}",
                        f"{stats.ipd[i]:.10g}"])
