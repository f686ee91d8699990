"""Numerical CF inversion and the end-user metrics built on it: rate and
coverage CCDFs, received-power CDF, Fréchet bounds on the joint laws,
conditional bounds, and the interference-modeling ablation variants.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .analytic import CharFn, build_inter_cluster_cf, build_signal_cf, mean_components
from .config import (SystemParams, db_to_linear, dbm_to_watts, derive,
                     params_digest)

log = logging.getLogger(__name__)

VARIANTS = ("full", "no_intra", "independent_intra")

__all__ = [
    "DistCurve", "JointSurface", "NumericsError", "InversionError",
    "ConditioningError", "gil_pelaez_ccdf", "gil_pelaez_ccdf_batch",
    "rate_distribution", "coverage_probability", "ipd_distribution",
    "rate_distribution_variant", "coverage_probability_variant",
    "frechet_bounds", "conditional_bounds",
    "write_curve_csv", "read_curve_csv", "write_surface_csv", "read_surface_csv",
    "default_theta_grid_db", "default_theta_p_grid_dbm",
]


class NumericsError(RuntimeError):
    """A numerical procedure failed to reach its accuracy contract."""


class InversionError(NumericsError):
    """Gil-Pelaez tail did not converge within the segment cap."""

    def __init__(self, msg, partial=None, bound=None):
        super().__init__(msg)
        self.partial = partial
        self.bound = bound


class ConditioningError(ValueError):
    """Conditional metric requested on a null conditioning event."""


def default_theta_grid_db(step=0.5):
    return np.arange(-10.0, 20.0 + step / 2, step)


def default_theta_p_grid_dbm(step=0.5):
    return np.arange(-70.0, -30.0 + step / 2, step)


# --------------------------------------------------------------------------
# Curve / surface containers
# --------------------------------------------------------------------------

@dataclass
class DistCurve:
    """A sampled marginal distribution curve."""

    thresholds: np.ndarray
    values: np.ndarray
    kind: str                  # rate_ccdf | coverage_ccdf | ipd_cdf
    units: str = ""
    ci_halfwidth: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.thresholds.shape != self.values.shape:
            raise ValueError("thresholds/values shape mismatch")


@dataclass
class JointSurface:
    """Lower/upper bound surfaces over a (theta, theta') grid."""

    theta_grid: np.ndarray
    theta_p_grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    kind: str                  # F | G | K | conditional_mean
    meta: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# Gil-Pelaez engine
# --------------------------------------------------------------------------

_GL_CACHE = {}


def _gl(order):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _segment_contributions(cf, edges, xs, order):
    """Per-segment Gauss-Legendre sums of Im(phi e^{-jtx})/t, shape (nseg, nx)."""
    gx, gw = _gl(order)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    tt = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    phi = np.asarray(cf(tt))
    f = (phi[:, None] * np.exp(-1j * tt[:, None] * xs[None, :])).imag \
        / tt[:, None]
    f = f.reshape(len(mid), order, len(xs))
    return np.einsum("g,sgx,s->sx", gw, f, half)


def _tail_estimate(block_sum, prev):
    """Remaining-tail bound from two consecutive block sums.

    Alternating blocks bound the tail by the last block; same-sign decay is
    extrapolated geometrically (ratio clipped, so slow decay is still
    certified once the block magnitude is well below tolerance).
    """
    mag = np.abs(block_sum)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = mag / np.abs(prev)
    alt = block_sum * prev < 0.0
    rr = np.clip(ratio, 0.0, 0.9975)
    geo = mag * rr / (1.0 - rr)
    est = np.where(alt, mag, np.where(ratio < 1.0, geo, np.inf))
    est = np.where(np.isnan(ratio), np.inf, est)
    return np.where(mag == 0.0, 0.0, est)


class _TailState:
    """Per-threshold convergence bookkeeping over own-period blocks."""

    def __init__(self, block_lens, tol):
        self.blk = np.asarray(block_lens, dtype=int)
        self.tol = tol
        n = len(self.blk)
        self.buf = np.zeros(n)
        self.cnt = np.zeros(n, dtype=int)
        self.prev = np.full(n, np.nan)
        self.est = np.full(n, np.inf)
        self.streak = np.zeros(n, dtype=int)

    def feed(self, contrib_rows):
        for row in contrib_rows:
            self.buf += row
            self.cnt += 1
            hit = self.cnt >= self.blk
            if hit.any():
                est = _tail_estimate(self.buf[hit], self.prev[hit])
                self.est[hit] = est
                self.streak[hit] = np.where(est < self.tol,
                                            self.streak[hit] + 1, 0)
                self.prev[hit] = self.buf[hit]
                self.buf[hit] = 0.0
                self.cnt[hit] = 0

    def converged(self):
        return self.streak >= 2


def gil_pelaez_ccdf_batch(cf: CharFn, xs, *, tail_tol=1e-6, max_segments=6144,
                          order=10, tail_segments=8000, min_shared=512):
    """P[X > x] for every x in ``xs`` from one shared CF.

    The positive half-line is cut into half-period segments aligned to the
    fastest oscillation, max(max|x|, cf.scale); each segment is integrated by
    Gauss-Legendre, convergence is tracked per threshold over blocks spanning
    one period of its own oscillation, and the series is truncated once the
    estimated remaining contribution falls below ``tail_tol`` everywhere (as
    t -> 0 the integrand tends to mean - x, so the open first segment is
    regular).  Thresholds whose oscillation is much slower than the alignment
    (slowly decaying |phi| leaves a non-alternating tail there) are finished
    individually on geometrically growing segments.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    x_align = max(float(np.max(np.abs(xs))) if xs.size else 0.0,
                  float(cf.scale), 1e-300)
    delta = math.pi / x_align
    own = 2.0 * math.pi / (np.maximum(np.abs(xs), x_align / 500.0) * delta)
    state = _TailState(np.clip(np.ceil(own), 8, 64), tail_tol)
    acc = np.zeros(xs.shape)
    seg0 = 0
    batch = 256
    while seg0 < max_segments:
        nseg = min(batch, max_segments - seg0)
        edges = delta * np.arange(seg0, seg0 + nseg + 1)
        contrib = _segment_contributions(cf, edges, xs, order)
        acc += contrib.sum(axis=0)
        state.feed(contrib)
        seg0 += nseg
        done_frac = float(np.mean(state.converged()))
        if done_frac == 1.0:
            break
        # hand slow stragglers (smooth far tails) to geometric continuation
        if seg0 >= min_shared and done_frac >= min(0.8, 1.0 - 1.0 / len(xs)):
            break
    t_reached = seg0 * delta
    for ix in np.nonzero(~state.converged())[0]:
        acc[ix] += _tail_continue(cf, float(xs[ix]), t_reached, x_align,
                                  tail_tol, tail_segments)
    vals = 0.5 + acc / math.pi
    clamped = np.clip(vals, 0.0, 1.0)
    n_clamped = int(np.sum(clamped != vals))
    if n_clamped:
        log.debug("gil-pelaez: clamped %d of %d values into [0,1] "
                  "(max excursion %.2e)", n_clamped, vals.size,
                  float(np.max(np.abs(clamped - vals))))
    return clamped


def _tail_continue(cf, x, t_start, x_align, tail_tol, tail_segments,
                   grow=1.3, order=24, chunk=16):
    """Finish one threshold's tail on geometric segments capped at the
    half-period of its own oscillation."""
    cap = math.pi / max(abs(x), x_align / 5000.0)
    state = _TailState([4], tail_tol)
    acc = 0.0
    a = t_start
    segs = 0
    xarr = np.array([x])
    while segs < tail_segments:
        edges = [a]
        for _ in range(chunk):
            a = min(a * grow, a + cap)
            edges.append(a)
        contrib = _segment_contributions(cf, np.asarray(edges), xarr, order)
        acc += float(contrib.sum())
        state.feed(contrib)
        segs += chunk
        if state.converged().all():
            return acc
    raise InversionError(
        f"tail not converged at x={x:g} after {tail_segments} extra segments "
        f"(remaining bound {float(state.est[0]):.2e})",
        partial=acc, bound=float(state.est[0]))


def gil_pelaez_ccdf(cf: CharFn, x, **kw) -> float:
    """P[X > x] by Gil-Pelaez inversion of the characteristic function."""
    return float(gil_pelaez_ccdf_batch(cf, [x], **kw)[0])


# --------------------------------------------------------------------------
# Marginal curves
# --------------------------------------------------------------------------

def _product_cf(params, theta_tilde, variant):
    """CF of P_S + weight*P_I1 - theta_tilde*P_I2 for one threshold."""
    inner = params.r0 if variant == "independent_intra" else None
    weight = -theta_tilde if variant == "full" else 0.0
    cf_sig = build_signal_cf(params, weight)
    cf_out = build_inter_cluster_cf(params, inner_radius=inner)
    scale = cf_sig.scale + theta_tilde * (cf_out.scale + params.n0)

    def fn(t, _tt=theta_tilde):
        return cf_sig(t) * cf_out(-_tt * t)

    return CharFn(fn, f"sir event cf (tt={theta_tilde:g}, {variant})",
                  max(scale, 1e-300))


def _sir_event_ccdf(params: SystemParams, theta_tilde, variant="full"):
    """P[P_S > theta_tilde * (P_I' + N_0)] for each threshold in linear units."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    der = derive(params)
    out = np.empty(len(theta_tilde))
    errors = {}
    for idx, tt in enumerate(theta_tilde):
        if tt < 0.0:
            out[idx] = 1.0
            continue
        if tt == 0.0:
            # SIR > 0 reduces to a nonempty serving cluster
            out[idx] = 1.0 - math.exp(-der.n_av_r)
            continue
        cf = _product_cf(params, float(tt), variant)
        try:
            out[idx] = gil_pelaez_ccdf(cf, tt * params.n0)
        except InversionError as exc:            # keep the rest of the grid
            log.warning("inversion failed at threshold %g: %s", tt, exc)
            out[idx] = np.nan
            errors[float(tt)] = str(exc)
    return out, errors


def rate_distribution(params: SystemParams, theta_grid, variant="full") -> DistCurve:
    """CCDF of the spectral efficiency: P[log2(1 + SIR) > theta].

    ``theta_grid`` holds spectral-efficiency thresholds in bit/s/Hz; each maps
    to the linear SIR threshold 2^theta - 1.
    """
    theta = np.asarray(theta_grid, dtype=float)
    vals, errors = _sir_event_ccdf(params, 2.0 ** theta - 1.0, variant)
    meta = {"params": params_digest(params), "variant": variant}
    if errors:
        meta["errors"] = errors
    return DistCurve(theta, vals, "rate_ccdf", "bit/s/Hz", meta=meta)


def coverage_probability(params: SystemParams, theta_grid,
                         variant="full") -> DistCurve:
    """Coverage CCDF P[SIR > theta] on a linear SIR threshold grid."""
    theta = np.asarray(theta_grid, dtype=float)
    vals, errors = _sir_event_ccdf(params, theta, variant)
    meta = {"params": params_digest(params), "variant": variant}
    if errors:
        meta["errors"] = errors
    return DistCurve(theta, vals, "coverage_ccdf", "linear", meta=meta)


def rate_distribution_variant(params, theta_grid, variant) -> DistCurve:
    """Ablations: ``full``; ``no_intra`` drops the intra-cluster term;
    ``independent_intra`` additionally extends the outer interference field
    inward to the exclusion radius."""
    return rate_distribution(params, theta_grid, variant)


def coverage_probability_variant(params, theta_grid, variant) -> DistCurve:
    return coverage_probability(params, theta_grid, variant)


def ipd_distribution(params: SystemParams, theta_p_grid_dbm) -> DistCurve:
    """CDF of the total received power P[P_S + P_I' < theta'], thresholds in dBm."""
    grid = np.asarray(theta_p_grid_dbm, dtype=float)
    xs = dbm_to_watts(grid)
    cf_sig = build_signal_cf(params, 1.0)
    cf_out = build_inter_cluster_cf(params)
    cf = CharFn(lambda t: cf_sig(t) * cf_out(t), "total received power cf",
                max(cf_sig.scale + cf_out.scale, 1e-300))
    vals = 1.0 - gil_pelaez_ccdf_batch(cf, xs)
    return DistCurve(grid, vals, "ipd_cdf", "dBm",
                     meta={"params": params_digest(params)})


# --------------------------------------------------------------------------
# Joint bounds
# --------------------------------------------------------------------------

def _check_prob_curve(curve: DistCurve, name):
    finite = np.isfinite(curve.values)
    if not finite.all():
        raise ValueError(f"{name} contains non-finite values")
    if np.any(curve.values < -1e-9) or np.any(curve.values > 1 + 1e-9):
        raise ValueError(f"{name} is not a probability curve")


def frechet_bounds(p_r: DistCurve, p_e: DistCurve):
    """Distribution-free bound surfaces for the joint events
    {rate > theta, power > theta'} (F) and {rate > theta, power < theta'} (G).
    """
    _check_prob_curve(p_r, "rate curve")
    _check_prob_curve(p_e, "power curve")
    pr = p_r.values[:, None]
    pe = p_e.values[None, :]
    f_low = np.maximum(0.0, pr - pe)
    f_up = np.minimum(pr, 1.0 - pe)
    g_low = np.maximum(0.0, pr + pe - 1.0)
    g_up = np.minimum(pr, pe)
    meta = {"rate_meta": p_r.meta, "power_meta": p_e.meta}
    f = JointSurface(p_r.thresholds, p_e.thresholds, f_low, f_up, "F", meta)
    g = JointSurface(p_r.thresholds, p_e.thresholds, g_low, g_up, "G", meta)
    return f, g


def conditional_bounds(p_r: DistCurve, p_e: DistCurve, kind="K") -> JointSurface:
    """Bounds on the conditional exposure law given good coverage.

    ``kind="K"``: bounds on P[power < theta' | rate > theta].
    ``kind="mean"``: bounds on E[power | rate > theta]; the power grid must be
    wide enough that the upper-tail integrand falls below 1e-6.
    """
    _check_prob_curve(p_r, "rate curve")
    _check_prob_curve(p_e, "power curve")
    if np.any(p_r.values <= 0.0):
        bad = p_r.thresholds[p_r.values <= 0.0]
        raise ConditioningError(f"conditioning event null at thresholds {bad}")
    pr = p_r.values[:, None]
    pe = p_e.values[None, :]
    k_low = np.maximum(0.0, pr + pe - 1.0) / pr
    k_up = np.minimum(pr, pe) / pr
    if kind == "K":
        return JointSurface(p_r.thresholds, p_e.thresholds, k_low,
                            np.minimum(k_up, 1.0), "K")
    if kind != "mean":
        raise ValueError(f"unknown kind {kind!r}")
    if p_e.units != "dBm":
        raise ValueError("mean bounds need the power curve on a dBm grid")
    w = dbm_to_watts(p_e.thresholds)
    # integrand -> 1 at theta' -> 0 (P_e -> 0), so prepend the exact origin point
    w_ext = np.concatenate([[0.0], w])
    lo_integrand = np.concatenate([np.ones((len(pr), 1)), 1.0 - k_up], axis=1)
    up_integrand = np.concatenate([np.ones((len(pr), 1)), 1.0 - k_low], axis=1)
    tail = float(np.max(up_integrand[:, -1]))
    if tail > 1e-6:
        raise NumericsError(
            f"power grid too short for mean bounds: tail integrand {tail:.2e}; "
            f"extend the dBm grid upward")
    m_low = np.trapezoid(lo_integrand, w_ext, axis=1)
    m_up = np.trapezoid(up_integrand, w_ext, axis=1)
    return JointSurface(p_r.thresholds, p_e.thresholds, m_low, m_up,
                        "conditional_mean")


# --------------------------------------------------------------------------
# CSV formats
# --------------------------------------------------------------------------

def _meta_header(kind, units, meta):
    pairs = [f"kind={kind}", f"units={units}"]
    pairs += [f"{k}={v}" for k, v in sorted(meta.items())
              if isinstance(v, (str, int, float))]
    return "# uccfn-curve," + ",".join(pairs)


def write_curve_csv(curve: DistCurve, path):
    with open(path, "w", newline="") as fh:
        fh.write(_meta_header(curve.kind, curve.units, curve.meta) + "\n")
        w = csv.writer(fh)
        if curve.ci_halfwidth is not None:
            w.writerow(["threshold", "value", "ci_halfwidth"])
            for t, v, c in zip(curve.thresholds, curve.values, curve.ci_halfwidth):
                w.writerow([f"{t:.10g}", f"{v:.10g}", f"{c:.10g}"])
        else:
            w.writerow(["threshold", "value"])
            for t, v in zip(curve.thresholds, curve.values):
                w.writerow([f"{t:.10g}", f"{v:.10g}"])


def read_curve_csv(path) -> DistCurve:
    with open(path) as fh:
        first = fh.readline().strip()
        meta = {}
        if first.startswith("# uccfn-curve"):
            for item in first.split(",")[1:]:
                k, _, v = item.partition("=")
                meta[k] = v
        else:
            fh.seek(0)
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    cols = np.array([[float(x) for x in row] for row in data])
    ci = cols[:, 2] if len(header) > 2 else None
    return DistCurve(cols[:, 0], cols[:, 1], meta.pop("kind", "unknown"),
                     meta.pop("units", ""), ci_halfwidth=ci, meta=meta)


def write_surface_csv(surface: JointSurface, path):
    with open(path, "w", newline="") as fh:
        fh.write(_meta_header(surface.kind, "dB,dBm", surface.meta) + "\n")
        w = csv.writer(fh)
        w.writerow(["theta", "theta_p", "lower", "upper"])
        lower = np.atleast_2d(surface.lower)
        upper = np.atleast_2d(surface.upper)
        for i, th in enumerate(np.atleast_1d(surface.theta_grid)):
            if surface.kind == "conditional_mean":
                w.writerow([f"{th:.10g}", "", f"{surface.lower[i]:.10g}",
                            f"{surface.upper[i]:.10g}"])
                continue
            for j, tp in enumerate(np.atleast_1d(surface.theta_p_grid)):
                w.writerow([f"{th:.10g}", f"{tp:.10g}",
                            f"{lower[i, j]:.10g}", f"{upper[i, j]:.10g}"])


def read_surface_csv(path) -> JointSurface:
    with open(path) as fh:
        first = fh.readline().strip()
        meta = {}
        if first.startswith("# uccfn-curve"):
            for item in first.split(",")[1:]:
                k, _, v = item.partition("=")
                meta[k] = v
        else:
            fh.seek(0)
        rows = list(csv.reader(fh))
    data = rows[1:]
    th = sorted({float(r[0]) for r in data})
    tp = sorted({float(r[1]) for r in data if r[1] != ""})
    kind = meta.pop("kind", "unknown")
    if kind == "conditional_mean":
        lower = np.array([float(r[2]) for r in data])
        upper = np.array([float(r[3]) for r in data])
        return JointSurface(np.array(th), np.array(tp), lower, upper, kind, meta)
    ti = {v: i for i, v in enumerate(th)}
    tj = {v: j for j, v in enumerate(tp)}
    lower = np.full((len(th), len(tp)), np.nan)
    upper = np.full((len(th), len(tp)), np.nan)
    for r in data:
        i, j = ti[float(r[0])], tj[float(r[1])]
        lower[i, j] = float(r[2])
        upper[i, j] = float(r[3])
    return JointSurface(np.array(th), np.array(tp), lower, upper, kind, meta)
