"""System parameters, unit conventions, derived constants and validation.

All internal power quantities are linear watts; dB/dBm conversions happen at
the interface boundary only.  Densities (lambda_r, lambda_u) are the internal
representation; per-cluster averages (n_av_R, n_av_U) are accepted at the
public boundary and converted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

SPEED_OF_LIGHT = 299_792_458.0  # m/s


# --------------------------------------------------------------------------
# Errors
# --------------------------------------------------------------------------

class ValidationError(ValueError):
    """Base class for parameter validation failures."""


class AlphaTooSmallError(ValidationError):
    """Path-loss exponent must exceed 2 (finite far-field interference)."""


class RadiusOrderingError(ValidationError):
    """Exclusion / cluster radii must satisfy 0 < r0 < r1."""


class NonPositivePowerError(ValidationError):
    """Transmit power must be strictly positive."""


class NonPositiveFrequencyError(ValidationError):
    """Carrier frequency must be strictly positive."""


class DensityError(ValidationError):
    """Node densities must satisfy lambda_r > 0 and lambda_u >= 0."""


class NoisePowerError(ValidationError):
    """Noise power must be nonnegative."""


class AntennaCountError(ValidationError):
    """Antennas per RRH must be an integer >= 1."""


class ConfigFileError(ValidationError):
    """Malformed or inconsistent configuration file."""


# --------------------------------------------------------------------------
# Parameter containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemParams:
    """Physical and deployment parameters of the network.

    p_t       transmit power budget per UE (W)
    freq      carrier frequency (Hz)
    alpha     path-loss exponent (> 2)
    r0        exclusion radius around each RRH (m)
    r1        cluster (association) radius (m)
    lambda_r  RRH density (m^-2)
    lambda_u  UE density (m^-2)
    m         antennas per RRH
    n0        noise power (W)
    """

    p_t: float
    freq: float
    alpha: float
    r0: float
    r1: float
    lambda_r: float
    lambda_u: float
    m: int = 1
    n0: float = 0.0

    @staticmethod
    def from_cluster_averages(p_t, freq, alpha, r0, r1, n_av_R, n_av_U,
                              m=1, n0=0.0) -> "SystemParams":
        """Build params from average node counts per cluster area.

        n_av_R = lambda_r * pi * (r1^2 - r0^2) and n_av_U = lambda_u * pi * r1^2.
        """
        if not (0 < r0 < r1):
            raise RadiusOrderingError(f"need 0 < r0 < r1, got r0={r0}, r1={r1}")
        lam_r = n_av_R / (math.pi * (r1 * r1 - r0 * r0))
        lam_u = n_av_U / (math.pi * r1 * r1)
        return SystemParams(p_t=p_t, freq=freq, alpha=alpha, r0=r0, r1=r1,
                            lambda_r=lam_r, lambda_u=lam_u, m=m, n0=n0)

    def with_cluster_averages(self, n_av_R=None, n_av_U=None) -> "SystemParams":
        """Return a copy with densities replaced via per-cluster averages."""
        kw = {}
        if n_av_R is not None:
            kw["lambda_r"] = n_av_R / (math.pi * (self.r1 ** 2 - self.r0 ** 2))
        if n_av_U is not None:
            kw["lambda_u"] = n_av_U / (math.pi * self.r1 ** 2)
        return replace(self, **kw)


@dataclass(frozen=True)
class DerivedParams:
    """Constants derived from SystemParams.

    kappa     reference path loss at 1 m, (4*pi*f/c)^2
    n_av_r    mean RRHs per cluster annulus, lambda_r * pi * (r1^2 - r0^2)
    n_av_u    mean UEs per cluster disk, lambda_u * pi * r1^2
    """

    kappa: float
    n_av_r: float
    n_av_u: float


def validate(params: SystemParams) -> SystemParams:
    """Return ``params`` unchanged iff every invariant holds.

    Each violated invariant raises its own named error so callers can map
    failures to distinct exit codes / messages.
    """
    if not params.alpha > 2.0:
        raise AlphaTooSmallError(
            f"alpha must exceed 2 for a finite far-field integral, got {params.alpha}")
    if not (0.0 < params.r0 < params.r1):
        raise RadiusOrderingError(f"need 0 < r0 < r1, got r0={params.r0}, r1={params.r1}")
    if not params.p_t > 0.0:
        raise NonPositivePowerError(f"p_t must be > 0, got {params.p_t}")
    if not params.freq > 0.0:
        raise NonPositiveFrequencyError(f"freq must be > 0, got {params.freq}")
    if not params.lambda_r > 0.0:
        raise DensityError(f"lambda_r must be > 0, got {params.lambda_r}")
    if params.lambda_u < 0.0:
        raise DensityError(f"lambda_u must be >= 0, got {params.lambda_u}")
    if params.n0 < 0.0:
        raise NoisePowerError(f"n0 must be >= 0, got {params.n0}")
    if int(params.m) != params.m or params.m < 1:
        raise AntennaCountError(f"m must be an integer >= 1, got {params.m}")
    return params


def derive(params: SystemParams) -> DerivedParams:
    """Compute kappa and the per-cluster average node counts.  Pure function."""
    kappa = (4.0 * math.pi * params.freq / SPEED_OF_LIGHT) ** 2
    n_av_r = params.lambda_r * math.pi * (params.r1 ** 2 - params.r0 ** 2)
    n_av_u = params.lambda_u * math.pi * params.r1 ** 2
    return DerivedParams(kappa=kappa, n_av_r=n_av_r, n_av_u=n_av_u)


# --------------------------------------------------------------------------
# Unit conversions (interface boundary only)
# --------------------------------------------------------------------------

def db_to_linear(x_db):
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x):
    return 10.0 * math.log10(x) if not hasattr(x, "__len__") else _log10v(x)


def _log10v(x):
    import numpy as np
    return 10.0 * np.log10(x)


def dbm_to_watts(x_dbm):
    return 1e-3 * 10.0 ** (x_dbm / 10.0)


def watts_to_dbm(p_w):
    if hasattr(p_w, "__len__"):
        import numpy as np
        return 10.0 * np.log10(np.asarray(p_w) / 1e-3)
    return 10.0 * math.log10(p_w / 1e-3)


# --------------------------------------------------------------------------
# Config files
# --------------------------------------------------------------------------

_FIELDS = ("p_t", "freq", "alpha", "r0", "r1", "lambda_r", "lambda_u", "m", "n0")
_AVERAGE_KEYS = {"n_av_R", "n_av_r", "n_av_U", "n_av_u"}


def _parse_kv_text(text: str) -> dict:
    """Parse a flat ``key = value`` file (TOML-style scalars, # comments)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigFileError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip().strip('"').strip("'")
        try:
            out[key] = int(val) if val.lstrip("+-").isdigit() else float(val)
        except ValueError as exc:
            raise ConfigFileError(f"line {lineno}: non-numeric value {val!r}") from exc
    return out


def load_params(path) -> SystemParams:
    """Load a SystemParams from a JSON or ``key = value`` config file.

    Keys match SystemParams field names; optional ``n_av_R`` / ``n_av_U``
    override the densities (converted through the cluster geometry).
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigFileError(f"{path}: invalid JSON: {exc}") from exc
    else:
        data = _parse_kv_text(text)

    unknown = set(data) - set(_FIELDS) - _AVERAGE_KEYS
    if unknown:
        raise ConfigFileError(f"{path}: unknown keys {sorted(unknown)}")

    kw = {k: data[k] for k in _FIELDS if k in data}
    missing = {"p_t", "freq", "alpha", "r0", "r1"} - set(kw)
    if missing:
        raise ConfigFileError(f"{path}: missing required keys {sorted(missing)}")
    n_av_r = data.get("n_av_R", data.get("n_av_r"))
    n_av_u = data.get("n_av_U", data.get("n_av_u"))
    if "lambda_r" not in kw:
        if n_av_r is None:
            raise ConfigFileError(f"{path}: need lambda_r or n_av_R")
        kw["lambda_r"] = 0.0  # placeholder, replaced below
    if "lambda_u" not in kw:
        if n_av_u is None:
            raise ConfigFileError(f"{path}: need lambda_u or n_av_U")
        kw["lambda_u"] = 0.0
    kw.setdefault("m", 1)
    kw["m"] = int(kw["m"])
    params = SystemParams(**kw)
    if n_av_r is not None or n_av_u is not None:
        params = params.with_cluster_averages(n_av_R=n_av_r, n_av_U=n_av_u)
    return validate(params)


def params_digest(params: SystemParams) -> str:
    """Short stable hash of a parameter set, for output-file provenance."""
    import hashlib
    blob = ",".join(f"{k}={getattr(params, k)!r}" for k in _FIELDS)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]
