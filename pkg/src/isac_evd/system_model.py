"""Scenario configuration, steering vectors, sensing waveform, derived scalars."""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "SystemConfig",
    "DerivedParams",
    "dbm_to_mw",
    "mw_to_dbm",
    "steering_vector",
    "sensing_waveform",
    "derive",
    "load_config",
    "dump_config",
    "calibrated_config_path",
]


class ConfigError(ValueError):
    """Invalid scenario parameters or an unreadable config file."""


def dbm_to_mw(dbm):
    out = 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)
    return out if out.ndim else float(out)


def mw_to_dbm(mw):
    out = 10.0 * np.log10(np.asarray(mw, dtype=float))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SystemConfig:
    """All scenario inputs. Powers in dBm, angles in radians.

    ``comm_channel_var`` is the variance of each entry of the communication
    channel; it stands in for the path loss the figures assume.
    """

    n_tx: int = 2
    n_rx_comm: int = 2
    n_rx_sense: int = 2
    samples: int = 10
    total_power_dbm: float = 8.0
    rho_c: float = 0.9
    sigma_c2_dbm: float = 0.0
    sigma_s2_dbm: float = 0.0
    theta_t: float = math.pi / 6
    theta_r: float = math.pi / 6
    gain_t: float = 1.0
    gain_r: float = 1.0
    comm_channel_var: float = 1.0
    seed: int = 20250101

    def __post_init__(self):
        if int(self.n_tx) != self.n_tx or self.n_tx < 1:
            raise ConfigError("n_tx must be a positive integer")
        if self.n_rx_comm != 2 or self.n_rx_sense != 2:
            raise ConfigError("both receivers must have exactly 2 antennas")
        if int(self.samples) != self.samples or self.samples < 2:
            raise ConfigError("samples must be an integer >= 2")
        if not 0.0 <= self.rho_c <= 1.0:
            raise ConfigError("rho_c must lie in [0, 1]")
        if self.gain_t <= 0 or self.gain_r <= 0:
            raise ConfigError("steering gains must be positive")
        if self.comm_channel_var <= 0:
            raise ConfigError("comm_channel_var must be positive")
        for name in ("total_power_dbm", "sigma_c2_dbm", "sigma_s2_dbm", "theta_t", "theta_r"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")

    @property
    def rho_s(self) -> float:
        return 1.0 - self.rho_c

    @property
    def total_power(self) -> float:
        return dbm_to_mw(self.total_power_dbm)

    @property
    def sigma_s2(self) -> float:
        return dbm_to_mw(self.sigma_s2_dbm)

    @property
    def sigma_c2(self) -> float:
        return dbm_to_mw(self.sigma_c2_dbm)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class DerivedParams:
    g1: np.ndarray
    g2: np.ndarray
    p: float
    beta_c2: float
    a: float
    b: float
    omega_trace: float
    alpha_norm2: float
    # alpha_s itself, needed by the sampler for the H1 mean g2 alpha_s^H
    alpha_s: np.ndarray = field(repr=False)

    @property
    def g2_norm2(self) -> float:
        return float(np.vdot(self.g2, self.g2).real)


def steering_vector(theta: float, gain: float, n: int) -> np.ndarray:
    """sqrt(gain) * exp(-j pi m sin(theta)) for m = 0..n-1."""
    if n < 1:
        raise ValueError("n must be positive")
    if gain <= 0:
        raise ValueError("gain must be positive")
    m = np.arange(n)
    return math.sqrt(gain) * np.exp(-1j * math.pi * m * math.sin(theta))


def sensing_waveform(n_tx: int, samples: int) -> np.ndarray:
    """First ``n_tx`` rows of the K-point DFT matrix.

    Unit-modulus symbols with orthogonal rows, so S S^H = K I exactly (up to
    rounding). Requires ``samples >= n_tx``.
    """
    if samples < n_tx:
        raise ConfigError(f"sensing waveform needs samples >= n_tx ({samples} < {n_tx})")
    m = np.arange(n_tx)[:, None]
    k = np.arange(samples)[None, :]
    return np.exp(-2j * math.pi * ((m * k) % samples) / samples)


def derive(config: SystemConfig) -> DerivedParams:
    g1 = steering_vector(config.theta_t, config.gain_t, config.n_tx)
    g2 = steering_vector(config.theta_r, config.gain_r, config.n_rx_sense)
    S = sensing_waveform(config.n_tx, config.samples)
    p = config.total_power / (config.n_rx_sense * config.n_tx)
    sigma2 = config.sigma_s2

    g1_norm2 = float(np.vdot(g1, g1).real)
    g2_norm2 = float(np.vdot(g2, g2).real)
    beta_c2 = config.rho_c * p * g1_norm2
    alpha_s = math.sqrt(config.rho_s * p) * (S.conj().T @ g1)
    alpha_norm2 = float(np.vdot(alpha_s, alpha_s).real)
    Sg = S.conj().T @ g1
    a = config.rho_s * p * float(np.vdot(Sg, Sg).real) * g2_norm2
    b = sigma2 + beta_c2 * g2_norm2

    # trace of the non-centrality matrix, straight from its definition
    cov = sigma2 * np.eye(2) + beta_c2 * np.outer(g2, g2.conj())
    omega = alpha_norm2 * np.linalg.solve(cov, np.outer(g2, g2.conj()))
    omega_trace = float(np.trace(omega).real)

    return DerivedParams(
        g1=g1,
        g2=g2,
        p=p,
        beta_c2=beta_c2,
        a=a,
        b=b,
        omega_trace=omega_trace,
        alpha_norm2=alpha_norm2,
        alpha_s=alpha_s,
    )


_FIELD_NAMES = {f.name for f in fields(SystemConfig)}
_INT_FIELDS = {"n_tx", "n_rx_comm", "n_rx_sense", "samples", "seed"}


def _coerce(name, value):
    if isinstance(value, bool):
        raise ConfigError(f"{name}: booleans are not accepted")
    if name in _INT_FIELDS:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{name} must be an integer")
        return int(value)
    if not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {type(value).__name__}")
    return float(value)


def config_from_mapping(data: dict) -> SystemConfig:
    unknown = sorted(set(data) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return SystemConfig(**{k: _coerce(k, v) for k, v in data.items()})


def load_config(path) -> SystemConfig:
    """Read a flat TOML document whose keys are SystemConfig field names.

    Omitted keys fall back to the dataclass defaults; unknown keys and
    nested tables are errors.
    """
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; found tables: {', '.join(nested)}")
    return config_from_mapping(data)


def dump_config(config: SystemConfig) -> str:
    """Flat TOML text that ``load_config`` reads back to an equal config."""
    lines = []
    for f in fields(SystemConfig):
        v = getattr(config, f.name)
        lines.append(f"{f.name} = {v!r}" if f.name not in _INT_FIELDS else f"{f.name} = {int(v)}")
    return "\n".join(lines) + "\n"


def calibrated_config_path() -> Path:
    return Path(__file__).parent / "data" / "calibrated.toml"
