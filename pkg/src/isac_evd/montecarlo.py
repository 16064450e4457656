"""Ground-truth sampler for the eigenvalue detector.

Random numbers come from Philox keyed by (seed, stream id); trial ``i`` always
reads the same fixed block of the counter space, so a batch is identical no
matter how it is chunked or in which order the chunks run.

Complex normals use Box-Muller on pairs of 53-bit uniforms and follow the
convention E|z|^2 = 1 (real and imaginary parts each with variance 1/2).
"""

from __future__ import annotations

import enum
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .system_model import DerivedParams, SystemConfig

__all__ = [
    "Hypothesis",
    "Scaling",
    "CounterStream",
    "TrialBatch",
    "DetectionCurve",
    "sample_received",
    "max_eig_2x2",
    "lambda_max_batch",
    "run_batch",
    "empirical_curve",
    "wilson_halfwidth",
    "dump_lambda_samples",
    "load_lambda_samples",
]

STREAM_H0 = 0
STREAM_H1 = 1
STREAM_CAPACITY = 2

_U53 = 1.0 / 9007199254740992.0  # 2**-53


class Hypothesis(str, enum.Enum):
    H0 = "H0"
    H1 = "H1"


class Scaling(str, enum.Enum):
    """How the test statistic is normalised.

    RAW_SUM thresholds the largest eigenvalue of R R^H, SAMPLE_MEAN that of
    R R^H / K.
    """

    RAW_SUM = "raw_sum"
    SAMPLE_MEAN = "sample_mean"

    def to_raw(self, tau, samples: int):
        return tau * samples if self is Scaling.SAMPLE_MEAN else tau

    def from_raw(self, raw, samples: int):
        return raw / samples if self is Scaling.SAMPLE_MEAN else raw


class CounterStream:
    """Per-trial complex normal draws from a counter-based generator.

    Each trial owns ``ceil(per_trial / 2)`` Philox blocks (four 64-bit words
    each, two words per complex normal).
    """

    def __init__(self, seed: int, stream_id: int, per_trial: int):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.per_trial = int(per_trial)
        self.blocks_per_trial = (self.per_trial + 1) // 2

    def normals(self, start: int, count: int) -> np.ndarray:
        """Standard complex normals for trials [start, start + count)."""
        bg = np.random.Philox(key=[self.seed, self.stream_id])
        bg.advance(start * self.blocks_per_trial)
        words = bg.random_raw(count * self.blocks_per_trial * 4).reshape(count, -1)
        words = words[:, : 2 * self.per_trial]
        u1 = 1.0 - (words[:, 0::2] >> np.uint64(11)).astype(float) * _U53  # (0, 1]
        u2 = (words[:, 1::2] >> np.uint64(11)).astype(float) * _U53
        radius = np.sqrt(-np.log(u1))
        return radius * np.exp(2j * math.pi * u2)


@dataclass(frozen=True)
class TrialBatch:
    hypothesis: Hypothesis
    trials: int
    lambda_samples: np.ndarray = field(repr=False)
    seed: int
    scaling: Scaling

    def __post_init__(self):
        if self.lambda_samples.shape != (self.trials,):
            raise ValueError("lambda_samples must hold exactly one value per trial")


@dataclass(frozen=True)
class DetectionCurve:
    tau: np.ndarray
    p_f: np.ndarray
    p_d: np.ndarray
    source: str
    ci_f: np.ndarray | None = None
    ci_d: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def p_md(self) -> np.ndarray:
        return 1.0 - self.p_d

    @property
    def p_e(self) -> np.ndarray:
        return 0.5 * (self.p_f + self.p_md)


def _h1_mixing(derived: DerivedParams, config: SystemConfig):
    g2 = derived.g2
    cov = derived.beta_c2 * np.outer(g2, g2.conj()) + config.sigma_s2 * np.eye(2)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("H1 row covariance is not positive definite") from exc
    mean = np.outer(g2, derived.alpha_s.conj())
    return mean, chol


def _draw(hypothesis, derived, config, stream: CounterStream, start: int, count: int) -> np.ndarray:
    K = config.samples
    z = stream.normals(start, count).reshape(count, 2, K)
    if hypothesis is Hypothesis.H0:
        return math.sqrt(config.sigma_s2) * z
    mean, chol = _h1_mixing(derived, config)
    return mean[None] + np.einsum("ij,njk->nik", chol, z)


def sample_received(hypothesis, derived: DerivedParams, config: SystemConfig, stream: CounterStream, index: int = 0):
    """One 2 x K received block for trial ``index`` of ``stream``."""
    return _draw(Hypothesis(hypothesis), derived, config, stream, index, 1)[0]


def max_eig_2x2(m, tol: float = 1e-12) -> float:
    """Largest eigenvalue of a 2x2 Hermitian matrix in closed form."""
    m = np.asarray(m)
    if m.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.conj().T)) > tol * scale:
        raise ValueError("matrix is not Hermitian")
    tr = float(m[0, 0].real + m[1, 1].real)
    # tr^2 - 4 det, written as (a - d)^2 + 4|b|^2 so it cannot go negative
    disc = (m[0, 0].real - m[1, 1].real) ** 2 + 4.0 * abs(m[0, 1]) ** 2
    return 0.5 * (tr + math.sqrt(disc))


def lambda_max_batch(R: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of R R^H for a stack of 2 x K blocks."""
    r0, r1 = R[:, 0, :], R[:, 1, :]
    w11 = np.einsum("nk,nk->n", r0, r0.conj()).real
    w22 = np.einsum("nk,nk->n", r1, r1.conj()).real
    w12 = np.einsum("nk,nk->n", r0, r1.conj())
    return 0.5 * (w11 + w22 + np.sqrt((w11 - w22) ** 2 + 4.0 * (w12.real**2 + w12.imag**2)))


def run_batch(
    hypothesis,
    derived: DerivedParams,
    config: SystemConfig,
    trials: int,
    scaling=Scaling.SAMPLE_MEAN,
    seed: int | None = None,
    chunk: int = 50_000,
    workers: int = 1,
) -> TrialBatch:
    """Largest-eigenvalue samples for ``trials`` independent blocks.

    Chunk size and worker count change only how the work is split; the
    samples depend on (seed, trial index) alone.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    hypothesis = Hypothesis(hypothesis)
    scaling = Scaling(scaling)
    seed = config.seed if seed is None else int(seed)
    stream_id = STREAM_H0 if hypothesis is Hypothesis.H0 else STREAM_H1
    stream = CounterStream(seed, stream_id, 2 * config.samples)
    out = np.empty(trials)

    def work(start):
        count = min(chunk, trials - start)
        lam = lambda_max_batch(_draw(hypothesis, derived, config, stream, start, count))
        out[start : start + count] = scaling.from_raw(lam, config.samples)

    starts = range(0, trials, chunk)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, starts))
    else:
        for s in starts:
            work(s)
    return TrialBatch(hypothesis, trials, out, seed, scaling)


def wilson_halfwidth(successes, n: int, z: float = 1.959963984540054):
    """Half-width of the Wilson score interval."""
    successes = np.asarray(successes, dtype=float)
    p = successes / n
    denom = 1.0 + z * z / n
    return z * np.sqrt(p * (1 - p) / n + z * z / (4.0 * n * n)) / denom


def _exceed_counts(samples: np.ndarray, tau_grid: np.ndarray) -> np.ndarray:
    ordered = np.sort(samples)
    return ordered.size - np.searchsorted(ordered, tau_grid, side="right")


def empirical_curve(batch_h0: TrialBatch, batch_h1: TrialBatch, tau_grid) -> DetectionCurve:
    """Empirical P_F / P_D (fraction of samples strictly above each tau)."""
    tau_grid = np.asarray(tau_grid, dtype=float)
    if batch_h0.trials == 0 or batch_h1.trials == 0:
        raise ValueError("empty batch")
    if np.any(np.diff(tau_grid) < 0):
        raise ValueError("tau grid must be sorted ascending")
    if batch_h0.scaling != batch_h1.scaling:
        raise ValueError("batches use different eigenvalue scalings")
    n0, n1 = batch_h0.trials, batch_h1.trials
    k0 = _exceed_counts(batch_h0.lambda_samples, tau_grid)
    k1 = _exceed_counts(batch_h1.lambda_samples, tau_grid)
    return DetectionCurve(
        tau=tau_grid,
        p_f=k0 / n0,
        p_d=k1 / n1,
        source="empirical",
        ci_f=wilson_halfwidth(k0, n0),
        ci_d=wilson_halfwidth(k1, n1),
        metadata={"trials_h0": n0, "trials_h1": n1, "scaling": batch_h0.scaling.value},
    )


_MAGIC = b"EVDL"
_VERSION = 1


def dump_lambda_samples(path, batch: TrialBatch) -> None:
    """Little-endian float64 samples behind a 16-byte header (magic, version, count)."""
    header = struct.pack("<4sIQ", _MAGIC, _VERSION, batch.trials)
    Path(path).write_bytes(header + np.asarray(batch.lambda_samples, dtype="<f8").tobytes())


def load_lambda_samples(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, version, count = struct.unpack("<4sIQ", raw[:16])
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"{path}: not a lambda sample dump (magic={magic!r}, version={version})")
    data = np.frombuffer(raw[16:], dtype="<f8")
    if data.size != count:
        raise ValueError(f"{path}: header says {count} samples, found {data.size}")
    return data.copy()
