"""
Link-level simulation of one scheduling group.

Each realization draws the small-scale fading ``H`` (M x K) and the training
noise (M x L), forms the MMSE channel estimate from WBE pilots, builds the ZF
or MRC receiver from the estimate and evaluates the exact per-user SINR. The
empirical mean rate is compared with the closed-form approximation.

Random numbers come from a Philox counter generator. Realization ``r`` always
reads the same counter block, so results do not depend on how realizations
are chunked or ordered.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvariantViolation, ParameterError
from .model import (EnergyAllocation, PilotMatrix, ReceiverKind, estimation_error_variance,
                    sinr_from_variance, wbe_pilot_matrix)

__all__ = [
    "RealizationBatch",
    "RateStats",
    "RateSamples",
    "AccuracyRow",
    "draw_channel",
    "draw_realizations",
    "mmse_estimate",
    "exact_rate_samples",
    "rate_stats",
    "accuracy_report",
    "SINGULAR_RTOL",
]

SINGULAR_RTOL = 1e-12
DEFAULT_CHUNK = 1024


@dataclass(frozen=True)
class RealizationBatch:
    M: int
    K: int
    L: int
    N: int
    num_realizations: int
    seed: int = 0
    receiver: ReceiverKind = ReceiverKind.ZF
    stream: int = 0

    def __post_init__(self):
        object.__setattr__(self, "receiver", ReceiverKind.parse(self.receiver))
        if self.num_realizations < 1:
            raise ParameterError("num_realizations must be >= 1")
        if self.M < 1 or self.K < 1:
            raise ParameterError("M and K must be positive")
        if not (1 <= self.L < self.N):
            raise ParameterError("need 1 <= L < N")
        if self.receiver is ReceiverKind.ZF and self.M < self.K:
            raise ParameterError("ZF needs M >= K")

    @property
    def uniforms_per_realization(self) -> int:
        n = 2 * self.M * (self.K + self.L)
        return n + (-n) % 4

    def generator(self, first: int = 0) -> np.random.Generator:
        """Generator positioned at the start of realization ``first``."""
        key = np.random.SeedSequence([int(self.seed), int(self.stream)]).generate_state(2, np.uint64)
        bg = np.random.Philox(key=key)
        # one Philox counter step yields four 64-bit outputs
        bg.advance(first * self.uniforms_per_realization // 4)
        return np.random.Generator(bg)


@dataclass(frozen=True)
class RateStats:
    empirical_mean: float
    empirical_std: float
    approx_rate: float
    num_samples: int = 0
    skipped: int = 0

    @property
    def abs_gap(self) -> float:
        return abs(self.empirical_mean - self.approx_rate)


@dataclass(frozen=True)
class RateSamples:
    rates: np.ndarray
    skipped: int


@dataclass(frozen=True)
class AccuracyRow:
    M: int
    E_dB: float
    receiver: str
    stats: RateStats


def _complex_gaussian(u1, u2):
    # Box-Muller with u1 in (0, 1] so the log is finite
    return np.sqrt(-np.log1p(-u1)) * np.exp(2j * np.pi * u2)


def draw_realizations(batch: RealizationBatch, start: int = 0, stop: int | None = None):
    """Fading ``(n, M, K)`` and training noise ``(n, M, L)`` for realizations ``start..stop-1``."""
    stop = batch.num_realizations if stop is None else stop
    if not (0 <= start <= stop):
        raise ParameterError("need 0 <= start <= stop")
    n = stop - start
    u = batch.generator(start).random((n, batch.uniforms_per_realization))
    M, K, L = batch.M, batch.K, batch.L
    h = _complex_gaussian(u[:, 0:2 * M * K:2], u[:, 1:2 * M * K:2]).reshape(n, M, K)
    e = 2 * M * (K + L)
    v = _complex_gaussian(u[:, 2 * M * K:e:2], u[:, 2 * M * K + 1:e:2]).reshape(n, M, L)
    return h, v


def draw_channel(batch: RealizationBatch, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian fading, ``(n, M, K)``."""
    return draw_realizations(batch, start, stop)[0]


def mmse_estimate(received: np.ndarray, pilots: PilotMatrix, target_train_energy: float,
                  channel: np.ndarray | None = None):
    """MMSE estimate of the fading from the training block.

    ``received`` is ``(..., M, L)``. Returns ``(estimate, error)`` where
    ``error = estimate - channel`` (``None`` if no channel is given).
    """
    if target_train_energy < 0:
        raise ParameterError("target_train_energy must be non-negative")
    psi = pilots.matrix
    Lp = psi.shape[0] * target_train_energy
    reg = np.eye(psi.shape[0]) + Lp * pilots.gram
    ev = np.linalg.eigvalsh(reg)
    if ev[0] <= SINGULAR_RTOL * ev[-1]:
        raise InvariantViolation("regularised pilot Gram matrix is singular")
    filt = math.sqrt(Lp) * np.linalg.solve(reg, psi)
    estimate = np.asarray(received) @ filt
    error = None if channel is None else estimate - channel
    return estimate, error


def _training_block(h, v, pilots: PilotMatrix, p_bar: float):
    Lp = pilots.rows * p_bar
    return math.sqrt(Lp) * h @ pilots.matrix.conj().T + v


def _exact_sinr(h_hat, q, s2, receiver: ReceiverKind):
    """Per-realization SINR of every member; rows with a singular ZF Gram are NaN."""
    n, M, K = h_hat.shape
    hh = np.conj(np.swapaxes(h_hat, 1, 2))
    bad = np.zeros(n, dtype=bool)
    if receiver is ReceiverKind.ZF:
        gram = hh @ h_hat
        ev = np.linalg.eigvalsh(gram)
        bad = ev[:, 0] <= SINGULAR_RTOL * ev[:, -1]
        gram[bad] = np.eye(K)
        fh = np.linalg.solve(gram, hh)  # rows are f_k^H
    else:
        fh = hh
    cross = np.abs(fh @ h_hat) ** 2  # |f_k^H h_j|^2
    fnorm = np.sum(np.abs(fh) ** 2, axis=2)
    signal = np.diagonal(cross, axis1=1, axis2=2) * q
    interference = cross @ q - signal
    sinr = signal / (fnorm * (1.0 + s2 * q.sum()) + interference)
    sinr[bad] = np.nan
    return sinr


def exact_rate_samples(batch: RealizationBatch, gains: Sequence[float],
                       allocations: Sequence[EnergyAllocation],
                       pilots: PilotMatrix | None = None,
                       chunk: int = DEFAULT_CHUNK) -> RateSamples:
    """Exact per-realization rates ``(num_realizations, K)`` of every group member.

    Training must be channel-inverse, i.e. ``train_energy * gain`` equal for
    all members. Realizations whose ZF Gram matrix is numerically singular are
    dropped and counted.
    """
    gains = np.asarray(gains, dtype=float)
    if len(gains) != batch.K or len(allocations) != batch.K:
        raise ParameterError("need one gain and one allocation per member")
    received_train = np.array([a.train_energy for a in allocations]) * gains
    p_bar = float(received_train[0])
    if not np.allclose(received_train, p_bar, rtol=1e-9, atol=0.0):
        raise ParameterError("training energies must be channel-inverse (equal received energy)")
    q = np.array([a.data_energy for a in allocations]) * gains
    pilots = wbe_pilot_matrix(batch.L, batch.K) if pilots is None else pilots
    if pilots.matrix.shape != (batch.L, batch.K):
        raise ParameterError("pilot matrix must be L x K")
    s2 = estimation_error_variance(batch.L, batch.K, p_bar, pilots.eigenvalues)
    if chunk < 1:
        raise ParameterError("chunk must be positive")
    out = []
    for start in range(0, batch.num_realizations, chunk):
        stop = min(start + chunk, batch.num_realizations)
        h, v = draw_realizations(batch, start, stop)
        h_hat, _ = mmse_estimate(_training_block(h, v, pilots, p_bar), pilots, p_bar)
        out.append(_exact_sinr(h_hat, q, s2, batch.receiver))
    sinr = np.concatenate(out, axis=0)
    keep = ~np.isnan(sinr).any(axis=1)
    return RateSamples(np.log2(1.0 + sinr[keep]), int((~keep).sum()))


def rate_stats(samples: RateSamples, approx_rate: float) -> RateStats:
    """Mean and standard deviation with exactly-rounded sums (order independent)."""
    x = samples.rates.ravel()
    if x.size == 0:
        raise ParameterError("no usable realizations")
    mean = math.fsum(x) / x.size
    var = math.fsum((x - mean) ** 2) / x.size
    return RateStats(mean, math.sqrt(var), float(approx_rate), int(x.size), samples.skipped)


def accuracy_report(M_values: Sequence[int], E_dB_values: Sequence[float],
                    receivers: Sequence = ("zf", "mrc"), num_realizations: int = 10_000,
                    seed: int = 0, N: int = 100, L: int = 10, K: int = 5,
                    chunk: int = DEFAULT_CHUNK) -> list[AccuracyRow]:
    """Exact versus approximate rate over a grid, with unit gains.

    Each user splits its budget evenly between phases: ``E / (2L)`` per pilot
    symbol and ``E / (2(N - L))`` per data symbol. All members are statistically
    identical, so their samples are pooled.
    """
    if not len(M_values) or not len(E_dB_values) or not len(receivers):
        raise ParameterError("sweep lists must be non-empty")
    if num_realizations < 1:
        raise ParameterError("num_realizations must be >= 1")
    rows = []
    for receiver in receivers:
        receiver = ReceiverKind.parse(receiver)
        for M in M_values:
            for E_dB in E_dB_values:
                E = 10.0 ** (E_dB / 10.0)
                alloc = EnergyAllocation(E / (2 * L), E / (2 * (N - L)))
                # stream keyed by the grid point so reordering the sweep changes nothing
                stream = zlib.crc32(f"{receiver.value}:{M}:{float(E_dB)!r}".encode())
                batch = RealizationBatch(M, K, L, N, num_realizations, seed, receiver, stream)
                samples = exact_rate_samples(batch, np.ones(K), [alloc] * K, chunk=chunk)
                pilots = wbe_pilot_matrix(L, K)
                s2 = estimation_error_variance(L, K, alloc.train_energy, pilots.eigenvalues)
                g = sinr_from_variance(receiver, M, K, s2, [alloc.data_energy] * K, 0)
                rows.append(AccuracyRow(M, float(E_dB), receiver.value,
                                        rate_stats(samples, math.log2(1.0 + g))))
    return rows
