"""
Domain types and the deterministic channel / pilot / rate formulas.

All energies are ratios to the unit noise power. A user's "product" is
``energy_budget * gain``; user sets are kept sorted by descending product.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InfeasibleGroupError, ParameterError

__all__ = [
    "UserProfile",
    "UserSet",
    "FrameConfig",
    "ReceiverKind",
    "PilotMatrix",
    "EnergyAllocation",
    "wbe_pilot_matrix",
    "estimation_error_variance",
    "wbe_error_variance",
    "sinr_from_variance",
    "sinr_approx",
    "rate_approx",
]


@dataclass(frozen=True)
class UserProfile:
    id: int
    energy_budget: float
    gain: float

    def __post_init__(self):
        if not (self.energy_budget >= 0 and self.gain >= 0):
            raise ParameterError(
                f"user {self.id}: energy_budget and gain must be >= 0, "
                f"got {self.energy_budget!r}, {self.gain!r}")

    @property
    def product(self) -> float:
        return self.energy_budget * self.gain


class UserSet:
    """Immutable user collection sorted by descending product (ties: ascending id)."""

    __slots__ = ("_users", "_products")

    def __init__(self, users: Iterable[UserProfile]):
        users = sorted(users, key=lambda u: (-u.product, u.id))
        ids = [u.id for u in users]
        if len(set(ids)) != len(ids):
            raise ParameterError("user ids must be unique")
        self._users = tuple(users)
        products = np.array([u.product for u in users], dtype=float)
        products.flags.writeable = False
        self._products = products

    @classmethod
    def from_arrays(cls, energy_budgets, gains) -> "UserSet":
        e = np.broadcast_to(np.asarray(energy_budgets, dtype=float), np.shape(gains))
        return cls(UserProfile(i + 1, float(ei), float(gi))
                   for i, (ei, gi) in enumerate(zip(e, np.asarray(gains, dtype=float))))

    @classmethod
    def from_products(cls, products) -> "UserSet":
        """Users with unit gain whose budgets equal the given products."""
        return cls.from_arrays(np.asarray(products, dtype=float), np.ones(len(products)))

    def __len__(self):
        return len(self._users)

    def __iter__(self):
        return iter(self._users)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return UserSet(self._users[item])
        return self._users[item]

    def __repr__(self):
        return f"UserSet({len(self)} users)"

    @property
    def users(self) -> tuple[UserProfile, ...]:
        return self._users

    @property
    def products(self) -> np.ndarray:
        return self._products

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(u.id for u in self._users)


@dataclass(frozen=True)
class FrameConfig:
    """Frame geometry.

    ``symbol_duration`` may be omitted; it is then derived from
    ``bandwidth_inefficiency = bandwidth * symbol_duration / num_subframes``.
    """

    num_symbols: int
    num_subframes: int
    bandwidth: float
    frame_duration: float
    throughput_target: float
    bandwidth_inefficiency: float = 1.0
    symbol_duration: float | None = None

    def __post_init__(self):
        if self.num_symbols < 2:
            raise ParameterError("num_symbols must be >= 2 so that 1 <= L < N is possible")
        if self.num_subframes < 1:
            raise ParameterError("num_subframes must be positive")
        for name in ("bandwidth", "frame_duration", "throughput_target"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.bandwidth_inefficiency < 1:
            raise ParameterError("bandwidth_inefficiency must be >= 1")
        eta = self.bandwidth_inefficiency
        if self.symbol_duration is None:
            object.__setattr__(self, "symbol_duration",
                               eta * self.num_subframes / self.bandwidth)
        else:
            implied = self.bandwidth * self.symbol_duration / self.num_subframes
            if abs(implied - eta) > 1e-9 * eta:
                raise ParameterError(
                    f"bandwidth * symbol_duration / num_subframes = {implied!r} "
                    f"does not match bandwidth_inefficiency = {eta!r}")

    def check_training_length(self, L: int) -> None:
        if not (1 <= L < self.num_symbols):
            raise ParameterError(f"training length must satisfy 1 <= L < N={self.num_symbols}, got {L}")


class ReceiverKind(enum.Enum):
    ZF = "zf"
    MRC = "mrc"

    @classmethod
    def parse(cls, value) -> "ReceiverKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(f"unknown receiver {value!r}; expected 'zf' or 'mrc'") from None


@dataclass(frozen=True)
class PilotMatrix:
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def gram(self) -> np.ndarray:
        """``Psi Psi^H`` (L x L)."""
        return self.matrix @ self.matrix.conj().T

    @property
    def eigenvalues(self) -> np.ndarray:
        """The ``min(L, K)`` largest eigenvalues of ``Psi^H Psi``, descending."""
        ev = np.linalg.eigvalsh(self.matrix.conj().T @ self.matrix)[::-1]
        return np.clip(ev[:min(self.rows, self.cols)], 0.0, None)


@dataclass(frozen=True)
class EnergyAllocation:
    """Per-symbol energies of one user in the training and data phases."""

    train_energy: float
    data_energy: float

    def __post_init__(self):
        if not (self.train_energy >= 0 and self.data_energy >= 0):
            raise ParameterError("energies must be non-negative")

    def budget_used(self, L: int, N: int) -> float:
        """Total energy per sub-frame, to compare against the user's budget."""
        return L * self.train_energy + (N - L) * self.data_energy

    def satisfies_budget(self, L: int, N: int, energy_budget: float, rtol: float = 1e-9) -> bool:
        return self.budget_used(L, N) <= energy_budget * (1 + rtol) + 1e-300


def wbe_pilot_matrix(L: int, K: int, tone_indices: Sequence[int] | None = None) -> PilotMatrix:
    """DFT-based pilots meeting the Welch bound with equality.

    For ``K <= L`` these are the first K columns of the unitary L-point DFT;
    for ``K > L`` the rows are L distinct tones of the K-point DFT, scaled by
    ``1/sqrt(L)`` so every column has unit norm and ``Psi Psi^H = (K/L) I``.
    """
    if L < 1 or K < 1:
        raise ParameterError("L and K must be positive")
    if K <= L:
        rows = np.arange(L)[:, None]
        cols = np.arange(K)[None, :]
        return PilotMatrix(np.exp(-2j * np.pi * rows * cols / L) / math.sqrt(L))

    if tone_indices is None:
        tones = np.arange(1, L + 1)
    else:
        tones = np.asarray(tone_indices)
        if tones.ndim != 1 or len(tones) != L:
            raise ParameterError(f"tone_indices must have length L={L}")
        if not np.issubdtype(tones.dtype, np.integer):
            raise ParameterError("tone_indices must be integers")
        if tones[0] <= 0 or tones[-1] >= K or np.any(np.diff(tones) <= 0):
            raise ParameterError(f"tone_indices must be strictly increasing within (0, {K})")
    cols = np.arange(K)[None, :]
    return PilotMatrix(np.exp(-2j * np.pi * tones[:, None] * cols / K) / math.sqrt(L))


def estimation_error_variance(L: int, K: int, target_train_energy: float,
                              gram_eigenvalues: Sequence[float]) -> float:
    """Per-entry MMSE channel-estimation error variance for general pilots."""
    if target_train_energy < 0:
        raise ParameterError("target_train_energy must be non-negative")
    lam = np.sort(np.asarray(gram_eigenvalues, dtype=float))[::-1]
    n = min(L, K)
    if len(lam) < n:
        raise ParameterError(f"need at least min(L, K) = {n} eigenvalues")
    if np.any(lam < 0):
        raise ParameterError("eigenvalues must be non-negative")
    if abs(lam.sum() - K) > 1e-6 * max(1.0, K):
        raise ParameterError(f"eigenvalues must sum to K={K} (trace of the Gram matrix)")
    lam = lam[:n]
    value = max(1.0 - L / K, 0.0) + np.sum(1.0 / (1.0 + L * target_train_energy * lam)) / K
    return float(min(max(value, 0.0), 1.0))


def wbe_error_variance(L, K, target_train_energy):
    """Closed form of the error variance under WBE pilots (array friendly)."""
    L = np.asarray(L, dtype=float)
    K = np.asarray(K, dtype=float)
    p = np.asarray(target_train_energy, dtype=float)
    out = (1.0 + np.maximum(K - L, 0.0) * p) / (1.0 + np.maximum(L, K) * p)
    return out if out.ndim else float(out)


def _effective_antennas(receiver: ReceiverKind, M: int, K: int, zf_fallback: bool) -> int:
    if receiver is ReceiverKind.ZF:
        dof = M - K + (1 if zf_fallback else 0)
        if dof <= 0:
            raise InfeasibleGroupError(f"ZF receiver needs M > K (M={M}, K={K})")
        return dof
    if M < 2:
        raise InfeasibleGroupError("MRC receiver needs M >= 2")
    return M - 1


def sinr_from_variance(receiver, M: int, K: int, error_variance: float,
                       received_data: Sequence[float], k: int,
                       zf_fallback: bool = False) -> float:
    """Approximate SINR of member ``k`` given the estimation error variance.

    ``received_data[j]`` is ``p_j^dt * beta_j`` for each of the K members.
    """
    receiver = ReceiverKind.parse(receiver)
    q = np.asarray(received_data, dtype=float)
    if len(q) != K:
        raise ParameterError("received_data must have one entry per member")
    dof = _effective_antennas(receiver, M, K, zf_fallback)
    s2 = error_variance
    total = q.sum()
    if receiver is ReceiverKind.ZF:
        return float((1 - s2) * dof * q[k] / (1 + s2 * total))
    return float((1 - s2) * dof * q[k] / (1 + total - (1 - s2) * q[k]))


def _members_and_allocations(group, allocations):
    members = list(group)
    if isinstance(allocations, Mapping):
        allocs = [allocations[u.id] for u in members]
    else:
        allocs = list(allocations)
    if len(allocs) != len(members):
        raise ParameterError("need one EnergyAllocation per group member")
    return members, allocs


def sinr_approx(receiver, M: int, L: int, group: Iterable[UserProfile],
                allocations, target_train_energy: float, k: int,
                zf_fallback: bool = False) -> float:
    """SINR of user id ``k`` within ``group`` under WBE pilots.

    ``allocations`` is either a mapping from user id or a sequence aligned
    with ``group``. Pilots are channel-inversely power controlled, so only
    ``target_train_energy`` enters the estimation error.
    """
    members, allocs = _members_and_allocations(group, allocations)
    idx = [u.id for u in members]
    if k not in idx:
        raise ParameterError(f"user {k} is not a member of the group")
    K = len(members)
    s2 = wbe_error_variance(L, K, target_train_energy)
    received = [a.data_energy * u.gain for u, a in zip(members, allocs)]
    return sinr_from_variance(receiver, M, K, s2, received, idx.index(k), zf_fallback)


def rate_approx(receiver, M: int, L: int, group: Iterable[UserProfile],
                allocations, target_train_energy: float, k: int,
                zf_fallback: bool = False) -> float:
    """Approximate achievable rate in bits/symbol; 0 for non-members."""
    members, allocs = _members_and_allocations(group, allocations)
    if k not in [u.id for u in members]:
        return 0.0
    return math.log2(1.0 + sinr_approx(receiver, M, L, members, allocs,
                                       target_train_energy, k, zf_fallback))
