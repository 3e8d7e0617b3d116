"""
Optimal split of a group's energy between training and data symbols.

With every member receiving the same data energy, the common rate of a
K-user group is a one-dimensional function of the common received training
energy ``x``::

    rate(x) = log2(1 + (a - b x) x / (c + d x - e x^2)),   0 <= x <= a / b

whose coefficients depend only on the receiver, (M, N, K, L) and the
smallest product ``E_K beta_K`` in the group. The maximiser has a closed form.

The ``*_arrays`` helpers broadcast over K, L and the minimum product; the
scalar API wraps them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InfeasibleGroupError, ParameterError
from .model import EnergyAllocation, ReceiverKind, UserProfile, UserSet

__all__ = [
    "CoefficientSet",
    "GroupRateResult",
    "coefficients",
    "optimal_training_energy",
    "common_rate_curve",
    "group_rate",
    "coefficient_arrays",
    "price_groups",
    "optimal_sinr",
    "BRANCH_RTOL",
]

BRANCH_RTOL = 1e-12


@dataclass(frozen=True)
class CoefficientSet:
    a: float
    b: float
    c: float
    d: float
    e: float

    @property
    def upper(self) -> float:
        """Largest feasible training energy, ``a / b``."""
        return self.a / self.b


@dataclass(frozen=True)
class GroupRateResult:
    u_star: float
    common_rate: float
    allocations: tuple[EnergyAllocation, ...]
    coefficients: CoefficientSet | None = None

    @property
    def sinr(self) -> float:
        return 2.0 ** self.common_rate - 1.0


def coefficient_arrays(receiver, M: int, N: int, K, L, min_product, zf_fallback: bool = False):
    """Vectorised coefficients; returns ``(a, b, c, d, e)`` broadcast arrays.

    No feasibility checks; ZF entries with ``M <= K`` come out with ``a = b = 0``
    or negative and must be masked by the caller.
    """
    receiver = ReceiverKind.parse(receiver)
    K = np.asarray(K, dtype=float)
    L = np.asarray(L, dtype=float)
    x = np.asarray(min_product, dtype=float)
    if receiver is ReceiverKind.ZF:
        dof = M - K + (1.0 if zf_fallback else 0.0)
    else:
        dof = (M - 1.0) + 0.0 * K
    a = L * dof * x
    b = L * L * dof
    c = K * x + N - L
    if receiver is ReceiverKind.ZF:
        d = (N - L - K) * L + np.maximum(K - L, 0.0) * c
        e = K * L * np.maximum(K - L, 0.0)
    else:
        big = np.maximum(L, K)
        d = big * c - K * L - L * x
        e = L * (K * big - L)
    return np.broadcast_arrays(a, b, c, d, e)


def coefficients(receiver, M: int, N: int, K: int, L: int, min_product: float,
                 zf_fallback: bool = False) -> CoefficientSet:
    receiver = ReceiverKind.parse(receiver)
    if not (1 <= L < N):
        raise ParameterError(f"need 1 <= L < N, got L={L}, N={N}")
    if K < 1:
        raise ParameterError("group size must be >= 1")
    if min_product < 0:
        raise ParameterError("min_product must be non-negative")
    if receiver is ReceiverKind.ZF and M - K + (1 if zf_fallback else 0) <= 0:
        raise InfeasibleGroupError(f"ZF receiver needs M > K (M={M}, K={K})")
    if receiver is ReceiverKind.MRC and M < 2:
        raise InfeasibleGroupError("MRC receiver needs M >= 2")
    a, b, c, d, e = (float(v) for v in coefficient_arrays(receiver, M, N, K, L, min_product, zf_fallback))
    return CoefficientSet(a, b, c, d, e)


def _u_star_arrays(a, b, c, d, e):
    # Rationalised form of the stationary point; equals a / (2b) when bd == ae.
    disc = b * d - a * e
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(disc) <= BRANCH_RTOL * np.abs(b * d), 0.0, a * disc / (b * b * c))
        u = a / (b * (1.0 + np.sqrt(1.0 + t)))
    return np.where(a > 0, u, 0.0)


def optimal_training_energy(coeffs: CoefficientSet) -> float:
    """Common received training energy maximising the group's rate."""
    a, b, c, d, e = coeffs.a, coeffs.b, coeffs.c, coeffs.d, coeffs.e
    if a <= 0:
        return 0.0
    disc = b * d - a * e
    if abs(disc) <= BRANCH_RTOL * abs(b * d):
        return a / (2 * b)
    u = (b * c / disc) * (math.sqrt(1 + (a / b) * disc / (b * c)) - 1)
    # the literal form loses digits when the square root is close to 1
    if abs(a * disc / (b * b * c)) < 1e-4:
        u = a / (b * (1 + math.sqrt(1 + a * disc / (b * b * c))))
    return min(max(u, 0.0), a / b)


def _sinr_curve(x, a, b, c, d, e):
    return (a - b * x) * x / (c + d * x - e * x * x)


def common_rate_curve(x, coeffs: CoefficientSet):
    """Common rate (bits/symbol) as a function of the target training energy."""
    x = np.asarray(x, dtype=float)
    g = _sinr_curve(x, coeffs.a, coeffs.b, coeffs.c, coeffs.d, coeffs.e)
    out = np.log2(1.0 + np.maximum(g, 0.0))
    return out if out.ndim else float(out)


def optimal_sinr(receiver, M: int, N: int, L, sizes, min_products, zf_fallback: bool = False):
    """Optimal training energy and the common SINR it achieves, broadcast over groups.

    Groups the receiver cannot serve (ZF with K >= M) or with zero minimum
    product get SINR 0. Returns ``(u_star, sinr)``.
    """
    receiver = ReceiverKind.parse(receiver)
    a, b, c, d, e = coefficient_arrays(receiver, M, N, sizes, L, min_products, zf_fallback)
    usable = (b > 0) & (a > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(usable, _u_star_arrays(a, b, c, d, e), 0.0)
        g = np.where(usable, _sinr_curve(u, a, b, c, d, e), 0.0)
    return u, np.maximum(g, 0.0)


def price_groups(receiver, M: int, N: int, L, sizes, min_products, zf_fallback: bool = False):
    """Optimal training energy and common rate for many groups at once.

    Broadcasts over ``L``, ``sizes`` and ``min_products``; see :func:`optimal_sinr`.
    Returns ``(u_star, rate)``.
    """
    u, g = optimal_sinr(receiver, M, N, L, sizes, min_products, zf_fallback)
    return u, np.log1p(g) / np.log(2.0)


def group_rate(receiver, M: int, N: int, L: int, group: Iterable[UserProfile],
               zf_fallback: bool = False) -> GroupRateResult:
    """Common rate and per-member energies for one scheduling group."""
    members = list(group.users if isinstance(group, UserSet) else group)
    if not members:
        raise ParameterError("group must be non-empty")
    K = len(members)
    x = min(u.product for u in members)
    coeffs = coefficients(receiver, M, N, K, L, x, zf_fallback)
    if x <= 0:
        zero = EnergyAllocation(0.0, 0.0)
        return GroupRateResult(0.0, 0.0, tuple(zero for _ in members), coeffs)
    u = optimal_training_energy(coeffs)
    rate = float(common_rate_curve(u, coeffs))
    data_received = (x - L * u) / (N - L)
    allocs = tuple(EnergyAllocation(u / m.gain, data_received / m.gain) for m in members)
    return GroupRateResult(u, rate, allocs, coeffs)
