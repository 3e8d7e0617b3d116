"""
Large-U behaviour of the ZF scheduler.

As the number of users grows, equal-size contiguous groups become optimal and
the per-user latency converges to
``eta * T_th / W * H(L, K) / (K (1 - L/N))`` with
``H(L, K) = E[1 / log2(1 + h(X; L, K))]`` over the product distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np
from scipy import special

from .energy import optimal_sinr, price_groups
from .errors import DivergenceError, DomainError, NoFeasiblePartitionError, ParameterError
from .model import FrameConfig, ReceiverKind, UserSet
from .scheduler import CandidateGroup, SchedulingPolicy, assemble_policy

__all__ = [
    "ProductDistribution",
    "RegimeReport",
    "h_value",
    "h_limits_check",
    "H_expectation",
    "objective_grid",
    "asymptotic_params",
    "asymptotic_latency",
    "asymptotic_policy",
    "classify_regime",
    "lambert_w0",
    "chi_star",
    "round_half_up",
]

DEFAULT_QUADRATURE_POINTS = 4096


@dataclass(frozen=True)
class ProductDistribution:
    """Distribution of the per-user product ``E_j beta_j``."""

    kind: str
    params: tuple = ()
    samples: tuple = ()

    @classmethod
    def point_mass(cls, x: float) -> "ProductDistribution":
        if x < 0:
            raise ParameterError("point mass location must be non-negative")
        return cls("point_mass", (float(x),))

    @classmethod
    def empirical(cls, samples: Sequence[float]) -> "ProductDistribution":
        s = np.sort(np.asarray(samples, dtype=float))
        if s.size == 0 or np.any(s < 0):
            raise ParameterError("empirical samples must be non-empty and non-negative")
        return cls("empirical", (), tuple(s.tolist()))

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> "ProductDistribution":
        if sigma < 0:
            raise ParameterError("sigma must be non-negative")
        return cls("lognormal", (float(mu), float(sigma)))

    @property
    def mean(self) -> float:
        if self.kind == "point_mass":
            return self.params[0]
        if self.kind == "empirical":
            return math.fsum(self.samples) / len(self.samples)
        mu, sigma = self.params
        return math.exp(mu + sigma * sigma / 2)

    @property
    def variance(self) -> float:
        if self.kind == "point_mass":
            return 0.0
        if self.kind == "empirical":
            s = np.asarray(self.samples)
            return float(np.mean((s - s.mean()) ** 2))
        mu, sigma = self.params
        return (math.exp(sigma * sigma) - 1) * math.exp(2 * mu + sigma * sigma)

    def quantile(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "point_mass":
            return np.full(t.shape, self.params[0])
        if self.kind == "empirical":
            s = np.asarray(self.samples)
            idx = np.clip(np.ceil(t * s.size).astype(int) - 1, 0, s.size - 1)
            return s[idx]
        mu, sigma = self.params
        z = np.array([NormalDist().inv_cdf(v) for v in t.ravel()]).reshape(t.shape)
        return np.exp(mu + sigma * z)

    def nodes(self, quadrature_points: int = DEFAULT_QUADRATURE_POINTS) -> np.ndarray:
        """Equal-weight nodes for expectations: exact for point mass and empirical."""
        if self.kind == "point_mass":
            return np.array(self.params)
        if self.kind == "empirical":
            return np.asarray(self.samples)
        if quadrature_points < 1:
            raise ParameterError("quadrature_points must be positive")
        t = (np.arange(quadrature_points) + 0.5) / quadrature_points
        return self.quantile(t)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "point_mass":
            return np.full(n, self.params[0])
        if self.kind == "empirical":
            return rng.choice(np.asarray(self.samples), size=n)
        mu, sigma = self.params
        return rng.lognormal(mu, sigma, size=n)


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    L_star: int
    K_star: int
    latency_scaling: str
    orthogonal_only_scaling: str
    heuristic: bool = True


def _h_array(x, L, K, M, N):
    x = np.asarray(x, dtype=float)
    L = np.asarray(L, dtype=float)
    K = np.asarray(K, dtype=float)
    x, L, K = np.broadcast_arrays(x, L, K)
    out = np.zeros(x.shape)
    NL = N - L
    with np.errstate(divide="ignore", invalid="ignore"):
        # 1 - sqrt(P) for P = (s x + 1)(t x + 1), written as -(s + t + s t x) x / (1 + sqrt(P))
        # so that no digits are lost when x is small
        over = K > L
        s1, t1 = K / NL, K / L
        P1 = (s1 * x + 1) * (t1 * x + 1)
        one_minus1 = -(s1 + t1 + s1 * t1 * x) * x / (1 + np.sqrt(P1))
        A = K * N * x + 2 * L * NL * one_minus1
        v1 = (L * (M - K) / K) * A / ((K - L) * A + K * (N - 2 * L) ** 2)

        s2 = K / NL
        P2 = (s2 * x + 1) * (x + 1)
        one_minus2 = -(s2 + 1 + s2 * x) * x / (1 + np.sqrt(P2))
        v2 = (M - K) * ((NL + K) * x + 2 * NL * one_minus2) / (NL - K) ** 2

        v3 = (M - K) / (4 * K) * x * x / (x + 1)
    balanced = (~over) & (N == L + K)
    out = np.where(over, v1, np.where(balanced, v3, v2))
    # the K > L form is 0/0 on the line N = 2L; evaluate the optimum directly there
    half = over & (N == 2 * L)
    if np.any(half):
        _, g = optimal_sinr("zf", M, N, L[half], K[half], x[half])
        out = out.copy()
        out[half] = g
    return np.where(x > 0, out, 0.0)


def h_value(x: float, L: int, K: int, M: int, N: int):
    """SINR of a K-user group whose smallest product is ``x`` at its optimal energy split."""
    if not (1 <= L < N) or K < 1 or M <= K:
        raise ParameterError("need 1 <= L < N, K >= 1 and M > K")
    out = _h_array(x, L, K, M, N)
    return out if np.ndim(out) else float(out)


def h_limits_check(L: int, K: int, M: int, N: int) -> tuple[float, float]:
    """Asymptotes of ``h``: (large-x plateau or slope, small-x quadratic coefficient).

    For ``K > L`` the first value is the plateau ``h(inf)``; otherwise it is the
    slope of ``h(x) / x`` as ``x -> inf``.
    """
    if not (1 <= L < N) or K < 1 or M <= K:
        raise ParameterError("need 1 <= L < N, K >= 1 and M > K")
    if K > L:
        large = (M - K) * L / (K * (K - L))
    else:
        large = (M - K) / (N - L + K + 2 * math.sqrt(K * (N - L)))
    small = (M - K) / (4 * (N - L))
    return large, small


def _inverse_rate_mean(nodes, L, K, M, N):
    """Mean of 1 / log2(1 + h) over nodes; broadcasts L, K against a trailing node axis."""
    h = _h_array(nodes, np.asarray(L)[..., None], np.asarray(K)[..., None], M, N)
    with np.errstate(divide="ignore"):
        inv = 1.0 / np.log2(1.0 + h)
    return inv.mean(axis=-1)


def H_expectation(L: int, K: int, dist: ProductDistribution, M: int, N: int,
                  quadrature_points: int = DEFAULT_QUADRATURE_POINTS) -> float:
    """Expected inverse rate of a K-user group whose smallest product follows ``dist``."""
    if not (1 <= L < N) or K < 1 or M <= K:
        raise ParameterError("need 1 <= L < N, 1 <= K < M")
    nodes = dist.nodes(quadrature_points)
    if np.any(nodes <= 0):
        raise DivergenceError("the distribution puts mass at zero; the expectation diverges")
    value = float(_inverse_rate_mean(nodes, L, K, M, N))
    if not math.isfinite(value):
        raise DivergenceError("inverse rate expectation is not finite")
    return value


def objective_grid(dist: ProductDistribution, M: int, N: int,
                   quadrature_points: int = DEFAULT_QUADRATURE_POINTS,
                   max_group_size: int | None = None) -> np.ndarray:
    """``H(L, K) / (K (1 - L/N))`` on the grid ``L = 1..N-1`` (rows), ``K = 1..Kmax`` (cols)."""
    nodes = dist.nodes(quadrature_points)
    if np.any(nodes <= 0):
        raise DivergenceError("the distribution puts mass at zero; the expectation diverges")
    kmax = M - 1 if max_group_size is None else min(max_group_size, M - 1)
    if kmax < 1:
        raise ParameterError("ZF needs M >= 2")
    Ks = np.arange(1, kmax + 1)
    grid = np.empty((N - 1, kmax))
    # chunk the K axis so the (K, nodes) block stays small
    step = max(1, 2_000_000 // max(1, nodes.size))
    for L in range(1, N):
        for s in range(0, kmax, step):
            k = Ks[s:s + step]
            grid[L - 1, s:s + step] = _inverse_rate_mean(nodes, L, k, M, N) / (k * (1 - L / N))
    return grid


def asymptotic_params(dist: ProductDistribution, M: int, N: int,
                      quadrature_points: int = DEFAULT_QUADRATURE_POINTS,
                      max_group_size: int | None = None) -> tuple[int, int]:
    """Asymptotically optimal ``(L*, K*)`` by exhaustive search; ties go to the smallest pair."""
    grid = objective_grid(dist, M, N, quadrature_points, max_group_size)
    if not np.isfinite(grid).any():
        raise DivergenceError("objective is infinite everywhere")
    flat = int(np.argmin(grid))  # row-major argmin = lexicographic (L, K) tie-break
    L, K = np.unravel_index(flat, grid.shape)
    return int(L) + 1, int(K) + 1


def asymptotic_latency(dist: ProductDistribution, M: int, N: int, config: FrameConfig,
                       params: tuple[int, int] | None = None,
                       quadrature_points: int = DEFAULT_QUADRATURE_POINTS) -> float:
    """Limiting latency per user, in seconds."""
    L, K = params if params is not None else asymptotic_params(dist, M, N, quadrature_points)
    H = H_expectation(L, K, dist, M, N, quadrature_points)
    eta = config.bandwidth_inefficiency
    return eta * config.throughput_target / config.bandwidth * H / (K * (1 - L / N))


def asymptotic_policy(users: UserSet, receiver, config: FrameConfig, M: int,
                      L_star: int, K_star: int, zf_fallback: bool = False) -> SchedulingPolicy:
    """Equal-size contiguous blocks of ``K_star`` users (the last may be shorter)."""
    if not isinstance(users, UserSet):
        users = UserSet(users)
    config.check_training_length(L_star)
    if K_star < 1:
        raise ParameterError("K_star must be positive")
    U = len(users)
    firsts = np.arange(0, U, K_star)
    lasts = np.minimum(firsts + K_star, U) - 1
    u, rate = price_groups(receiver, M, config.num_symbols, L_star, lasts - firsts + 1,
                           users.products[lasts], zf_fallback)
    if np.any(rate <= 0):
        raise NoFeasiblePartitionError("some block has zero rate under this receiver")
    groups = [CandidateGroup(int(f), int(l), float(r), float(x))
              for f, l, r, x in zip(firsts, lasts, rate, u)]
    return assemble_policy(users, receiver, config, M, L_star, groups, zf_fallback)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


_SCALING = {
    "i": "Theta(T_th*U/(W*log(rho)))",
    "ii": "Theta(T_th*U/(W*sqrt(M)))",
    "iii_iv": "Theta(T_th*U/(W*M^2*rho^2))",
}


def classify_regime(rho: float, M: int, N: int = 100) -> RegimeReport:
    """Finite-instance reading of the four asymptotic regimes.

    Heuristic: the regimes are defined only in the limit. Here regime i is
    ``rho > 1 and M < ln(rho)^2``, regime ii is ``rho > 1`` otherwise, and
    regimes iii/iv (``rho <= 1``) share one report.
    """
    if not rho > 0:
        raise ParameterError("rho must be positive")
    if M < 2:
        raise ParameterError("M must be >= 2")
    if rho > 1 and M < math.log(rho) ** 2:
        regime, L, K = "i", round_half_up(N / 2), round_half_up(N / 2)
    elif rho > 1:
        regime, L, K = "ii", round_half_up(N / 3), round_half_up(chi_star() * math.sqrt(M * N))
    else:
        # any training length is asymptotically optimal here; report the shortest
        regime, L, K = "iii_iv", 1, round_half_up(M / 2)
    if rho > 1 and M < rho:
        ortho = "Theta(T_th*U/(W*log(rho)))"
    elif rho > 1:
        ortho = "Theta(T_th*U/(W*log(M)))"
    else:
        ortho = "Theta(T_th*U/(W*M*rho^2))"
    return RegimeReport(regime, L, K, _SCALING[regime], ortho)


_INV_E = math.exp(-1.0)


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function for real ``x >= -1/e``."""
    x = float(x)
    if math.isnan(x) or x < -_INV_E - 1e-15:
        raise DomainError(f"lambert_w0 is real only for x >= -1/e, got {x!r}")
    if x <= -_INV_E:
        return -1.0
    return float(special.lambertw(x, 0).real)


def chi_star() -> float:
    """Constant setting the optimal group size in the high-energy, many-antenna regime."""
    w = lambert_w0(-2.0 * math.exp(-2.0))
    return math.sqrt((2.0 / (w + 2.0) - 1.0) / 3.0)
