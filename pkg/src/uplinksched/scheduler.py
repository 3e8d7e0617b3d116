"""
Latency-optimal static scheduling.

For each training length L the users (sorted by product) are covered by
contiguous groups; each candidate group is priced by its optimal common rate
and the exact cover minimising the sum of inverse rates is found either by the
LP relaxation of the set-partitioning program (integral because every column
of the cover matrix has consecutive ones) or by a shortest path over the
interval DAG. The best L maximises the common spectral efficiency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize, sparse

from .energy import group_rate, price_groups
from .errors import InvariantViolation, NoFeasiblePartitionError, ParameterError
from .model import EnergyAllocation, FrameConfig, ReceiverKind, UserSet

__all__ = [
    "CandidateGroup",
    "SchedulingPolicy",
    "enumerate_candidates",
    "solve_partition_lp",
    "solve_partition_dp",
    "partition_objective",
    "count_reduced_search_space",
    "candidate_count",
    "policy_metrics",
    "assemble_policy",
    "policy_for_length",
    "optimize_policy",
    "sweep_training_length",
    "timetable",
    "INTEGRALITY_TOL",
]

INTEGRALITY_TOL = 1e-6


@dataclass(frozen=True)
class CandidateGroup:
    """Contiguous block ``[first, last]`` (0-based, inclusive) of the sorted users."""

    first: int
    last: int
    rate: float
    u_star: float = float("nan")

    def __post_init__(self):
        if self.first < 0 or self.last < self.first:
            raise ParameterError(f"invalid interval [{self.first}, {self.last}]")
        if self.rate < 0:
            raise ParameterError("rate must be non-negative")

    @property
    def size(self) -> int:
        return self.last - self.first + 1

    @property
    def inv_rate(self) -> float:
        return 1.0 / self.rate if self.rate > 0 else math.inf

    @property
    def interval(self) -> tuple[int, int]:
        return (self.first, self.last)


@dataclass(frozen=True)
class SchedulingPolicy:
    training_length: int
    groups: tuple[CandidateGroup, ...]
    portions: tuple[float, ...]
    spectral_efficiency: float
    latency_frames: int
    latency_seconds: float
    approx_latency_seconds: float
    members: tuple[tuple[int, ...], ...] = ()
    allocations: Mapping[int, EnergyAllocation] = field(default_factory=dict)

    @property
    def group_sizes(self) -> list[int]:
        return [g.size for g in self.groups]

    @property
    def rates(self) -> tuple[float, ...]:
        return tuple(g.rate for g in self.groups)


def candidate_count(U: int, M: int) -> int:
    m = min(M, U)
    return m * (2 * U - m + 1) // 2


def _interval_arrays(U: int, max_size: int):
    sizes = np.concatenate([np.full(U - k + 1, k) for k in range(1, max_size + 1)])
    firsts = np.concatenate([np.arange(U - k + 1) for k in range(1, max_size + 1)])
    return firsts, firsts + sizes - 1, sizes


def _price_intervals(users: UserSet, receiver, M, N, L, zf_fallback):
    U = len(users)
    firsts, lasts, sizes = _interval_arrays(U, min(M, U))
    u, rate = price_groups(receiver, M, N, L, sizes, users.products[lasts], zf_fallback)
    return firsts, lasts, u, rate


def enumerate_candidates(users: UserSet, receiver, M: int, N: int, L: int,
                         zf_fallback: bool = False) -> list[CandidateGroup]:
    """All contiguous groups of size ``1..min(M, U)``, ordered by size then start."""
    if not isinstance(users, UserSet):
        users = UserSet(users)
    if not (1 <= L < N):
        raise ParameterError(f"need 1 <= L < N, got L={L}, N={N}")
    firsts, lasts, u, rate = _price_intervals(users, receiver, M, N, L, zf_fallback)
    return [CandidateGroup(int(f), int(l), float(r), float(x))
            for f, l, r, x in zip(firsts, lasts, rate, u)]


def _as_arrays(candidates: Sequence[CandidateGroup]):
    firsts = np.array([c.first for c in candidates], dtype=int)
    lasts = np.array([c.last for c in candidates], dtype=int)
    costs = np.array([c.inv_rate for c in candidates], dtype=float)
    return firsts, lasts, costs


def _check_cover(firsts, lasts, usable, U):
    if firsts.size and lasts[usable].max(initial=-1) >= U:
        raise ParameterError("candidate interval exceeds the number of users")
    covered = np.zeros(U + 1, dtype=int)
    np.add.at(covered, firsts[usable], 1)
    np.add.at(covered, lasts[usable] + 1, -1)
    missing = np.flatnonzero(np.cumsum(covered)[:U] == 0)
    if missing.size:
        raise NoFeasiblePartitionError(
            f"user position {int(missing[0])} is not covered by any positive-rate group")


def _lp_select(firsts, lasts, costs, U):
    usable = np.isfinite(costs)
    _check_cover(firsts, lasts, usable, U)
    cols = np.flatnonzero(usable)
    f, l = firsts[cols], lasts[cols]
    lengths = l - f + 1
    rows = np.concatenate([np.arange(a, b + 1) for a, b in zip(f, l)])
    colidx = np.repeat(np.arange(cols.size), lengths)
    S = sparse.csc_matrix((np.ones(rows.size), (rows, colidx)), shape=(U, cols.size))
    res = optimize.linprog(costs[cols], A_eq=S, b_eq=np.ones(U), bounds=(0, 1),
                           method="highs-ds")
    if res.status == 2:
        raise NoFeasiblePartitionError("exact cover LP is infeasible")
    if res.status != 0:
        raise InvariantViolation(f"LP solver failed: {res.message}")
    x = res.x
    frac = np.abs(x - np.round(x))
    if frac.max(initial=0.0) > INTEGRALITY_TOL:
        raise InvariantViolation(
            f"LP vertex is not integral (max deviation {frac.max():.3g}); "
            "the cover matrix should be totally unimodular")
    return sorted(cols[np.round(x) == 1].tolist(), key=lambda i: firsts[i])


def _dp_select(firsts, lasts, costs, U):
    usable = np.isfinite(costs)
    _check_cover(firsts, lasts, usable, U)
    idx = np.flatnonzero(usable)
    sizes = lasts[idx] - firsts[idx] + 1
    kmax = int(sizes.max())
    # table[k-1, j] = (cost, index) of the group of size k ending at position j
    table = np.full((kmax, U), np.inf)
    which = np.full((kmax, U), -1, dtype=int)
    for i, k in zip(idx[::-1], sizes[::-1]):
        # reversed so the first listed duplicate wins
        table[k - 1, lasts[i]] = costs[i]
        which[k - 1, lasts[i]] = i
    dist = np.full(U + 1, np.inf)
    dist[0] = 0.0
    back = np.zeros(U + 1, dtype=int)
    ks = np.arange(1, kmax + 1)
    for j in range(1, U + 1):
        kk = ks[ks <= j]
        total = dist[j - kk] + table[kk - 1, j - 1]
        best = int(np.argmin(total))
        dist[j] = total[best]
        back[j] = kk[best]
    if not np.isfinite(dist[U]):
        raise NoFeasiblePartitionError("no exact cover by positive-rate groups")
    chosen = []
    j = U
    while j > 0:
        k = back[j]
        chosen.append(int(which[k - 1, j - 1]))
        j -= k
    return chosen[::-1]


def solve_partition_lp(candidates: Sequence[CandidateGroup], U: int) -> list[int]:
    """Indices of the selected candidates, via the LP relaxation of the exact cover.

    Raises :class:`InvariantViolation` if the LP vertex is not binary.
    """
    return _lp_select(*_as_arrays(candidates), U)


def solve_partition_dp(candidates: Sequence[CandidateGroup], U: int) -> list[int]:
    """Indices of the selected candidates, via shortest path over nodes ``0..U``."""
    return _dp_select(*_as_arrays(candidates), U)


def partition_objective(candidates: Sequence[CandidateGroup], selected: Sequence[int]) -> float:
    return math.fsum(candidates[i].inv_rate for i in selected)


def count_reduced_search_space(U: int, M: int) -> int:
    """Number of ordered splits of U sorted users into contiguous parts of size <= M."""
    if U < 0 or M < 1:
        raise ParameterError("need U >= 0 and M >= 1")
    counts = [1]
    for u in range(1, U + 1):
        counts.append(sum(counts[u - k] for k in range(1, min(M, u) + 1)))
    return counts[U]


def policy_metrics(rates: Sequence[float], L: int, config: FrameConfig):
    """Portions, spectral efficiency and latency for groups with the given rates.

    Returns ``(portions, se, frames, seconds, approx_seconds)``.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.size == 0 or np.any(rates <= 0):
        raise NoFeasiblePartitionError("every scheduled group needs a positive rate")
    inv = 1.0 / rates
    total = math.fsum(inv)
    portions = tuple(float(v) for v in inv / total)
    se = (1.0 - L / config.num_symbols) / config.bandwidth_inefficiency / total
    ratio = config.throughput_target / (config.bandwidth * config.frame_duration * se)
    frames = math.ceil(ratio - 1e-12 * ratio)
    seconds = config.frame_duration * frames
    approx = config.throughput_target / (config.bandwidth * se)
    return portions, se, frames, seconds, approx


def assemble_policy(users: UserSet | None, receiver, config: FrameConfig, M: int, L: int,
                    groups: Sequence[CandidateGroup], zf_fallback: bool = False) -> SchedulingPolicy:
    """Build the policy for a chosen partition.

    ``users`` may be ``None`` when only the rate bookkeeping is wanted; member
    ids and energy allocations are then left empty.
    """
    groups = tuple(sorted(groups, key=lambda g: g.first))
    portions, se, frames, seconds, approx = policy_metrics([g.rate for g in groups], L, config)
    members: tuple[tuple[int, ...], ...] = ()
    allocations: dict[int, EnergyAllocation] = {}
    if users is not None:
        if not isinstance(users, UserSet):
            users = UserSet(users)
        pos = 0
        for g in groups:
            if g.first != pos:
                raise ParameterError("selected groups do not partition the users")
            pos = g.last + 1
        if pos != len(users):
            raise ParameterError("selected groups do not cover every user")
        member_list = []
        for g in groups:
            block = users.users[g.first:g.last + 1]
            member_list.append(tuple(u.id for u in block))
            res = group_rate(receiver, M, config.num_symbols, L, block, zf_fallback)
            allocations.update({u.id: a for u, a in zip(block, res.allocations)})
        members = tuple(member_list)
    return SchedulingPolicy(L, groups, portions, se, frames, seconds, approx, members, allocations)


def _select(solver, firsts, lasts, costs, U):
    if solver == "lp":
        return _lp_select(firsts, lasts, costs, U)
    if solver == "dp":
        return _dp_select(firsts, lasts, costs, U)
    raise ParameterError(f"unknown solver {solver!r}; expected 'lp' or 'dp'")


def _best_partition(users, receiver, M, N, L, solver, zf_fallback):
    firsts, lasts, u, rate = _price_intervals(users, receiver, M, N, L, zf_fallback)
    with np.errstate(divide="ignore"):
        costs = np.where(rate > 0, 1.0 / rate, np.inf)
    chosen = _select(solver, firsts, lasts, costs, len(users))
    return [CandidateGroup(int(firsts[i]), int(lasts[i]), float(rate[i]), float(u[i]))
            for i in chosen]


def policy_for_length(users: UserSet, receiver, config: FrameConfig, M: int, L: int,
                      solver: str = "lp", zf_fallback: bool = False,
                      with_allocations: bool = True) -> SchedulingPolicy:
    """Optimal policy for a fixed training length."""
    if not isinstance(users, UserSet):
        users = UserSet(users)
    config.check_training_length(L)
    groups = _best_partition(users, receiver, M, config.num_symbols, L, solver, zf_fallback)
    policy = assemble_policy(users if with_allocations else None, receiver, config, M, L,
                             groups, zf_fallback)
    if not with_allocations:
        members = tuple(tuple(u.id for u in users.users[g.first:g.last + 1]) for g in policy.groups)
        policy = SchedulingPolicy(policy.training_length, policy.groups, policy.portions,
                                  policy.spectral_efficiency, policy.latency_frames,
                                  policy.latency_seconds, policy.approx_latency_seconds, members)
    return policy


def sweep_training_length(users: UserSet, receiver, config: FrameConfig, M: int,
                          solver: str = "lp", zf_fallback: bool = False,
                          lengths: Sequence[int] | None = None) -> dict[int, SchedulingPolicy | None]:
    """Per-L optimal policies (``None`` where no feasible partition exists)."""
    if not isinstance(users, UserSet):
        users = UserSet(users)
    if len(users) < 1:
        raise ParameterError("need at least one user")
    lengths = range(1, config.num_symbols) if lengths is None else lengths
    out: dict[int, SchedulingPolicy | None] = {}
    for L in lengths:
        try:
            out[L] = policy_for_length(users, receiver, config, M, L, solver, zf_fallback,
                                       with_allocations=False)
        except NoFeasiblePartitionError:
            out[L] = None
    return out


def optimize_policy(users: UserSet, receiver, config: FrameConfig, M: int,
                    solver: str = "lp", zf_fallback: bool = False) -> SchedulingPolicy:
    """Latency-optimal policy over all training lengths ``1..N-1``.

    Ties in spectral efficiency go to the shortest training length.
    """
    if not isinstance(users, UserSet):
        users = UserSet(users)
    receiver = ReceiverKind.parse(receiver)
    per_length = sweep_training_length(users, receiver, config, M, solver, zf_fallback)
    best = None
    for L in sorted(per_length):
        p = per_length[L]
        if p is not None and (best is None or p.spectral_efficiency > best.spectral_efficiency):
            best = p
    if best is None:
        raise NoFeasiblePartitionError("no training length admits a feasible partition")
    return assemble_policy(users, receiver, config, M, best.training_length, best.groups, zf_fallback)


def timetable(policy: SchedulingPolicy, num_subframes: int) -> list[int]:
    """Whole sub-frame counts per group by largest-remainder apportionment."""
    if num_subframes < 0:
        raise ParameterError("num_subframes must be non-negative")
    quotas = np.asarray(policy.portions) * num_subframes
    counts = np.floor(quotas).astype(int)
    short = num_subframes - int(counts.sum())
    order = sorted(range(len(quotas)), key=lambda q: (-(quotas[q] - counts[q]), q))
    for q in order[:short]:
        counts[q] += 1
    return counts.tolist()
