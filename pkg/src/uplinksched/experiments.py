"""
Sweeps that regenerate the comparison tables and figure data as CSV.

Every sweep point is evaluated independently and rows are emitted in sweep
order. Failures at one point become a row whose ``status`` column carries
``error:<kind>: <message>`` instead of aborting the whole sweep.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .asymptotic import (ProductDistribution, asymptotic_latency, asymptotic_params, asymptotic_policy,
                         classify_regime)
from .baselines import random_equal, random_optimal
from .config import ExperimentConfig, build_population
from .energy import price_groups
from .errors import ParameterError, SchedulingError
from .model import ReceiverKind, UserSet
from .montecarlo import accuracy_report
from .scheduler import optimize_policy

__all__ = [
    "ResultTable",
    "format_value",
    "write_csv",
    "scheme_summary",
    "equal_block_surface",
    "run_table",
    "run_figure",
    "TABLE_IDS",
    "FIGURE_IDS",
    "SCHEMES",
]

SCHEMES = ("proposed", "random_optimal", "random_equal")
TABLE_IDS = (3, 4, 5)
FIGURE_IDS = (3, 4, 5, 6, 7, 8)


@dataclass
class ResultTable:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        write_csv(self, buf)
        return buf.getvalue()


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (list, tuple)):
        return "[" + " ".join(format_value(x) for x in v) + "]"
    return str(v)


def write_csv(table: ResultTable, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([format_value(v) for v in row])


def _error_status(exc: SchedulingError) -> str:
    return f"error:{exc.kind}: {exc}"


def _block_sizes(U: int, K: int) -> list[int]:
    return [K] * (U // K) + ([U % K] if U % K else [])


def scheme_summary(scheme: str, users: UserSet, cfg: ExperimentConfig, M: int, receiver=None) -> dict:
    """Latency, L, group sizes and spectral efficiency of one scheme at one point."""
    receiver = ReceiverKind.parse(receiver or cfg.receiver)
    frame = cfg.frame
    if scheme == "proposed":
        p = optimize_policy(users, receiver, frame, M, cfg.solver, cfg.zf_fallback)
        return dict(latency_seconds=p.latency_seconds, approx_latency_seconds=p.approx_latency_seconds,
                    L_star=p.training_length, K=None, group_sizes=p.group_sizes,
                    SE=p.spectral_efficiency, std_latency_seconds=0.0)
    if scheme in ("random_optimal", "random_equal"):
        fn = random_optimal if scheme == "random_optimal" else random_equal
        r = fn(users, receiver, frame, M, cfg.seed, cfg.num_draws)
        # spectral efficiency consistent with the reported mean latency
        se = frame.throughput_target / (frame.bandwidth * r.mean_approx_latency_seconds)
        return dict(latency_seconds=r.mean_latency_seconds,
                    approx_latency_seconds=r.mean_approx_latency_seconds,
                    L_star=r.best_L, K=r.best_K, group_sizes=_block_sizes(len(users), r.best_K),
                    SE=se, std_latency_seconds=r.std_latency_seconds)
    raise ParameterError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


_SUMMARY_COLUMNS = ("latency_seconds", "approx_latency_seconds", "L_star", "K", "group_sizes", "SE",
                    "std_latency_seconds")


def _table_axis(cfg: ExperimentConfig, table_id: int):
    if table_id == 3:
        return "E_dB", cfg.energy_dB_sweep, lambda v: cfg.replace(energy_dB=float(v))
    if table_id == 4:
        return "M", cfg.antennas_sweep, lambda v: cfg.replace(antennas=int(v))
    if table_id == 5:
        return "U", cfg.users_sweep, lambda v: cfg.replace(num_users=int(v))
    raise ParameterError(f"unknown table id {table_id!r}; expected one of {TABLE_IDS}")


def _sweep_rows(axis_values, make_cfg, schemes, receiver=None, prefix=()):
    rows = []
    for v in axis_values:
        point = make_cfg(v)
        try:
            users = build_population(point)
        except SchedulingError as exc:
            for s in schemes:
                rows.append(prefix + (v, s) + (None,) * len(_SUMMARY_COLUMNS) + (_error_status(exc),))
            continue
        for s in schemes:
            try:
                out = scheme_summary(s, users, point, point.antennas, receiver)
                rows.append(prefix + (v, s) + tuple(out[c] for c in _SUMMARY_COLUMNS) + ("ok",))
            except SchedulingError as exc:
                rows.append(prefix + (v, s) + (None,) * len(_SUMMARY_COLUMNS) + (_error_status(exc),))
    return rows


def run_table(cfg: ExperimentConfig, table_id: int, schemes: Sequence[str] = SCHEMES,
              values: Sequence | None = None) -> ResultTable:
    """One row per sweep point and scheme.

    Table 3 sweeps the energy budget, 4 the antenna count and 5 the number of users.
    """
    axis, default_values, make_cfg = _table_axis(cfg, int(table_id))
    for s in schemes:
        if s not in SCHEMES:
            raise ParameterError(f"unknown scheme {s!r}; expected one of {SCHEMES}")
    vals = list(values) if values is not None else list(default_values)
    if not vals:
        raise ParameterError("sweep values must be non-empty")
    rows = _sweep_rows(vals, make_cfg, schemes)
    return ResultTable(f"table{table_id}", (axis, "scheme") + _SUMMARY_COLUMNS + ("status",), rows)


def equal_block_surface(users: UserSet, receiver, cfg: ExperimentConfig, M: int):
    """Spectral efficiency of consecutive equal-size blocks over every ``(L, K)``.

    Returns ``(Ls, Ks, se)`` with ``se[i, j]`` for ``L = Ls[i]``, ``K = Ks[j]``;
    entries where some block has zero rate are 0.
    """
    receiver = ReceiverKind.parse(receiver)
    frame = cfg.frame
    U, N = len(users), frame.num_symbols
    kmax = min(M - 1 if receiver is ReceiverKind.ZF else M, U)
    if kmax < 1:
        raise ParameterError("no admissible group size")
    Ls = np.arange(1, N)
    Ks = np.arange(1, kmax + 1)
    se = np.zeros((Ls.size, Ks.size))
    prod = users.products
    for j, K in enumerate(Ks):
        lasts = np.minimum(np.arange(K, U + K, K), U) - 1
        sizes = np.diff(np.concatenate(([-1], lasts)))
        _, rate = price_groups(receiver, M, N, Ls[:, None], sizes[None, :], prod[lasts][None, :],
                               cfg.zf_fallback)
        ok = np.all(rate > 0, axis=1)
        inv = np.sum(1.0 / np.where(rate > 0, rate, 1.0), axis=1)
        se[:, j] = np.where(ok, (1 - Ls / N) / frame.bandwidth_inefficiency / inv, 0.0)
    return Ls, Ks, se


FIGURE8_PANELS = (("a", 70.0, 64), ("b", 60.0, 64), ("c", 70.0, 2048))


def _figure_sweep(cfg, by, receivers, values):
    if by == "E_dB":
        vals = list(values) if values is not None else list(cfg.energy_dB_sweep)
        make = lambda v: cfg.replace(energy_dB=float(v))
    else:
        vals = list(values) if values is not None else list(cfg.antennas_sweep)
        make = lambda v: cfg.replace(antennas=int(v))
    rows = []
    for rx in receivers:
        rows += _sweep_rows(vals, make, SCHEMES, rx, prefix=(rx,))
    return ("receiver", by, "scheme") + _SUMMARY_COLUMNS + ("status",), rows


def _structure_sweep(cfg, by, values):
    cols, rows = _figure_sweep(cfg, by, (cfg.receiver,), values)
    keep = ("L_star", "group_sizes", "SE", "status")
    idx = [cols.index(c) for c in keep]
    out = [(r[1],) + tuple(r[i] for i in idx) for r in rows if r[2] == "proposed"]
    return (by,) + keep, out


def run_figure(cfg: ExperimentConfig, figure_id: int, values: Sequence | None = None) -> ResultTable:
    """Long-format data behind one figure.

    3: exact versus approximate rate; 4 and 5: latency and spectral efficiency
    of all schemes against the energy budget and antenna count for both
    receivers; 6 and 7: chosen training length and group sizes; 8: spectral
    efficiency of equal-size blocks over ``(L, K)``.
    """
    figure_id = int(figure_id)
    name = f"figure{figure_id}"
    if figure_id == 3:
        Ms = list(values) if values is not None else list(cfg.mc_antennas)
        report = accuracy_report([int(m) for m in Ms], cfg.mc_energy_dB, ("zf", "mrc"),
                                 cfg.num_realizations, cfg.seed, cfg.num_symbols,
                                 cfg.mc_training_length, cfg.mc_group_size)
        rows = [(r.M, r.E_dB, r.receiver, r.stats.empirical_mean, r.stats.empirical_std,
                 r.stats.approx_rate, r.stats.skipped) for r in report]
        return ResultTable(name, ("M", "E_dB", "receiver", "exact_mean", "exact_std", "approx",
                                  "skipped"), rows)
    if figure_id in (4, 5):
        by = "E_dB" if figure_id == 4 else "M"
        cols, rows = _figure_sweep(cfg, by, ("zf", "mrc"), values)
        return ResultTable(name, cols, rows)
    if figure_id in (6, 7):
        cols, rows = _structure_sweep(cfg, "E_dB" if figure_id == 6 else "M", values)
        return ResultTable(name, cols, rows)
    if figure_id == 8:
        rows = []
        for panel, E_dB, M in FIGURE8_PANELS:
            point = cfg.replace(energy_dB=E_dB, antennas=M)
            Ls, Ks, se = equal_block_surface(build_population(point), point.receiver, point, M)
            best = np.unravel_index(int(np.argmax(se)), se.shape)
            for i, L in enumerate(Ls):
                for j, K in enumerate(Ks):
                    rows.append((panel, E_dB, M, int(L), int(K), float(se[i, j]), (i, j) == best))
        return ResultTable(name, ("panel", "E_dB", "M", "L", "K", "SE", "is_max"), rows)
    raise ParameterError(f"unknown figure id {figure_id!r}; expected one of {FIGURE_IDS}")


def asymptotic_summary(cfg: ExperimentConfig, users: UserSet | None = None) -> ResultTable:
    """Asymptotic group size and training length for the configured population."""
    users = build_population(cfg) if users is None else users
    frame = cfg.frame
    M, N = cfg.antennas, cfg.num_symbols
    dist = ProductDistribution.empirical(users.products)
    L, K = asymptotic_params(dist, M, N)
    per_user = asymptotic_latency(dist, M, N, frame, (L, K))
    policy = asymptotic_policy(users, "zf", frame, M, L, K, cfg.zf_fallback)
    regime = classify_regime(dist.mean, M, N)
    rows = [
        ("L_star", L), ("K_star", K),
        ("limit_latency_per_user_seconds", per_user),
        ("limit_latency_seconds", per_user * len(users)),
        ("policy_latency_seconds", policy.latency_seconds),
        ("policy_approx_latency_seconds", policy.approx_latency_seconds),
        ("policy_SE", policy.spectral_efficiency),
        ("policy_group_sizes", policy.group_sizes),
        ("rho", dist.mean),
        ("regime", regime.regime),
        ("regime_L_star", regime.L_star), ("regime_K_star", regime.K_star),
        ("latency_scaling", regime.latency_scaling),
        ("orthogonal_only_scaling", regime.orthogonal_only_scaling),
    ]
    return ResultTable("asymptotic", ("quantity", "value"), rows)


def optimize_summary(cfg: ExperimentConfig, users: UserSet | None = None):
    """Chosen policy: a summary table and a per-user allocation table."""
    users = build_population(cfg) if users is None else users
    p = optimize_policy(users, cfg.receiver, cfg.frame, cfg.antennas, cfg.solver, cfg.zf_fallback)
    groups = ResultTable("policy_groups", ("group", "size", "member_ids", "rate", "portion", "u_star"))
    for q, (g, ids, d) in enumerate(zip(p.groups, p.members, p.portions), 1):
        groups.rows.append((q, g.size, list(ids), g.rate, d, g.u_star))
    alloc = ResultTable("policy_allocations", ("user_id", "energy_budget", "gain", "train_energy",
                                               "data_energy", "energy_used"))
    N, L = cfg.num_symbols, p.training_length
    for u in users:
        a = p.allocations[u.id]
        alloc.rows.append((u.id, u.energy_budget, u.gain, a.train_energy, a.data_energy,
                           a.budget_used(L, N)))
    summary = ResultTable("policy_summary", ("quantity", "value"), [
        ("L_star", L), ("group_sizes", p.group_sizes), ("SE", p.spectral_efficiency),
        ("latency_frames", p.latency_frames), ("latency_seconds", p.latency_seconds),
        ("approx_latency_seconds", p.approx_latency_seconds),
    ])
    return summary, groups, alloc


def baseline_summary(cfg: ExperimentConfig, users: UserSet | None = None) -> ResultTable:
    users = build_population(cfg) if users is None else users
    rows = []
    for s in SCHEMES:
        out = scheme_summary(s, users, cfg, cfg.antennas)
        rows.append((s,) + tuple(out[c] for c in _SUMMARY_COLUMNS))
    return ResultTable("baseline", ("scheme",) + _SUMMARY_COLUMNS, rows)


def save(table: ResultTable, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{table.name}.csv"
    with open(path, "w", newline="") as fh:
        write_csv(table, fh)
    return path
