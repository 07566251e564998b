"""Scenario orchestration: run a configured pipeline, write CSV, summarize.

Exit statuses: 0 = completed, 1 = configuration error, 2 = blow-up
(partial output is still written), 3 = measurement invalid (window too
small for trustworthy exponentially weighted diagnostics).
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import characteristics as chars
from . import diagnostics as diag
from . import peakons as pk
from . import solver
from .config import (ScenarioConfig, build_grid, build_initial_condition,
                     parse_float_list)
from .errors import (BlowUpError, ConfigurationError, DomainTooSmallError,
                     MeasurementError)
from .grid import Field

__all__ = ["run_scenario", "execute", "RunResult"]


@dataclass
class RunResult:
    """Exit status plus the human-readable summary lines."""

    status: int
    summary: list[str] = field(default_factory=list)
    records: list[diag.DiagnosticsRecord] = field(default_factory=list)


def _fmt(x: Optional[float]) -> str:
    if x is None:
        return ""
    return repr(float(x))


def _record_row(rec: diag.DiagnosticsRecord, with_pullback: bool) -> list[str]:
    supp_m = rec.supp_m or (None, None)
    supp_u = rec.supp_u or (None, None)
    row = [
        _fmt(rec.t), _fmt(rec.H), _fmt(rec.P),
        _fmt(rec.Eu_plus), _fmt(rec.Eu_minus), _fmt(rec.Ev_plus), _fmt(rec.Ev_minus),
        _fmt(rec.E_plus), _fmt(rec.E_minus),
        _fmt(supp_m[0]), _fmt(supp_m[1]), _fmt(supp_u[0]), _fmt(supp_u[1]),
        _fmt(rec.tail_slope_left), _fmt(rec.tail_slope_right),
        _fmt(rec.max_abs), _fmt(rec.boundary_contamination),
    ]
    if with_pullback:
        row.append(_fmt(rec.pullback_residual))
    return row


def _write_records_csv(path: str, records: list[diag.DiagnosticsRecord],
                       with_pullback: bool) -> None:
    header = list(diag.CSV_COLUMNS) + (["pullback_residual"] if with_pullback else [])
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for rec in records:
            writer.writerow(_record_row(rec, with_pullback))


def _fields_path(out: str) -> str:
    root, ext = os.path.splitext(out)
    return f"{root}_fields{ext or '.csv'}"


def _write_field_snapshots(path: str, snaps: list[tuple[float, solver.PdeState]]) -> None:
    if not snaps:
        return
    state0 = snaps[0][1]
    is_complex = state0.m.is_complex
    if is_complex:
        header = ["t", "x", "u_re", "u_im", "v_re", "v_im",
                  "m_re", "m_im", "n_re", "n_im"]
    else:
        header = ["t", "x", "u", "v", "m", "n"]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for t, state in snaps:
            u, v = solver.recover_velocity(state)
            cols: list[np.ndarray]
            if is_complex:
                cols = [u.values.real, u.values.imag, v.values.real, v.values.imag,
                        state.m.values.real, state.m.values.imag,
                        state.n.values.real, state.n.values.imag]
            else:
                cols = [u.values, v.values, state.m.values, state.n.values]
            for j, x in enumerate(state.grid.nodes):
                writer.writerow([_fmt(t), _fmt(x)] + [_fmt(c[j]) for c in cols])


def _output_times(cfg: ScenarioConfig) -> list[float]:
    if cfg.t_end <= 0.0:
        return [0.0]
    times = list(np.arange(0.0, cfg.t_end + 1e-12, cfg.output_every))
    if not times or abs(times[-1] - cfg.t_end) > 1e-12:
        times.append(cfg.t_end)
    return [float(t) for t in times]


def _drift(values: list[float]) -> float:
    ref = max(abs(values[0]), 1e-14)
    return max(abs(v - values[0]) for v in values) / ref


def _run_field_scenario(cfg: ScenarioConfig) -> RunResult:
    g = build_grid(cfg)
    m0, n0 = build_initial_condition(cfg, g)
    state0 = solver.PdeState(0.0, m0, n0, cfg.mode)
    settings = diag.settings_from_initial(
        state0, support_factor=cfg.epsilon_support, tail_tolerance=cfg.tail_tolerance)
    track = (chars.init_characteristics(g, stride=cfg.label_stride)
             if cfg.kind == "characteristics" else None)
    with_pullback = track is not None
    snapshot_times = set(parse_float_list(cfg.snapshot_times))

    records: list[diag.DiagnosticsRecord] = []
    field_snaps: list[tuple[float, solver.PdeState]] = []
    status = 0
    summary: list[str] = []

    def on_snapshot(state: solver.PdeState, cs) -> None:
        records.append(diag.compute_record(state, settings, cs=cs, m0=m0, n0=n0))
        if any(abs(state.t - ts) <= 1e-9 for ts in snapshot_times):
            field_snaps.append((state.t, state))

    try:
        solver.evolve(state0, cfg.t_end, cfg.dt, _output_times(cfg),
                      track=track, callback=on_snapshot,
                      blowup_factor=cfg.blowup_threshold)
    except BlowUpError as err:
        status = 2
        summary.append(f"BLOW-UP: {err}")
    except DomainTooSmallError as err:
        status = 3
        summary.append(f"MEASUREMENT INVALID: {err}")

    _write_records_csv(cfg.out, records, with_pullback)
    _write_field_snapshots(_fields_path(cfg.out), field_snaps)

    if records:
        hs = [r.H for r in records]
        ps = [r.P for r in records]
        eplus = [r.E_plus for r in records]
        eminus = [r.E_minus for r in records]
        summary.append(f"snapshots: {len(records)}   (CSV: {cfg.out})")
        summary.append(f"H drift: {_drift(hs):.3e}   P drift: {_drift(ps):.3e}")
        if len(eplus) >= 2:
            up = all(b > a for a, b in zip(eplus, eplus[1:]))
            down = all(b < a for a, b in zip(eminus, eminus[1:]))
            summary.append(f"E_+ strictly increasing: {'PASS' if up else 'FAIL'}")
            summary.append(f"E_- strictly decreasing: {'PASS' if down else 'FAIL'}")
        last = records[-1]
        summary.append(
            f"tail slopes at t={last.t:g}: left {last.tail_slope_left:+.4f}, "
            f"right {last.tail_slope_right:+.4f}"
        )
        if with_pullback and last.pullback_residual is not None:
            summary.append(f"pullback residual at t={last.t:g}: "
                           f"{last.pullback_residual:.3e}")
    return RunResult(status, summary, records)


def _run_peakon_scenario(cfg: ScenarioConfig) -> RunResult:
    ps = pk.PeakonState(
        0.0,
        parse_float_list(cfg.q), parse_float_list(cfg.m_amps),
        parse_float_list(cfg.r), parse_float_list(cfg.n_amps),
    )
    summary: list[str] = []
    status = 0
    try:
        traj = pk.evolve_peakons(ps, cfg.t_end, cfg.dt,
                                 blowup_factor=cfg.blowup_threshold)
    except BlowUpError as err:
        traj = err.trajectory or [ps]
        status = 2
        summary.append(f"BLOW-UP: {err}")

    with open(cfg.out, "w", newline="") as handle:
        writer = csv.writer(handle)
        m_count, n_count = ps.q.size, ps.r.size
        header = (["t", "hamiltonian", "amp_total"]
                  + [f"q_{a}" for a in range(m_count)]
                  + [f"m_amp_{a}" for a in range(m_count)]
                  + [f"r_{b}" for b in range(n_count)]
                  + [f"n_amp_{b}" for b in range(n_count)])
        writer.writerow(header)
        for s in traj:
            writer.writerow(
                [_fmt(s.t), _fmt(pk.peakon_hamiltonian(s)),
                 _fmt(float(np.sum(s.m_amp) + np.sum(s.n_amp)))]
                + [_fmt(x) for x in s.q] + [_fmt(x) for x in s.m_amp]
                + [_fmt(x) for x in s.r] + [_fmt(x) for x in s.n_amp])

    totals = [float(np.sum(s.m_amp) + np.sum(s.n_amp)) for s in traj]
    hams = [pk.peakon_hamiltonian(s) for s in traj]
    summary.append(f"samples: {len(traj)}   (CSV: {cfg.out})")
    summary.append(f"amplitude total {totals[0]:g}: max |drift| "
                   f"{max(abs(v - totals[0]) for v in totals):.3e}")
    summary.append(f"hamiltonian drift: {_drift(hams):.3e}")
    if ps.q.size == 1 and ps.r.size == 1 and status == 0:
        try:
            period, swap_error = pk.measure_waltz(traj)
            summary.append(f"waltz period: {period:.6g}   swap error: {swap_error:.3e}")
        except MeasurementError as err:
            summary.append(f"waltz period: not measured ({err})")
    return RunResult(status, summary, [])


def execute(cfg: ScenarioConfig) -> RunResult:
    """Run a validated scenario; returns status plus summary lines."""
    try:
        if cfg.kind == "peakon":
            return _run_peakon_scenario(cfg)
        return _run_field_scenario(cfg)
    except ConfigurationError as err:
        return RunResult(1, [f"CONFIG ERROR: {err}"])
    except MeasurementError as err:
        return RunResult(3, [f"MEASUREMENT INVALID: {err}"])


def run_scenario(cfg: ScenarioConfig) -> int:
    """Execute and print the summary; returns the exit status."""
    result = execute(cfg)
    for line in result.summary:
        print(line)
    return result.status
