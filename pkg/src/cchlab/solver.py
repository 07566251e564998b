"""Momentum-form time integration of the cross-coupled system.

The prognostic variables are the momentum densities (m, n); the velocities
u, v are recovered every stage by inverting 1 - d^2/dx^2.  Each momentum is
advected and stretched by the *other* family's velocity:

    m_t + 2 v_x m + v m_x = 0,        n_t + 2 u_x n + u n_x = 0,

with u = (1 - d^2/dx^2)^(-1) m and v likewise from n.  There is no
self-interaction term: setting m = n collapses both equations onto the
classical single-equation (Camassa-Holm) case, and setting n = conj(m)
gives the self-conjugate complex reduction.  Quadratic products are
dealiased by the two-thirds rule before and after multiplication.

Time stepping is classical fixed-step RK4 with an advective stability
guard and a loud blow-up guard; optional characteristic sets are advanced
inside the same RK4 stages so the extended system retains fourth order.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil
from typing import Callable, Optional, Sequence

import numpy as np

from .characteristics import CharacteristicSet, advance_with_stages
from .errors import BlowUpError, ConfigurationError, StabilityError
from .grid import Field, Grid

__all__ = [
    "COUPLED",
    "CH_REDUCTION",
    "COMPLEX_CONJUGATE",
    "MODES",
    "PdeState",
    "Trajectory",
    "recover_velocity",
    "rhs_momentum",
    "rhs_complex_real_form",
    "step_rk4",
    "evolve",
    "evolve_real_form",
]

COUPLED = "coupled"
CH_REDUCTION = "ch_reduction"
COMPLEX_CONJUGATE = "complex_conjugate"
MODES = (COUPLED, CH_REDUCTION, COMPLEX_CONJUGATE)

# Tolerance for the mode-constraint invariants (m == n, n == conj m).
_MODE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PdeState:
    """Momentum pair (m, n) at time t, plus the reduction mode in force."""

    t: float
    m: Field
    n: Field
    mode: str = COUPLED

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.m.grid != self.n.grid:
            raise ValueError("m and n must live on the same grid")
        scale = max(1.0, self.m.max_abs(), self.n.max_abs())
        if self.mode == CH_REDUCTION:
            gap = float(np.max(np.abs(self.m.values - self.n.values)))
            if gap > _MODE_TOL * scale:
                raise ValueError(f"ch_reduction requires m == n (gap {gap:.3e})")
        elif self.mode == COMPLEX_CONJUGATE:
            gap = float(np.max(np.abs(self.n.values - np.conj(self.m.values))))
            if gap > _MODE_TOL * scale:
                raise ValueError(f"complex_conjugate requires n == conj(m) (gap {gap:.3e})")

    @property
    def grid(self) -> Grid:
        return self.m.grid


@dataclass
class Trajectory:
    """Snapshots at the requested output times, in increasing-time order.

    When characteristics were tracked, ``characteristics[i]`` is the tracked
    set at ``states[i].t``; otherwise it is None.
    """

    states: list[PdeState]
    characteristics: Optional[list[CharacteristicSet]] = None

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.states]


@dataclass(frozen=True)
class _Stage:
    dm: np.ndarray
    dn: np.ndarray
    u: np.ndarray
    ux: np.ndarray
    v: np.ndarray
    vx: np.ndarray


def _stage_arrays(g: Grid, m: np.ndarray, n: np.ndarray) -> _Stage:
    """One right-hand-side evaluation, keeping the stage velocities.

    Works in complex arithmetic throughout; real states take real parts at
    the end of a step.  Factors entering products and the products
    themselves are projected onto the lower two-thirds of the spectrum.
    """
    keep = g.dealias_keep
    ik = 1j * g.wavenumbers
    sym = g.helmholtz_symbol

    def phys(spec: np.ndarray) -> np.ndarray:
        return np.fft.ifft(np.where(keep, spec, 0.0))

    mh = np.fft.fft(m)
    nh = np.fft.fft(n)
    u, ux = phys(mh / sym), phys(ik * mh / sym)
    mf, mx = phys(mh), phys(ik * mh)
    v, vx = phys(nh / sym), phys(ik * nh / sym)
    nf, nx = phys(nh), phys(ik * nh)
    dm = phys(np.fft.fft(-(2.0 * vx * mf + v * mx)))
    dn = phys(np.fft.fft(-(2.0 * ux * nf + u * nx)))
    return _Stage(dm, dn, u, ux, v, vx)


def _reimpose_mode(mode: str, m: np.ndarray, n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project a stepped pair back onto the exact reduction manifold."""
    if mode == CH_REDUCTION:
        avg = 0.5 * (m + n)
        return avg, avg.copy()
    if mode == COMPLEX_CONJUGATE:
        sym = 0.5 * (m + np.conj(n))
        return sym, np.conj(sym)
    return m, n


def _step_core(
    g: Grid, m: np.ndarray, n: np.ndarray, dt: float, first: Optional[_Stage] = None
) -> tuple[np.ndarray, np.ndarray, tuple[_Stage, _Stage, _Stage, _Stage]]:
    s1 = first if first is not None else _stage_arrays(g, m, n)
    s2 = _stage_arrays(g, m + 0.5 * dt * s1.dm, n + 0.5 * dt * s1.dn)
    s3 = _stage_arrays(g, m + 0.5 * dt * s2.dm, n + 0.5 * dt * s2.dn)
    s4 = _stage_arrays(g, m + dt * s3.dm, n + dt * s3.dn)
    m2 = m + (dt / 6.0) * (s1.dm + 2.0 * s2.dm + 2.0 * s3.dm + s4.dm)
    n2 = n + (dt / 6.0) * (s1.dn + 2.0 * s2.dn + 2.0 * s3.dn + s4.dn)
    return m2, n2, (s1, s2, s3, s4)


def _check_stability(g: Grid, dt: float, s1: _Stage) -> None:
    speed = max(float(np.max(np.abs(s1.u))), float(np.max(np.abs(s1.v))), 1e-14)
    bound = 0.5 * g.spacing / speed
    if abs(dt) > bound:
        raise StabilityError(
            f"time step {dt!r} exceeds the advective stability bound {bound:.6e} "
            f"(0.5 * spacing / max speed)"
        )


def _default_threshold(m: np.ndarray, n: np.ndarray, factor: float = 1e6) -> float:
    return factor * max(1.0, float(np.max(np.abs(m))), float(np.max(np.abs(n))))


def _finish_step(state: PdeState, m2: np.ndarray, n2: np.ndarray, t_new: float,
                 threshold: float) -> PdeState:
    peak = max(float(np.max(np.abs(m2))), float(np.max(np.abs(n2))))
    if not np.isfinite(peak) or peak > threshold:
        raise BlowUpError(
            f"momentum magnitude {peak:.3e} exceeded the blow-up threshold "
            f"{threshold:.3e} at t = {t_new:.6g}",
            state=state,
        )
    m2, n2 = _reimpose_mode(state.mode, m2, n2)
    if not state.m.is_complex:
        m2, n2 = m2.real, n2.real
    return PdeState(t_new, Field(state.grid, m2), Field(state.grid, n2), state.mode)


def step_rk4(state: PdeState, dt: float, *, blowup_threshold: Optional[float] = None) -> PdeState:
    """Advance one RK4 step of size dt (negative dt steps backward).

    The advective stability guard requires |dt| <= 0.5 * spacing / max
    speed.  If the stepped momenta exceed the blow-up threshold (default
    1e6 times the current magnitude scale), BlowUpError is raised carrying
    the input state as the last valid one.
    """
    if dt == 0.0 or not np.isfinite(dt):
        raise ConfigurationError(f"dt must be finite and nonzero, got {dt!r}")
    g = state.grid
    m = state.m.values.astype(np.complex128)
    n = state.n.values.astype(np.complex128)
    s1 = _stage_arrays(g, m, n)
    _check_stability(g, dt, s1)
    threshold = blowup_threshold if blowup_threshold is not None else _default_threshold(m, n)
    m2, n2, _ = _step_core(g, m, n, dt, first=s1)
    return _finish_step(state, m2, n2, state.t + dt, threshold)


def recover_velocity(state: PdeState) -> tuple[Field, Field]:
    """(u, v) from the momenta by inverting 1 - d^2/dx^2 mode-by-mode."""
    g = state.grid
    return (
        Field(g, g.inv_helmholtz(state.m.values)),
        Field(g, g.inv_helmholtz(state.n.values)),
    )


def rhs_momentum(state: PdeState) -> tuple[Field, Field]:
    """Instantaneous (dm/dt, dn/dt) = (-2 v_x m - v m_x, -2 u_x n - u n_x)."""
    g = state.grid
    s = _stage_arrays(g, state.m.values.astype(np.complex128),
                      state.n.values.astype(np.complex128))
    if state.m.is_complex:
        return Field(g, s.dm), Field(g, s.dn)
    return Field(g, s.dm.real), Field(g, s.dn.real)


def rhs_complex_real_form(mu_re: Field, mu_im: Field) -> tuple[Field, Field]:
    """Right-hand side for the real/imaginary momentum pair of the
    self-conjugate reduction.

    Packs the complex momentum mu_re + i mu_im, applies the conjugate-pair
    momentum right-hand side, and splits the rate back into its real and
    imaginary parts.  Evolving this real pair is an independent arithmetic
    path that must agree with evolving the complex momentum directly.
    """
    if mu_re.is_complex or mu_im.is_complex:
        raise ValueError("the real-form pair must be real fields")
    if mu_re.grid != mu_im.grid:
        raise ValueError("the pair must live on the same grid")
    g = mu_re.grid
    m = mu_re.values + 1j * mu_im.values
    s = _stage_arrays(g, m, np.conj(m))
    return Field(g, s.dm.real), Field(g, s.dm.imag)


def _normalize_output_times(t0: float, t_end: float, output_times) -> list[float]:
    if not np.isfinite(t_end) or t_end < t0:
        raise ConfigurationError(f"t_end must be >= start time {t0}, got {t_end!r}")
    if output_times is None:
        times = [t0] if t_end == t0 else [t0, t_end]
    else:
        times = [float(t) for t in output_times]
    if not times:
        raise ConfigurationError("output_times must not be empty")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigurationError("output_times must be strictly increasing")
    if times[0] < t0 - 1e-12 or times[-1] > t_end + 1e-12:
        raise ConfigurationError(
            f"output_times must lie within [{t0}, {t_end}]"
        )
    return times


def evolve(
    state: PdeState,
    t_end: float,
    dt: float,
    output_times: Optional[Sequence[float]] = None,
    *,
    track: Optional[CharacteristicSet] = None,
    callback: Optional[Callable[[PdeState, Optional[CharacteristicSet]], None]] = None,
    blowup_factor: float = 1e6,
) -> Trajectory:
    """Fixed-step RK4 march with snapshots at the requested output times.

    Each inter-output interval is subdivided into ceil(interval/dt) equal
    steps so snapshots land exactly on the requested times (the effective
    step never exceeds dt).  When ``track`` is given, the characteristic
    set is advanced inside the same RK4 stages as the momenta and a
    snapshot of it accompanies every state snapshot.  ``callback`` is
    invoked as callback(state, characteristics) at every snapshot.

    The blow-up threshold is frozen from the initial data as
    blowup_factor * max(1, max|m0|, max|n0|); exceeding it raises
    BlowUpError carrying the partial Trajectory.
    """
    if dt <= 0.0 or not np.isfinite(dt):
        raise ConfigurationError(f"dt must be positive and finite, got {dt!r}")
    g = state.grid
    times = _normalize_output_times(state.t, t_end, output_times)
    threshold = _default_threshold(state.m.values, state.n.values, blowup_factor)
    if track is not None and track.t != state.t:
        raise ValueError("tracked characteristics must start at the state's time")

    snapshots: list[PdeState] = []
    cs_snaps: Optional[list[CharacteristicSet]] = [] if track is not None else None
    cs = track
    current = state

    def emit(s: PdeState) -> None:
        snapshots.append(s)
        if cs_snaps is not None:
            cs_snaps.append(cs)
        if callback is not None:
            callback(s, cs)

    try:
        t_cursor = state.t
        next_idx = 0
        if abs(times[0] - state.t) <= 1e-12:
            emit(current)
            next_idx = 1
        for target in times[next_idx:]:
            span = target - t_cursor
            n_sub = max(1, ceil(span / dt - 1e-9))
            dt_eff = span / n_sub
            m = current.m.values.astype(np.complex128)
            n_arr = current.n.values.astype(np.complex128)
            for k in range(n_sub):
                s1 = _stage_arrays(g, m, n_arr)
                _check_stability(g, dt_eff, s1)
                m2, n2, stages = _step_core(g, m, n_arr, dt_eff, first=s1)
                peak = max(float(np.max(np.abs(m2))), float(np.max(np.abs(n2))))
                if not np.isfinite(peak) or peak > threshold:
                    last = _materialize(current, m, n_arr, t_cursor + k * dt_eff)
                    raise BlowUpError(
                        f"momentum magnitude {peak:.3e} exceeded the blow-up "
                        f"threshold {threshold:.3e} at t = {t_cursor + (k + 1) * dt_eff:.6g}",
                        state=last,
                    )
                if cs is not None:
                    cs = advance_with_stages(
                        cs, g,
                        [(st.u.real, st.ux.real, st.v.real, st.vx.real) for st in stages],
                        dt_eff,
                    )
                m2, n2 = _reimpose_mode(current.mode, m2, n2)
                m, n_arr = m2, n2
            current = _materialize(current, m, n_arr, target)
            if cs is not None:
                cs = cs.at_time(target)
            t_cursor = target
            emit(current)
    except BlowUpError as err:
        raise BlowUpError(
            str(err),
            state=err.state,
            trajectory=Trajectory(snapshots, cs_snaps),
        ) from None
    return Trajectory(snapshots, cs_snaps)


def _materialize(template: PdeState, m: np.ndarray, n: np.ndarray, t: float) -> PdeState:
    if not template.m.is_complex:
        m, n = m.real, n.real
    return PdeState(t, Field(template.grid, m), Field(template.grid, n), template.mode)


def evolve_real_form(
    mu_re: Field,
    mu_im: Field,
    t_end: float,
    dt: float,
    output_times: Optional[Sequence[float]] = None,
) -> list[tuple[float, Field, Field]]:
    """March the real/imaginary momentum pair with the same RK4 scheme.

    Returns [(t, mu_re, mu_im), ...] at the output times.  This is the
    real-arithmetic path for the self-conjugate reduction, used to
    cross-check the complex-momentum path.
    """
    if dt <= 0.0 or not np.isfinite(dt):
        raise ConfigurationError(f"dt must be positive and finite, got {dt!r}")
    if mu_re.grid != mu_im.grid:
        raise ValueError("the pair must live on the same grid")
    g = mu_re.grid
    times = _normalize_output_times(0.0, t_end, output_times)

    def rhs(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = _stage_arrays(g, (a + 1j * b).astype(np.complex128),
                          np.conj(a + 1j * b).astype(np.complex128))
        return s.dm.real, s.dm.imag

    out: list[tuple[float, Field, Field]] = []
    a, b = mu_re.values.copy(), mu_im.values.copy()
    t_cursor = 0.0
    next_idx = 0
    if abs(times[0]) <= 1e-12:
        out.append((0.0, Field(g, a), Field(g, b)))
        next_idx = 1
    for target in times[next_idx:]:
        span = target - t_cursor
        n_sub = max(1, ceil(span / dt - 1e-9))
        dt_eff = span / n_sub
        for _ in range(n_sub):
            ka1, kb1 = rhs(a, b)
            ka2, kb2 = rhs(a + 0.5 * dt_eff * ka1, b + 0.5 * dt_eff * kb1)
            ka3, kb3 = rhs(a + 0.5 * dt_eff * ka2, b + 0.5 * dt_eff * kb2)
            ka4, kb4 = rhs(a + dt_eff * ka3, b + dt_eff * kb3)
            a = a + (dt_eff / 6.0) * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4)
            b = b + (dt_eff / 6.0) * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4)
        t_cursor = target
        out.append((target, Field(g, a), Field(g, b)))
    return out
