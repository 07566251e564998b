"""Point-momentum (peakon) dynamics of the cross-coupled pair.

Derivation of the ODEs
----------------------
The PDE pair in weak form reads, for any test function w,

    d/dt <m, w> = <m, v w_x - 2 v_x w + ... >  collected from
    m_t + v m_x + 2 v_x m = 0    =>    d/dt <m, w> = <m, v w_x> - <2 v_x m, w>.

Substituting the point-momentum ansatz

    m(x, t) = sum_a m_a(t) delta(x - q_a(t)),
    n(x, t) = sum_b n_b(t) delta(x - r_b(t)),

with velocities recovered through the kernel K(x) = 0.5 e^{-|x|} of
(1 - d^2/dx^2)^{-1},

    v(x) = (K * n)(x) = sum_b n_b K(x - r_b),
    u(x) = (K * m)(x) = sum_a m_a K(x - q_a),

and matching the coefficients of w(q_a) and w'(q_a) (each momentum is
advected by the *other* family's velocity) gives the canonical equations

    dq_a/dt = v(q_a)        = sum_b n_b K(q_a - r_b),
    dm_a/dt = -m_a v_x(q_a) = -m_a sum_b n_b K'(q_a - r_b),
    dr_b/dt = u(r_b)        = sum_a m_a K(r_b - q_a),
    dn_b/dt = -n_b u_x(r_b) = -n_b sum_a m_a K'(r_b - q_a),

which are Hamilton's equations for h = sum_{a,b} m_a n_b K(q_a - r_b)
(dq_a/dt = dh/dm_a, dm_a/dt = -dh/dq_a, and likewise for the other
family).  At an exact cross-family collision q_a = r_b the derivative of
the kernel is assigned its odd-symmetric value K'(0) := 0, the unique
convention that keeps the symmetric collision state amplitude-stationary
and conserves h through collisions.

A single m-peakon against a single n-peakon "waltzes": the relative
coordinate z = q - r and amplitude difference w = m1 - n1 obey

    dz/dt = -w K(z),        dw/dt = -(P^2 - w^2) K'(z) / 2,

with P = m1 + n1 and h = m1 n1 K(z) both conserved, so orbits are the
closed curves (P^2 - w^2) K(z) = 4 h.  Integrating dt = dz / (w K(z))
around one orbit gives the closed-form period

    T = 16 sqrt(1 - w*) / (P w*),        w* = 8 h / P^2,

(substitute y = e^{-|z|}; the quarter-period integral is elementary), and
the point symmetry (z, w) -> (-z, -w), which reverses time and maps the
orbit onto itself, forces the exact half-period exchange
m1(t + T/2) = n1(t).  For z(0) = 0 the period reduces to 4 |m1 - n1| /
(m1 n1).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, sqrt

import numpy as np

from .errors import BlowUpError, ConfigurationError, DomainTooSmallError, MeasurementError
from .grid import Field, Grid, green_kernel_eval

__all__ = [
    "PeakonState",
    "PeakonRates",
    "kernel",
    "kernel_derivative",
    "peakon_rhs",
    "peakon_hamiltonian",
    "peakon_fields",
    "evolve_peakons",
    "measure_waltz",
    "waltz_period_closed_form",
]


def kernel(x):
    """K(x) = 0.5 e^{-|x|}, the infinite-line kernel of (1 - d^2/dx^2)^{-1}."""
    return 0.5 * np.exp(-np.abs(x))


def kernel_derivative(x):
    """K'(x) = -sign(x) 0.5 e^{-|x|} with the odd convention K'(0) = 0."""
    return -np.sign(x) * 0.5 * np.exp(-np.abs(x))


@dataclass(frozen=True, eq=False)
class PeakonState:
    """Positions and amplitudes of the two point-momentum families at time t."""

    t: float
    q: np.ndarray
    m_amp: np.ndarray
    r: np.ndarray
    n_amp: np.ndarray

    def __post_init__(self) -> None:
        for name in ("q", "m_amp", "r", "n_amp"):
            arr = np.atleast_1d(np.array(getattr(self, name), dtype=np.float64))
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        if self.q.shape != self.m_amp.shape or self.r.shape != self.n_amp.shape:
            raise ValueError("positions and amplitudes must pair up within each family")


@dataclass(frozen=True)
class PeakonRates:
    """Time derivatives of (q, m_amp, r, n_amp)."""

    dq: np.ndarray
    dm_amp: np.ndarray
    dr: np.ndarray
    dn_amp: np.ndarray


def _rates(q, m_amp, r, n_amp) -> PeakonRates:
    diff = q[:, None] - r[None, :]  # shape (M, N)
    kmat = kernel(diff)
    kpmat = kernel_derivative(diff)
    dq = kmat @ n_amp
    dm = -m_amp * (kpmat @ n_amp)
    dr = kmat.T @ m_amp
    dn = n_amp * (kpmat.T @ m_amp)  # K'(r - q) = -K'(q - r)
    return PeakonRates(dq, dm, dr, dn)


def peakon_rhs(ps: PeakonState) -> PeakonRates:
    """Canonical equations: positions move with the other family's velocity,
    amplitudes stretch with minus its slope."""
    return _rates(ps.q, ps.m_amp, ps.r, ps.n_amp)


def peakon_hamiltonian(ps: PeakonState) -> float:
    """h = sum_{a,b} m_a n_b K(q_a - r_b); conserved along the flow."""
    if ps.q.size == 0 or ps.r.size == 0:
        return 0.0
    kmat = kernel(ps.q[:, None] - ps.r[None, :])
    return float(ps.m_amp @ kmat @ ps.n_amp)


def peakon_fields(ps: PeakonState, g: Grid) -> tuple[Field, Field]:
    """Velocity fields induced on a grid via the periodized kernel.

    u = sum_a m_a p_L(x - q_a) and v = sum_b n_b p_L(x - r_b).  All
    positions must lie inside the window.
    """
    for name, pos in (("q", ps.q), ("r", ps.r)):
        if pos.size and float(np.max(np.abs(pos))) >= g.half_length:
            raise DomainTooSmallError(
                f"peakon position in {name} outside the window (L = {g.half_length})"
            )
    u = np.zeros(g.n_points)
    for qa, ma in zip(ps.q, ps.m_amp):
        u += ma * green_kernel_eval(g.nodes - qa, g.half_length)
    v = np.zeros(g.n_points)
    for rb, nb in zip(ps.r, ps.n_amp):
        v += nb * green_kernel_eval(g.nodes - rb, g.half_length)
    return Field(g, u), Field(g, v)


def _step(ps: PeakonState, dt: float) -> PeakonState:
    q, m, r, n = ps.q, ps.m_amp, ps.r, ps.n_amp
    k1 = _rates(q, m, r, n)
    k2 = _rates(q + 0.5 * dt * k1.dq, m + 0.5 * dt * k1.dm_amp,
                r + 0.5 * dt * k1.dr, n + 0.5 * dt * k1.dn_amp)
    k3 = _rates(q + 0.5 * dt * k2.dq, m + 0.5 * dt * k2.dm_amp,
                r + 0.5 * dt * k2.dr, n + 0.5 * dt * k2.dn_amp)
    k4 = _rates(q + dt * k3.dq, m + dt * k3.dm_amp,
                r + dt * k3.dr, n + dt * k3.dn_amp)
    sixth = dt / 6.0
    return PeakonState(
        ps.t + dt,
        q + sixth * (k1.dq + 2 * k2.dq + 2 * k3.dq + k4.dq),
        m + sixth * (k1.dm_amp + 2 * k2.dm_amp + 2 * k3.dm_amp + k4.dm_amp),
        r + sixth * (k1.dr + 2 * k2.dr + 2 * k3.dr + k4.dr),
        n + sixth * (k1.dn_amp + 2 * k2.dn_amp + 2 * k3.dn_amp + k4.dn_amp),
    )


# Recursion depth for isolating kernel kinks inside a step.  2^-20 of a
# step brackets a transversal crossing into ~1e-9 of the step span, far
# below the measurement tolerances; deeper splitting would push the
# crossing coordinates toward round-off scale, where sign jitter makes the
# bisection branch on noise.
_KINK_SPLIT_DEPTH = 20


def _pair_signs(ps: PeakonState) -> np.ndarray:
    if ps.q.size == 0 or ps.r.size == 0:
        return np.zeros((ps.q.size, ps.r.size))
    return np.sign(ps.q[:, None] - ps.r[None, :])


def _step_smooth(ps: PeakonState, dt: float, depth: int = 0) -> PeakonState:
    """RK4 step that subdivides across collisions.

    The right-hand side is smooth except where some q_a - r_b changes sign
    (the kernel slope K' jumps there), and a step that straddles such a
    crossing only reaches first-order accuracy.  When a sign flip is
    detected the step is redone as two halves, recursively, which brackets
    each transversal crossing into an interval of ~dt/2^45 and keeps the
    fourth-order behaviour of the smooth pieces.
    """
    nxt = _step(ps, dt)
    if depth >= _KINK_SPLIT_DEPTH:
        return nxt
    before = _pair_signs(ps)
    after = _pair_signs(nxt)
    if not np.any((before * after < 0.0) | ((before != after) & (before * after == 0.0))):
        return nxt
    mid = _step_smooth(ps, 0.5 * dt, depth + 1)
    return _step_smooth(mid, 0.5 * dt, depth + 1)


def evolve_peakons(
    ps: PeakonState, t_end: float, dt: float, *, blowup_factor: float = 1e6
) -> list[PeakonState]:
    """Fixed-step RK4 march; returns the state after every step.

    The step count is ceil((t_end - t)/dt) with the step shrunk to land on
    t_end exactly.  Steps are subdivided across peakon collisions (see
    _step_smooth) so the sampled trajectory keeps fourth-order accuracy
    through amplitude exchanges.  Amplitudes beyond blowup_factor * max(1,
    initial amplitude scale) raise BlowUpError with the partial trajectory.
    """
    if dt <= 0.0 or not np.isfinite(dt):
        raise ConfigurationError(f"dt must be positive and finite, got {dt!r}")
    if t_end < ps.t:
        raise ConfigurationError(f"t_end must be >= start time {ps.t}, got {t_end}")
    amp0 = max((float(np.max(np.abs(a))) for a in (ps.m_amp, ps.n_amp) if a.size),
               default=0.0)
    threshold = blowup_factor * max(1.0, amp0)
    traj = [ps]
    if t_end == ps.t:
        return traj
    n_steps = max(1, ceil((t_end - ps.t) / dt - 1e-9))
    dt_eff = (t_end - ps.t) / n_steps
    state = ps
    for k in range(n_steps):
        state = _step_smooth(state, dt_eff)
        peak = max((float(np.max(np.abs(a))) for a in (state.m_amp, state.n_amp)
                    if a.size), default=0.0)
        if not np.isfinite(peak) or peak > threshold:
            raise BlowUpError(
                f"peakon amplitude {peak:.3e} exceeded the blow-up threshold "
                f"{threshold:.3e} at t = {state.t:.6g}",
                state=traj[-1], trajectory=traj,
            )
        if k == n_steps - 1:
            state = PeakonState(float(t_end), state.q, state.m_amp, state.r, state.n_amp)
        traj.append(state)
    return traj


def waltz_period_closed_form(m1: float, n1: float, separation: float) -> float:
    """Exact orbit period of a single m-peakon / n-peakon pair.

    T = 16 sqrt(1 - w*) / (P w*) with P = m1 + n1 and w* = 8 h / P^2,
    h = m1 n1 K(separation) (see the module docstring for the derivation).
    Requires a genuinely oscillating pair: both amplitudes positive (or
    both negative) and not the stationary equal-amplitude coincident state.
    """
    if m1 * n1 <= 0.0:
        raise ConfigurationError(
            "closed orbits require amplitudes of one sign (m1 * n1 > 0)"
        )
    total = m1 + n1
    h = m1 * n1 * float(kernel(separation))
    w_star = 8.0 * h / total**2
    if w_star >= 1.0 - 1e-15:
        raise ConfigurationError(
            "equal amplitudes at zero separation form a stationary pair (no orbit)"
        )
    return 16.0 * sqrt(1.0 - w_star) / (abs(total) * w_star)


def _interp_at(times: np.ndarray, series: np.ndarray, t: float) -> float:
    """Quadratic (three-point) interpolation of a sampled series."""
    idx = int(np.searchsorted(times, t))
    idx = min(max(idx, 1), len(times) - 2)
    ts = times[idx - 1: idx + 2]
    ys = series[idx - 1: idx + 2]
    w = [
        (t - ts[1]) * (t - ts[2]) / ((ts[0] - ts[1]) * (ts[0] - ts[2])),
        (t - ts[0]) * (t - ts[2]) / ((ts[1] - ts[0]) * (ts[1] - ts[2])),
        (t - ts[0]) * (t - ts[1]) / ((ts[2] - ts[0]) * (ts[2] - ts[1])),
    ]
    return float(ys[0] * w[0] + ys[1] * w[1] + ys[2] * w[2])


def _refine_crossing(times: np.ndarray, c: np.ndarray, i: int) -> float:
    """Root of a sampled scalar between samples i-1 and i, via a local cubic.

    The bracket [t_{i-1}, t_i] must contain a sign change of c; the root of
    the cubic through the four surrounding samples is found by bisection
    (falls back to the secant point for degenerate data).
    """
    lo, hi = float(times[i - 1]), float(times[i])
    clo, chi = float(c[i - 1]), float(c[i])
    if clo == 0.0:
        return lo
    if chi == 0.0 or clo * chi > 0.0:
        return hi
    a = max(i - 2, 0)
    b = min(i + 2, len(times))
    coeffs = np.polyfit(times[a:b] - lo, c[a:b], min(3, b - a - 1))
    flo = float(np.polyval(coeffs, 0.0))
    fhi = float(np.polyval(coeffs, hi - lo))
    if flo == 0.0:
        return lo
    if flo * fhi > 0.0:  # interpolant lost the sign change; secant fallback
        return lo + (hi - lo) * clo / (clo - chi)
    x0, x1 = 0.0, hi - lo
    for _ in range(60):
        xm = 0.5 * (x0 + x1)
        fm = float(np.polyval(coeffs, xm))
        if fm == 0.0:
            return lo + xm
        if flo * fm < 0.0:
            x1 = xm
        else:
            x0, flo = xm, fm
    return lo + 0.5 * (x0 + x1)


def measure_waltz(traj: list[PeakonState]) -> tuple[float, float]:
    """(period, swap_error) of a waltzing single pair from a dense trajectory.

    The orbit in the (q - r, m1 - n1) plane winds around its center once
    per period.  The unwrapped orbit phase locates the half turn and the
    full turn; each instant is then refined as the root of the smooth
    cross product z(t) w0 - w(t) z0 (which vanishes exactly when the orbit
    passes the antipode of the start, and again on return to the start).
    The swap error compares the amplitudes at half period against the
    initial amplitudes of the *other* family:

        swap_error = |m1(T/2) - n1(0)| + |n1(T/2) - m1(0)|,

    which the orbit's point symmetry makes exactly zero in continuum time.
    Trajectories shorter than one full orbit raise MeasurementError.
    """
    if len(traj) < 8:
        raise MeasurementError("trajectory too short to measure an orbit")
    if traj[0].q.size != 1 or traj[0].r.size != 1:
        raise ValueError("waltz measurement needs exactly one peakon per family")
    times = np.array([s.t for s in traj])
    z = np.array([float(s.q[0] - s.r[0]) for s in traj])
    w = np.array([float(s.m_amp[0] - s.n_amp[0]) for s in traj])
    z_scale = float(np.max(np.abs(z)))
    w_scale = float(np.max(np.abs(w)))
    if z_scale <= 1e-13 and w_scale <= 1e-13:
        raise MeasurementError("stationary pair: no relative motion to measure")
    z_scale = max(z_scale, 1e-13)
    w_scale = max(w_scale, 1e-13)
    zs, ws = z / z_scale, w / w_scale
    theta = np.unwrap(np.arctan2(ws, zs))
    advance = np.abs(theta - theta[0])
    hits = np.nonzero(advance >= 2.0 * np.pi)[0]
    if hits.size == 0:
        raise MeasurementError(
            "trajectory shorter than one orbit "
            f"(phase advanced {advance[-1] / (2 * np.pi):.2f} turns)"
        )
    # cross product against the initial orbit point: zero at the antipode
    # (phase pi) and at the return to start (phase 2 pi), both transversal
    cross = zs * ws[0] - ws * zs[0]
    i_half = int(np.nonzero(advance >= np.pi)[0][0])
    i_full = int(hits[0])
    t_half = _refine_crossing(times, cross, i_half)
    t_full = _refine_crossing(times, cross, i_full)
    period = t_full - float(times[0])

    m_series = np.array([float(s.m_amp[0]) for s in traj])
    n_series = np.array([float(s.n_amp[0]) for s in traj])
    m_half = _interp_at(times, m_series, t_half)
    n_half = _interp_at(times, n_series, t_half)
    swap_error = abs(m_half - n_series[0]) + abs(n_half - m_series[0])
    return period, swap_error
