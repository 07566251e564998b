"""Flow maps of the two velocity fields and the pullback/support checks.

Two families of characteristics are tracked, named by the quantity they
transport: ``phi`` follows the velocity v and carries the momentum m
(m_t + v m_x + 2 v_x m = 0 is a transport equation along phi), while
``xi`` follows u and carries n.  Along these flows

    d(phi)/dt = v(phi(t), t),       d(log phi_x)/dt = v_x(phi(t), t),

so the Jacobians are propagated in log form (guaranteeing positivity) and
exponentiated on output.  The transported momentum satisfies the exact
pullback identity m(phi(x, t), t) * phi_x(x, t)^2 = m0(x), which
pullback_residual measures; support_bounds maps initial support endpoints
forward to bound the support of the evolved momentum.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainTooSmallError
from .grid import Field, Grid, interp_periodic

__all__ = [
    "CharacteristicSet",
    "init_characteristics",
    "advect",
    "advance_with_stages",
    "pullback_residual",
    "support_bounds",
]


@dataclass(frozen=True, eq=False)
class CharacteristicSet:
    """Positions and Jacobians of both flows above a set of labels.

    labels are the initial positions; phi/xi the current positions of the
    m-carrying and n-carrying flows; phi_x/xi_x the (positive) Jacobians.
    """

    t: float
    labels: np.ndarray
    phi: np.ndarray
    xi: np.ndarray
    phi_x: np.ndarray
    xi_x: np.ndarray

    def __post_init__(self) -> None:
        for name in ("labels", "phi", "xi", "phi_x", "xi_x"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.ndim != 1 or arr.shape != np.shape(self.labels):
                raise ValueError("all characteristic arrays must share one 1-d shape")
            object.__setattr__(self, name, arr)
        if np.any(np.diff(self.labels) <= 0):
            raise ValueError("labels must be strictly increasing")
        if np.any(self.phi_x <= 0) or np.any(self.xi_x <= 0):
            raise ValueError("flow Jacobians must be positive")

    def at_time(self, t: float) -> "CharacteristicSet":
        """Copy with the clock pinned to an exact snapshot time."""
        return replace(self, t=float(t))


def init_characteristics(g: Grid, t: float = 0.0, stride: int = 4) -> CharacteristicSet:
    """Identity flows labelled at every ``stride``-th grid node."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    labels = g.nodes[::stride].copy()
    ones = np.ones_like(labels)
    return CharacteristicSet(float(t), labels, labels.copy(), labels.copy(), ones, ones.copy())


def _rk4_flow(
    g: Grid,
    pos: np.ndarray,
    log_jac: np.ndarray,
    stages: list[tuple[np.ndarray, np.ndarray]],
    dt: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One RK4 step of dx/dt = w(x), dlog(jac)/dt = w_x(x).

    ``stages`` holds (w, w_x) node samples at the four RK4 stage states;
    off-grid evaluation is periodic cubic interpolation.
    """
    (w1, wx1), (w2, wx2), (w3, wx3), (w4, wx4) = stages
    k1 = interp_periodic(g, w1, pos)
    j1 = interp_periodic(g, wx1, pos)
    p2 = pos + 0.5 * dt * k1
    k2 = interp_periodic(g, w2, p2)
    j2 = interp_periodic(g, wx2, p2)
    p3 = pos + 0.5 * dt * k2
    k3 = interp_periodic(g, w3, p3)
    j3 = interp_periodic(g, wx3, p3)
    p4 = pos + dt * k3
    k4 = interp_periodic(g, w4, p4)
    j4 = interp_periodic(g, wx4, p4)
    new_pos = pos + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    new_log = log_jac + (dt / 6.0) * (j1 + 2.0 * j2 + 2.0 * j3 + j4)
    return new_pos, new_log


def advance_with_stages(
    cs: CharacteristicSet,
    g: Grid,
    velocity_stages: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]],
    dt: float,
) -> CharacteristicSet:
    """Advance both flows using the four (u, u_x, v, v_x) RK4 stage fields.

    Called by the PDE stepper so positions and Jacobians see exactly the
    same intermediate states as the momenta (the extended system stays a
    single fourth-order RK4 scheme).
    """
    phi, lphi = _rk4_flow(g, cs.phi, np.log(cs.phi_x),
                          [(v, vx) for (_, _, v, vx) in velocity_stages], dt)
    xi, lxi = _rk4_flow(g, cs.xi, np.log(cs.xi_x),
                        [(u, ux) for (u, ux, _, _) in velocity_stages], dt)
    for name, pos in (("phi", phi), ("xi", xi)):
        # The leftmost label sits exactly at -L, so it crosses the window
        # edge under round-off-level velocity ripple; only a position more
        # than half a node beyond the edge counts as a genuine escape.
        if float(np.max(np.abs(pos))) > g.half_length + 0.5 * g.spacing:
            raise DomainTooSmallError(
                f"characteristic {name} left the window [-L, L), L = {g.half_length}"
            )
        if np.any(np.diff(pos) <= 0):
            raise FloatingPointError(
                f"characteristic ordering of {name} collapsed (step too coarse)"
            )
    return CharacteristicSet(cs.t + dt, cs.labels, phi, xi, np.exp(lphi), np.exp(lxi))


def advect(cs: CharacteristicSet, u: Field, v: Field, dt: float) -> CharacteristicSet:
    """One frozen-field RK4 step: both velocities held fixed across the step.

    Exact for velocity fields that are constant in time; a full PDE run
    should instead track characteristics inside evolve, which feeds the
    true stage velocities.
    """
    if u.grid != v.grid:
        raise ValueError("u and v must live on the same grid")
    if u.is_complex or v.is_complex:
        raise ValueError("characteristic advection needs real velocities")
    g = u.grid
    ux = g.deriv(u.values)
    vx = g.deriv(v.values)
    frozen = [(u.values, ux, v.values, vx)] * 4
    return advance_with_stages(cs, g, frozen, dt)


def pullback_residual(
    f_t: Field,
    cs: CharacteristicSet,
    f0: Field,
    flow: str = "m",
    t: float | None = None,
) -> float:
    """Max-norm defect of the pullback identity f(pos(x,t), t) * jac^2 = f0(x).

    ``flow`` selects which transported quantity f is: "m" evaluates along
    phi with phi_x, "n" along xi with xi_x.  Passing ``t`` asserts the
    snapshot time matches the characteristic set's clock.
    """
    if flow not in ("m", "n"):
        raise ValueError(f"flow must be 'm' or 'n', got {flow!r}")
    if t is not None and abs(t - cs.t) > 1e-9:
        raise ValueError(f"characteristics are at t = {cs.t}, field claims t = {t}")
    if f_t.grid != f0.grid:
        raise ValueError("fields must live on the same grid")
    pos, jac = (cs.phi, cs.phi_x) if flow == "m" else (cs.xi, cs.xi_x)
    carried = interp_periodic(f_t.grid, f_t.values, pos) * jac**2
    initial = interp_periodic(f0.grid, f0.values, cs.labels)
    return float(np.max(np.abs(carried - initial)))


def support_bounds(
    cs: CharacteristicSet, alpha: float, beta: float, flow: str = "m"
) -> tuple[float, float]:
    """Image (pos(alpha, t), pos(beta, t)) of initial support endpoints.

    The flow position is interpolated linearly between labels; the interval
    bounds the support of the transported momentum at time t.
    """
    if flow not in ("m", "n"):
        raise ValueError(f"flow must be 'm' or 'n', got {flow!r}")
    if not alpha < beta:
        raise ValueError(f"need alpha < beta, got {alpha}, {beta}")
    lo, hi = cs.labels[0], cs.labels[-1]
    if alpha < lo or beta > hi:
        raise ValueError(
            f"endpoints [{alpha}, {beta}] outside the labelled range [{lo}, {hi}]"
        )
    pos = cs.phi if flow == "m" else cs.xi
    return (
        float(np.interp(alpha, cs.labels, pos)),
        float(np.interp(beta, cs.labels, pos)),
    )
