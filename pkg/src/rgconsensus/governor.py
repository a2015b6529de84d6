"""Reference governor wrapped around the internal-model controller.

The governor keeps an auxiliary reference ``alpha`` expressed in the time-0
frame; the live reference fed to the controller is ``S^t alpha``.  Each step
``alpha`` moves along the segment towards the requested reference ``r0`` as
far as the invariant set allows, but only when the predicted shifted state of
the previous step is ``delta``-inside the set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, Infeasible, InvariantBroken, NotInitialized
from .mcai import FEAS_MARGIN, McaiSet, backoff, in_tilde_delta, reference_polygon
from .numerics import min_norm_point_2d
from .regulator import RegulatorSolution

# Row slack below which the governor invariant is considered broken.
INVARIANT_TOL = 1e-8


def s_power(h: float, t: int) -> tuple[np.ndarray, np.ndarray]:
    """``S^t`` and ``S^-t`` for ``S = [[1, h], [0, 1]]`` in closed form."""
    ht = h * t
    return np.array([[1.0, ht], [0.0, 1.0]]), np.array([[1.0, -ht], [0.0, 1.0]])


@dataclass
class GovernorState:
    alpha: np.ndarray | None = None
    x_prev: np.ndarray | None = None
    alpha_prev: np.ndarray | None = None
    t0: int | None = None
    t_last: int | None = None
    mu: float = 0.0
    phi: float = float("nan")
    gate: bool = False
    history: list = field(default_factory=list)

    @property
    def active(self) -> bool:
        return self.alpha is not None


@dataclass(frozen=True)
class StepRecord:
    t: int
    mu: float
    phi: float
    gate: bool
    alpha: tuple[float, float]
    u: tuple[float, ...]


def init_alpha(mset: McaiSet, x0, r0, t0: int = 0, h: float | None = None) -> np.ndarray:
    """Reference closest to ``r0`` with ``(x0, S^t0 alpha)`` in the set, ``alpha`` in W_eps.

    Raises Infeasible when ``x0`` admits no admissible reference.
    """
    S = None if h is None else s_power(h, t0)[0]
    G, g = reference_polygon(mset, x0, S)
    try:
        return min_norm_point_2d(np.asarray(r0, dtype=float), G, backoff(mset, g), tol=1e-12)
    except Infeasible as exc:
        raise Infeasible(f"state {np.asarray(x0).tolist()} admits no admissible reference") from exc


def phi_rows(mset: McaiSet, x_t, h: float, t: int):
    """Constraint rows ``(G, g)`` on the reference (time-0 frame) at time ``t``."""
    return reference_polygon(mset, x_t, s_power(h, t)[0])


def solve_phi(mset: McaiSet, x_t, r0, alpha_prev, t: int, h: float, margin: float = 0.0) -> float:
    """Largest ``phi`` in [0, 1] keeping ``alpha_prev + phi (r0 - alpha_prev)`` admissible.

    Every row is affine in ``phi``, so the LP reduces to a minimum of ratios.
    ``margin`` backs the answer off the set rows by that much slack; the rate
    interval rows are kept exact.
    """
    G, g = phi_rows(mset, x_t, h, t)
    a = np.asarray(alpha_prev, dtype=float)
    d = np.asarray(r0, dtype=float) - a
    slack = g - G @ a
    if np.any(slack < -INVARIANT_TOL):
        raise InvariantBroken(f"previous reference infeasible at t={t} (min slack {slack.min():.3e})")
    rate = G @ d
    slack = np.maximum(backoff(mset, slack, margin), 0.0)
    up = rate > 0
    if not np.any(up):
        return 1.0
    return float(min(1.0, np.min(slack[up] / rate[up])))


def governor_start(state: GovernorState, mset: McaiSet, sol: RegulatorSolution, x_t, r0, t: int):
    """Activate the governor at time ``t`` and return ``(alpha, u)``."""
    h = sol.ref.h
    alpha = init_alpha(mset, x_t, r0, t, h)
    state.alpha = alpha
    state.t0 = t
    state.mu, state.phi, state.gate = 0.0, float("nan"), False
    return _finish(state, sol, x_t, t)


def governor_step(state: GovernorState, mset: McaiSet, sol: RegulatorSolution, x_t, r0, t: int):
    """One pass of the governor at time ``t > t0``; returns ``(alpha, u)``."""
    if not state.active:
        raise NotInitialized("governor_start must be called first")
    if state.t_last is None or t != state.t_last + 1:
        raise InvariantBroken(f"governor stepped at t={t} after t={state.t_last}")
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape != (sol.agent.n,):
        raise DimensionMismatch("state has the wrong size")
    r0 = np.asarray(r0, dtype=float)
    h = sol.ref.h
    a_prev = state.alpha
    S_prev = s_power(h, t - 1)[0]
    xt_prev = state.x_prev - sol.Pi @ (S_prev @ a_prev)
    x_dag = sol.AK @ xt_prev
    gate = in_tilde_delta(mset, x_dag, a_prev[1], use_delta=True)
    if gate:
        phi = solve_phi(mset, x_t, r0, a_prev, t, h, margin=FEAS_MARGIN)
        mu = phi
    else:
        phi, mu = float("nan"), 0.0
    state.alpha = a_prev + mu * (r0 - a_prev)
    state.alpha_prev = a_prev
    state.mu, state.phi, state.gate = mu, phi, gate
    return _finish(state, sol, x_t, t)


def _finish(state: GovernorState, sol: RegulatorSolution, x_t, t: int):
    x_t = np.asarray(x_t, dtype=float)
    u = sol.K @ x_t + sol.L @ (s_power(sol.ref.h, t)[0] @ state.alpha)
    state.x_prev = x_t.copy()
    state.t_last = t
    state.history.append(StepRecord(t, state.mu, state.phi, state.gate,
                                    tuple(state.alpha), tuple(u)))
    return state.alpha.copy(), u


class ReferenceGovernor:
    """Stateful convenience wrapper: ``start`` once, then ``step`` every sample."""

    def __init__(self, sol: RegulatorSolution, mset: McaiSet):
        self.sol = sol
        self.mset = mset
        self.state = GovernorState()

    @property
    def active(self) -> bool:
        return self.state.active

    def start(self, x, r0, t: int = 0):
        return governor_start(self.state, self.mset, self.sol, x, r0, t)

    def step(self, x, r0, t: int):
        return governor_step(self.state, self.mset, self.sol, x, r0, t)
