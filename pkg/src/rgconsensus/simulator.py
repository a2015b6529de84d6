"""Closed-loop simulation of all agents with the consensus exchange.

Each step, every agent either runs its reference governor or (while its state
admits no admissible reference) applies zero input and waits; afterwards the
agents exchange reference states and apply the projected consensus update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionFailure, ConstraintViolation, Infeasible, InvariantBroken, NotConverged
from .governor import ReferenceGovernor, s_power
from .mcai import McaiSet, compute_mcai, w_eps_interval, x_in_Xinf
from .network import (
    GraphSchedule,
    WeightedDigraph,
    check_uniform_connectivity,
    consensus_step,
    consensus_value_estimate,
    intervals_intersection,
    spread,
)
from .regulator import AgentModel, ReferenceModel, RegulatorSolution, solve_regulator

log = logging.getLogger(__name__)

MODE_GOVERNED = 0
MODE_WAITING = 1


@dataclass
class AgentSetup:
    agent: AgentModel
    sol: RegulatorSolution
    mset: McaiSet
    x0: np.ndarray
    w0: np.ndarray

    @classmethod
    def build(cls, agent, ref, x0, w0, eps=0.01, delta=0.005, max_horizon=1000):
        sol = solve_regulator(agent, ref)
        mset = compute_mcai(sol, eps, delta, max_horizon)
        return cls(agent, sol, mset, np.asarray(x0, dtype=float), np.asarray(w0, dtype=float))

    @property
    def interval(self) -> tuple[float, float]:
        return w_eps_interval(self.mset)


@dataclass
class Scenario:
    agents: list
    ref: ReferenceModel
    schedule: GraphSchedule
    horizon: int = 500
    settle_steps: int = 20
    spread_tol: float = 1e-6
    seed: int = 0
    name: str = ""

    def validate(self) -> None:
        if len(self.agents) != self.schedule.n_nodes:
            raise AssumptionFailure(f"{len(self.agents)} agents but graphs have {self.schedule.n_nodes} nodes")
        for a in self.agents:
            if a.sol.ref is not self.ref and (a.sol.ref.h != self.ref.h
                                              or not np.array_equal(a.sol.ref.Q, self.ref.Q)):
                raise AssumptionFailure("agents do not share the same reference model")
        lo, hi = intervals_intersection([a.interval for a in self.agents])
        if not lo < hi:
            raise AssumptionFailure(f"rate intervals have empty intersection ({lo:.4g} > {hi:.4g})")


@dataclass
class AgentTrace:
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    y_r: np.ndarray
    w: np.ndarray
    z: np.ndarray
    alpha: np.ndarray
    mu: np.ndarray
    phi: np.ndarray
    gate: np.ndarray
    mode: np.ndarray
    entry_step: int | None

    @property
    def error(self) -> np.ndarray:
        """Tracking error ``y - y_r`` per step."""
        return self.y - self.y_r


@dataclass
class SimTrace:
    h: float
    Q: np.ndarray
    agents: list
    z_spread: np.ndarray
    diagnostics: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return self.z_spread.size

    def z_stack(self) -> np.ndarray:
        return np.stack([a.z for a in self.agents], axis=1)


def run(scenario: Scenario) -> SimTrace:
    scenario.validate()
    ref, sched, T = scenario.ref, scenario.schedule, scenario.horizon
    N = len(scenario.agents)
    S = ref.S
    intervals = [a.interval for a in scenario.agents]
    govs = [ReferenceGovernor(a.sol, a.mset) for a in scenario.agents]
    xs = [a.x0.copy() for a in scenario.agents]
    W = np.array([a.w0 for a in scenario.agents], dtype=float)

    buf = []
    for a in scenario.agents:
        n, p, q = a.agent.n, a.agent.p, ref.q
        buf.append(dict(
            x=np.zeros((T, n)), u=np.zeros((T, p)), y=np.zeros((T, q)), y_r=np.zeros((T, q)),
            w=np.zeros((T, 2)), z=np.zeros((T, 2)), alpha=np.full((T, 2), np.nan),
            mu=np.zeros(T), phi=np.full(T, np.nan), gate=np.zeros(T, dtype=bool),
            mode=np.zeros(T, dtype=np.int8), entry_step=None,
        ))
    z_spread = np.zeros(T)

    for t in range(T):
        S_inv = s_power(ref.h, t)[1]
        Z = W @ S_inv.T
        for i, (setup, gov) in enumerate(zip(scenario.agents, govs)):
            x, r0, b = xs[i], Z[i], buf[i]
            if gov.active:
                alpha, u = gov.step(x, r0, t)
                b["mode"][t] = MODE_GOVERNED
            elif x_in_Xinf(setup.mset, x, center=W[i]) is not None:
                try:
                    alpha, u = gov.start(x, r0, t)
                except Infeasible as exc:
                    raise InvariantBroken(f"agent {i}: admissible state but no start reference") from exc
                b["entry_step"] = t
                b["mode"][t] = MODE_GOVERNED
            else:
                alpha, u = None, np.zeros(setup.agent.p)
                b["mode"][t] = MODE_WAITING
            if not setup.agent.U.contains(u):
                raise ConstraintViolation(f"agent {i} step {t}: u = {u} outside U")
            b["x"][t], b["u"][t] = x, u
            b["y"][t] = setup.agent.C @ x
            b["y_r"][t] = ref.Q @ W[i]
            b["w"][t], b["z"][t] = W[i], r0
            if alpha is not None:
                st = gov.state
                b["alpha"][t], b["mu"][t], b["phi"][t], b["gate"][t] = alpha, st.mu, st.phi, st.gate
            xs[i] = setup.agent.A @ x + setup.agent.B @ u
        z_spread[t] = spread(Z)
        W = consensus_step(W, sched.perron_at(t), S, intervals)

    agents = []
    diagnostics = []
    for i, b in enumerate(buf):
        if b["entry_step"] is None:
            msg = f"agent {i} never reached an admissible state within {T} steps"
            log.warning(msg)
            diagnostics.append(msg)
        agents.append(AgentTrace(**b))
    return SimTrace(h=ref.h, Q=ref.Q, agents=agents, z_spread=z_spread, diagnostics=diagnostics)


# -- metrics ---------------------------------------------------------------------

def settle_step(trace: AgentTrace, run_length: int = 20, tol: float = 1e-12) -> int | None:
    """First step ``t`` with ``alpha`` equal to ``r0`` and unchanged over ``t .. t+run_length-1``."""
    a, z = trace.alpha, trace.z
    T = a.shape[0]
    on = np.max(np.abs(a - z), axis=1) < tol  # NaN rows compare False
    still = np.ones(T, dtype=bool)
    still[1:] = np.max(np.abs(a[1:] - a[:-1]), axis=1) < tol
    count = 0
    for t in range(T):
        if on[t] and (count == 0 or still[t]):
            count += 1
        else:
            count = 1 if on[t] else 0
        if count >= run_length:
            return t - run_length + 1
    return None


def tail_log_slope(err: np.ndarray, window: int = 50, floor: float = 1e-9) -> float:
    """Least-squares slope of ``log err`` over the last ``window`` samples above ``floor``.

    The window ends where the error drops below ``floor`` for good (round-off
    beyond that point carries no information), or at the end of the trace.
    Returns ``-inf`` when the error is below ``floor`` throughout.
    """
    e = np.asarray(err, dtype=float)
    above = np.flatnonzero(e > floor)
    if above.size == 0:
        return -np.inf
    end = above[-1] + 1
    begin = max(0, end - window)
    seg = e[begin:end]
    keep = seg > floor
    if keep.sum() < 3:
        return -np.inf
    t = np.arange(begin, end, dtype=float)[keep]
    return float(np.polyfit(t, np.log(seg[keep]), 1)[0])


@dataclass
class MetricsReport:
    u_violations: int
    min_u_slack: float
    settle_steps: list
    entry_steps: list
    final_z_spread: float
    spread_step: int | None
    omega_bar0: list | None
    omega_bar0_in_intersection: bool
    tail_slopes: list
    state_tail_slopes: list
    a10_ok: bool
    intersection: tuple
    passes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.passes.values())

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not np.isfinite(v):
                return str(v)
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (np.floating, np.integer, np.bool_)):
                return clean(v.item())
            return v
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["ok"] = self.ok
        return clean(d)


def metrics(trace: SimTrace, scenario: Scenario) -> MetricsReport:
    intervals = []
    for a in scenario.agents:
        try:
            intervals.append(a.interval)
        except Exception:
            intervals.append((np.nan, np.nan))
    lo, hi = intervals_intersection(intervals)
    a10 = bool(lo < hi)

    slacks = []
    for setup, at in zip(scenario.agents, trace.agents):
        slacks.append(np.min(setup.agent.U.margins(at.u)))
    min_slack = float(min(slacks))
    violations = int(sum(np.sum(np.any(setup.agent.U.margins(at.u) < 0, axis=1))
                         for setup, at in zip(scenario.agents, trace.agents)))

    settles = [settle_step(at, scenario.settle_steps) for at in trace.agents]
    entries = [at.entry_step for at in trace.agents]
    below = np.flatnonzero(trace.z_spread <= scenario.spread_tol)
    spread_step = None
    for k in below:
        if np.all(trace.z_spread[k:] <= scenario.spread_tol):
            spread_step = int(k)
            break

    try:
        wbar = consensus_value_estimate(trace.z_stack(), scenario.spread_tol)
    except NotConverged:
        wbar = None
    in_int = bool(wbar is not None and a10 and lo - scenario.spread_tol <= wbar[1] <= hi + scenario.spread_tol)

    slopes, state_slopes = [], []
    if wbar is not None:
        t = np.arange(trace.steps)
        ref_out = (np.outer(wbar[0] + trace.h * t * wbar[1], trace.Q[:, 0])
                   + np.outer(np.full(t.size, wbar[1]), trace.Q[:, 1]))
        w_t = np.column_stack([wbar[0] + trace.h * t * wbar[1], np.full(t.size, wbar[1])])
        for setup, at in zip(scenario.agents, trace.agents):
            slopes.append(tail_log_slope(np.linalg.norm(at.y - ref_out, axis=1)))
            x_err = at.x - w_t @ setup.sol.Pi.T
            state_slopes.append(tail_log_slope(np.linalg.norm(x_err, axis=1)))

    rep = MetricsReport(
        u_violations=violations,
        min_u_slack=min_slack,
        settle_steps=settles,
        entry_steps=entries,
        final_z_spread=float(trace.z_spread[-1]),
        spread_step=spread_step,
        omega_bar0=None if wbar is None else [float(v) for v in wbar],
        omega_bar0_in_intersection=in_int,
        tail_slopes=slopes,
        state_tail_slopes=state_slopes,
        a10_ok=a10,
        intersection=(float(lo), float(hi)),
    )
    rep.passes = {
        "A10": a10,
        "constraints": violations == 0,
        "consensus": spread_step is not None,
        "settled": all(s is not None for s in settles),
        "omega_bar0_admissible": in_int,
        "tracking": bool(slopes) and all(s < 0 for s in slopes),
    }
    return rep


# -- scenario helpers ------------------------------------------------------------

def random_scenario(base: Scenario, seed: int, x_scale: float = 0.05, w_scale=(2.0, 0.05),
                    weight_jitter: float = 0.1, max_tries: int = 1000) -> Scenario:
    """Perturb the initial conditions and edge weights of ``base``.

    Each state gets relative Gaussian noise of size ``x_scale`` (plus the same
    absolute amount); when the base state admits a reference, draws are
    repeated until the perturbed one does too (a witness from ``x_in_Xinf``),
    otherwise the draw is kept and the agent waits as usual.  References get
    Gaussian noise ``w_scale`` per component.  Edge weights move uniformly by up
    to ``weight_jitter`` and stay valid.
    """
    rng = np.random.default_rng(seed)
    agents = []
    for a in base.agents:
        admissible = x_in_Xinf(a.mset, a.x0) is not None
        for _ in range(max_tries):
            x0 = a.x0 + rng.normal(size=a.x0.size) * x_scale * (1.0 + np.abs(a.x0))
            if not admissible or x_in_Xinf(a.mset, x0) is not None:
                break
        else:
            raise RuntimeError(f"no admissible perturbation of {a.x0.tolist()} in {max_tries} draws")
        w0 = a.w0 + rng.normal(size=2) * np.asarray(w_scale)
        agents.append(AgentSetup(a.agent, a.sol, a.mset, x0, w0))
    floor = base.schedule.weight_floor
    graphs = []
    for g in base.schedule.graphs:
        edges = {e: float(np.clip(w + rng.uniform(-weight_jitter, weight_jitter), floor + 1e-3, 1.0))
                 for e, w in g.edges.items()}
        # keep each row stochastic
        rows = {}
        for (i, j), w in edges.items():
            rows.setdefault(i, []).append((j, w))
        for i, lst in rows.items():
            total = sum(w for _, w in lst)
            if total > 1.0:
                for j, w in lst:
                    edges[(i, j)] = max(w / total * 0.95, floor + 1e-3)
        graphs.append(WeightedDigraph(g.n_nodes, edges))
    sched = GraphSchedule(graphs, base.schedule.kind, base.schedule.period, base.schedule.timeline,
                          base.schedule.window, floor)
    return Scenario(agents, base.ref, sched, base.horizon, base.settle_steps, base.spread_tol, seed,
                    f"{base.name}-rand{seed}")


def connectivity_ok(scenario: Scenario) -> bool:
    return check_uniform_connectivity(scenario.schedule).ok
