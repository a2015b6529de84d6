"""Maximal constraint-admissible invariant set of the agent/reference loop.

In the shifted coordinates ``x~ = x - Pi w`` the closed loop splits into the
stable part ``x~+ = (A + B K) x~`` and the constant rate ``w2+ = w2``; the
input is ``u = K x~ + Gamma2 w2``.  The set ``{(x~, w2)}`` keeping ``u`` in ``U``
forever is a polytope that is computed by accumulating constraints one step
at a time until the next step adds nothing.  The steady-state rows
``G_U Gamma2 w2 <= 1 - eps`` are tightened by ``eps`` so that the accumulation
terminates after finitely many steps; the stored set keeps them at rhs 1 and
the tightening lives in the rate interval ``W_eps`` (``w2_bounds``).  Every
point used by the governor has its rate in ``W_eps``, where the stored set is
exactly invariant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInterior,
    EmptyInterval,
    HorizonExceeded,
    Infeasible,
    Unbounded,
)
from .numerics import min_norm_point_2d
from .polytope import ROW_NORM_FLOOR, HPolytope
from .regulator import RegulatorSolution

# Rows of step k+1 count as implied only with this much room to spare, which
# makes the computed set invariant without relying on LP round-off.
DETERMINATION_MARGIN = 1e-10
# Backoff applied to the boundary by the 2-D projections.
FEAS_MARGIN = 1e-10

DEFAULT_EPS = 0.01
DEFAULT_DELTA = 0.005
DEFAULT_MAX_HORIZON = 1000


@dataclass(frozen=True, eq=False)
class McaiSet:
    """The invariant set in shifted (``tilde``) and original coordinates.

    ``Hx_t`` / ``Hw_t`` hold the shifted rows ``Hx_t x~ + Hw_t w2 <= 1``;
    ``Hx`` / ``Hw`` are the lifted rows over ``(x, w)``.
    """

    Hx_t: np.ndarray
    Hw_t: np.ndarray
    Pi: np.ndarray
    AK: np.ndarray
    eps: float
    delta: float
    t_star: int
    w2_bounds_raw: tuple[float, float]
    w2_bounds: tuple[float, float]

    @property
    def n(self) -> int:
        return self.Hx_t.shape[1]

    @property
    def n_rows(self) -> int:
        return self.Hx_t.shape[0]

    @property
    def Hx(self) -> np.ndarray:
        return self.Hx_t

    @property
    def Hw(self) -> np.ndarray:
        return np.column_stack([-self.Hx_t @ self.Pi[:, 0], self.Hw_t - self.Hx_t @ self.Pi[:, 1]])

    @property
    def tilde(self) -> HPolytope:
        return HPolytope(np.column_stack([self.Hx_t, self.Hw_t]), np.ones(self.n_rows))

    @property
    def tilde_eps(self) -> HPolytope:
        """The shifted set with the rate restricted to ``W_eps``."""
        lo, hi = self.w2_bounds
        rows, rhs = [], []
        e = np.zeros(self.n + 1)
        e[-1] = 1.0
        if np.isfinite(hi):
            rows.append(e)
            rhs.append(hi)
        if np.isfinite(lo):
            rows.append(-e)
            rhs.append(-lo)
        P = self.tilde
        return P.intersect(np.array(rows), np.array(rhs)) if rows else P

    # -- serialisation ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "rgconsensus.mcai/1",
            "n": self.n,
            "rows": self.n_rows,
            "Hx_tilde": self.Hx_t.tolist(),
            "Hw_tilde": self.Hw_t.tolist(),
            "rhs": 1.0,
            "Pi": self.Pi.tolist(),
            "AK": self.AK.tolist(),
            "eps": self.eps,
            "delta": self.delta,
            "t_star": self.t_star,
            "w2_bounds_raw": list(self.w2_bounds_raw),
            "w2_bounds": list(self.w2_bounds),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "McaiSet":
        if d.get("format") != "rgconsensus.mcai/1":
            raise ValueError(f"unknown set format {d.get('format')!r}")
        n = int(d["n"])
        return cls(
            Hx_t=np.asarray(d["Hx_tilde"], dtype=float).reshape(-1, n),
            Hw_t=np.asarray(d["Hw_tilde"], dtype=float).reshape(-1),
            Pi=np.asarray(d["Pi"], dtype=float).reshape(n, 2),
            AK=np.asarray(d["AK"], dtype=float).reshape(n, n),
            eps=float(d["eps"]),
            delta=float(d["delta"]),
            t_star=int(d["t_star"]),
            w2_bounds_raw=tuple(d["w2_bounds_raw"]),
            w2_bounds=tuple(d["w2_bounds"]),
        )

    @classmethod
    def loads(cls, text: str) -> "McaiSet":
        return cls.from_dict(json.loads(text))


def constraint_rows(sol: RegulatorSolution, k: int) -> np.ndarray:
    """Rows over ``(x~, w2)`` that keep ``u(k)`` in ``U`` (rhs 1)."""
    GU = sol.agent.U.G
    KA = sol.K @ np.linalg.matrix_power(sol.AK, k)
    return GU @ np.hstack([KA, sol.Gamma2.reshape(-1, 1)])


def steady_state_rows(sol: RegulatorSolution) -> np.ndarray:
    GU = sol.agent.U.G
    return np.hstack([np.zeros((GU.shape[0], sol.agent.n)), GU @ sol.Gamma2.reshape(-1, 1)])


def compute_mcai(
    sol: RegulatorSolution,
    eps: float = DEFAULT_EPS,
    delta: float = DEFAULT_DELTA,
    max_horizon: int = DEFAULT_MAX_HORIZON,
) -> McaiSet:
    """Accumulate step constraints until the next step is implied.

    The accumulation runs with the steady-state rows tightened to ``1 - eps``;
    ``t_star`` is the first ``k`` for which every row of step ``k + 1`` is
    redundant with respect to rows ``0..k`` and those tightened rows.  Step rows
    that are implied by the rest are pruned.  The stored set keeps the
    steady-state rows at rhs 1 and carries the tightening separately as the
    rate interval ``w2_bounds``; intersected with that interval it is exactly
    the tightened accumulated polytope.
    """
    if not eps > 0:
        raise HorizonExceeded(f"eps = {eps}: without tightening the accumulation never terminates")
    if not 0 < delta < eps < 1:
        raise ValueError(f"need 0 < delta < eps < 1, got delta={delta}, eps={eps}")
    n = sol.agent.n
    ss = steady_state_rows(sol)
    ss = ss[np.linalg.norm(ss, axis=1) > ROW_NORM_FLOOR]
    n_ss = ss.shape[0]
    rows0 = constraint_rows(sol, 0)
    P = HPolytope(np.vstack([ss, rows0]),
                  np.concatenate([np.full(n_ss, 1.0 - eps), np.ones(rows0.shape[0])]))
    if P.n_rows != n_ss + rows0.shape[0]:
        raise EmptyInterior("input constraint rows vanish under the feedback")
    k = 0
    while True:
        nxt = constraint_rows(sol, k + 1)
        new = [r for r in nxt if not P.is_redundant(r, 1.0, tol=-DETERMINATION_MARGIN)]
        if not new:
            break
        k += 1
        if k > max_horizon:
            raise HorizonExceeded(f"not determined within {max_horizon} steps (eps={eps})")
        P = P.intersect(np.array(new), np.ones(len(new)))

    if np.any(P.g <= 0) or not P.contains(np.zeros(n + 1), slack=1e-12):
        raise EmptyInterior("origin is not strictly inside the admissible set")
    keep = P.essential_rows(tol=1e-12)
    keep[:n_ss] = True
    steps = P.G[n_ss:][keep[n_ss:]]
    tightened = HPolytope(P.G[keep], P.g[keep])
    try:
        w_lo, w_hi = tightened.coordinate_bounds(n)
    except Unbounded:
        w_lo, w_hi = -np.inf, np.inf

    stored = np.vstack([steps, ss])
    try:
        raw_lo, raw_hi = HPolytope(stored, np.ones(stored.shape[0])).coordinate_bounds(n)
    except Unbounded:
        raw_lo, raw_hi = -np.inf, np.inf

    return McaiSet(
        Hx_t=stored[:, :n].copy(),
        Hw_t=stored[:, n].copy(),
        Pi=sol.Pi.copy(),
        AK=sol.AK.copy(),
        eps=float(eps),
        delta=float(delta),
        t_star=k,
        w2_bounds_raw=(float(raw_lo), float(raw_hi)),
        w2_bounds=(float(w_lo), float(w_hi)),
    )


def observability_basis(sol: RegulatorSolution) -> np.ndarray:
    """Map ``(x~, w2) -> (K x~, K A_K x~, ..., K A_K^{n-1} x~, w2)``.

    Invertible when ``(A_K, K)`` is observable.  The set's rows are close to
    axis-aligned in these coordinates, which makes box sampling efficient.
    """
    n = sol.agent.n
    T = np.zeros((n + 1, n + 1))
    T[:n, :n] = np.vstack([sol.K @ np.linalg.matrix_power(sol.AK, k) for k in range(n)])[:n]
    T[n, n] = 1.0
    return T


def sampling_box(P: HPolytope, T: np.ndarray, grow: float = 0.0) -> np.ndarray:
    """Bounding box of ``P`` in the coordinates ``y = T z``, widened by ``grow``."""
    Q = HPolytope(P.G @ np.linalg.inv(T), P.g)
    box = np.array([Q.coordinate_bounds(k) for k in range(P.dim)])
    w = box[:, 1] - box[:, 0]
    return np.column_stack([box[:, 0] - grow * w, box[:, 1] + grow * w])


def sample_members(P: HPolytope, count: int, rng, T=None, slack: float = 0.0,
                   max_draws: int = 2_000_000) -> np.ndarray:
    """Uniform points of ``P`` by rejection from its bounding box in ``y = T z``."""
    T = np.eye(P.dim) if T is None else np.asarray(T, dtype=float)
    box = sampling_box(P, T)
    Tinv = np.linalg.inv(T)
    out, drawn = [], 0
    while sum(len(o) for o in out) < count:
        Z = rng.uniform(box[:, 0], box[:, 1], size=(4096, P.dim)) @ Tinv.T
        drawn += Z.shape[0]
        out.append(Z[P.contains_many(Z, slack=slack)])
        if drawn > max_draws:
            raise RuntimeError(f"rejection sampling accepted too few of {drawn} draws")
    return np.concatenate(out)[:count]


def _check(mset: McaiSet, x, size, what):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != size:
        raise DimensionMismatch(f"{what} has size {x.shape[-1]}, expected {size}")
    return x


def tilde_margins(mset: McaiSet, xt, w2) -> np.ndarray:
    xt = _check(mset, xt, mset.n, "x~")
    return 1.0 - (xt @ mset.Hx_t.T + np.asarray(w2, dtype=float)[..., None] * mset.Hw_t)


def in_tilde_delta(mset: McaiSet, xt, w2, use_delta: bool = False) -> bool:
    slack = mset.delta if use_delta else 0.0
    return bool(np.all(tilde_margins(mset, xt, w2) >= slack))


def in_O_inf(mset: McaiSet, x, w, tol: float = 0.0) -> bool:
    x = _check(mset, x, mset.n, "x")
    w = _check(mset, w, 2, "w")
    return bool(np.all(mset.Hx @ x + mset.Hw @ w <= 1.0 + tol))


def w_eps_interval(mset: McaiSet) -> tuple[float, float]:
    lo, hi = mset.w2_bounds
    if not hi - lo > 1e-12:
        raise EmptyInterval(f"rate interval [{lo}, {hi}] is empty")
    return lo, hi


def reference_polygon(mset: McaiSet, x, S=None):
    """Rows ``(G, g)`` over ``w`` for ``(x, S w)`` in the set with ``w`` in W_eps."""
    x = _check(mset, x, mset.n, "x")
    Hw = mset.Hw if S is None else mset.Hw @ S
    lo, hi = w_eps_interval(mset)
    rows, rhs = [Hw], [1.0 - mset.Hx @ x]
    if np.isfinite(hi):
        rows.append([[0.0, 1.0]])
        rhs.append([hi])
    if np.isfinite(lo):
        rows.append([[0.0, -1.0]])
        rhs.append([-lo])
    return np.vstack(rows), np.concatenate(rhs)


def backoff(mset: McaiSet, g, margin: float = FEAS_MARGIN) -> np.ndarray:
    """Shrink the set rows of a ``reference_polygon`` rhs; interval rows stay exact."""
    g = np.array(g, dtype=float)
    g[:mset.n_rows] -= margin
    return g


def x_in_Xinf(mset: McaiSet, x, center=None):
    """A reference ``w`` with ``(x, w)`` in the set (and ``w2`` in W_eps), or None.

    The witness is the point of the feasible reference polygon nearest to
    ``center`` (default: origin).
    """
    G, g = reference_polygon(mset, x)
    c = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    try:
        return min_norm_point_2d(c, G, backoff(mset, g), tol=1e-12)
    except Infeasible:
        return None
