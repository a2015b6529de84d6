"""Agent/reference models, assumption checks and the regulator equations.

The reference generator is the 2x2 Jordan block ``S = [[1, h], [0, 1]]``; a
solution ``(Pi, Gamma)`` of

    A Pi - Pi S = -B Gamma,    C Pi = Q

is built with ``Gamma[:, 0] == 0`` so that the feed-forward term stays bounded
while the first reference state grows linearly in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import (
    DimensionMismatch,
    NoConvergence,
    NoUnitEigenvector,
    RegulatorInfeasible,
    RgError,
    ScalingImpossible,
)
from .polytope import HPolytope

RESIDUAL_TOL = 1e-8
RANK_TOL = 1e-9


def _mat(a, rows=None, cols=None) -> np.ndarray:
    m = np.atleast_2d(np.asarray(a, dtype=float))
    if rows is not None and cols is not None:
        m = m.reshape(rows, cols)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


@dataclass(frozen=True, eq=False)
class ReferenceModel:
    h: float
    Q: np.ndarray = field(default_factory=lambda: np.array([[1.0, 0.0]]))

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"step h must be positive, got {self.h}")
        Q = _mat(self.Q)
        if Q.shape[1] != 2:
            raise DimensionMismatch("Q must have two columns")
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "Q", Q)

    @property
    def S(self) -> np.ndarray:
        return np.array([[1.0, self.h], [0.0, 1.0]])

    @property
    def q(self) -> int:
        return self.Q.shape[0]


@dataclass(frozen=True, eq=False)
class AgentModel:
    """``x+ = A x + B u``, ``y = C x``, ``u`` in the polytope ``U``.

    ``K`` is an optional explicit state-feedback gain; when omitted an LQR gain
    with identity weights is synthesised.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    U: HPolytope
    K: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        A = _mat(self.A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        B = np.asarray(self.B, dtype=float)
        B = B.reshape(n, -1) if B.ndim < 2 else _mat(B)
        C = _mat(self.C)
        if B.shape[0] != n or C.shape[1] != n:
            raise DimensionMismatch("A, B, C have inconsistent sizes")
        if self.U.dim != B.shape[1]:
            raise DimensionMismatch(f"U has dimension {self.U.dim}, inputs {B.shape[1]}")
        U = self.U.normalize()
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "U", U)
        if self.K is not None:
            object.__setattr__(self, "K", _mat(self.K, B.shape[1], n))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class RegulatorSolution:
    agent: AgentModel
    ref: ReferenceModel
    Pi: np.ndarray
    Gamma: np.ndarray
    K: np.ndarray
    L: np.ndarray
    xi: np.ndarray
    gamma: float

    @property
    def AK(self) -> np.ndarray:
        return self.agent.A + self.agent.B @ self.K

    @property
    def Pi1(self) -> np.ndarray:
        return self.Pi[:, 0]

    @property
    def Pi2(self) -> np.ndarray:
        return self.Pi[:, 1]

    @property
    def Gamma2(self) -> np.ndarray:
        return self.Gamma[:, 1]

    def residuals(self) -> tuple[float, float]:
        return regulator_residuals(self.agent, self.ref, self.Pi, self.Gamma)


def regulator_residuals(agent: AgentModel, ref: ReferenceModel, Pi, Gamma) -> tuple[float, float]:
    """Infinity norms of ``A Pi - Pi S + B Gamma`` and ``C Pi - Q``."""
    Pi = _mat(Pi, agent.n, 2)
    Gamma = _mat(Gamma, agent.p, 2)
    r1 = agent.A @ Pi - Pi @ ref.S + agent.B @ Gamma
    r2 = agent.C @ Pi - ref.Q
    return float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))


# -- assumption checks ---------------------------------------------------------

@dataclass
class AssumptionReport:
    results: dict[str, bool] = field(default_factory=dict)
    details: dict[str, str] = field(default_factory=dict)

    def record(self, key: str, ok: bool, detail: str = "") -> None:
        self.results[key] = bool(ok)
        self.details[key] = detail

    @property
    def ok(self) -> bool:
        return all(self.results.values())

    def failed(self) -> list[str]:
        return [k for k, v in self.results.items() if not v]


def _rank(M, tol=RANK_TOL) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > tol * max(1.0, s[0])))


def is_stabilizable(A, B) -> bool:
    n = A.shape[0]
    for lam in numerics.eigenvalues(A):
        if abs(lam) >= 1.0 - 1e-9 and _rank(np.hstack([A - lam * np.eye(n), B])) < n:
            return False
    return True


def is_observable(A, C) -> bool:
    n = A.shape[0]
    return all(_rank(np.vstack([A - lam * np.eye(n), C])) == n for lam in numerics.eigenvalues(A))


def check_assumptions(agent: AgentModel, ref: ReferenceModel) -> AssumptionReport:
    """Evaluate the standing assumptions for one agent against the reference.

    Keys: ``A2-stabilizable``, ``A2-observable``, ``A4``, ``A5``, ``A6``,
    ``A7``, ``A8``, ``A9``, ``A11``.  A9 needs a regulator solution and a gain;
    if those cannot be built it is reported as failed with the reason.
    """
    rep = AssumptionReport()
    A, B, C, n = agent.A, agent.B, agent.C, agent.n
    rep.record("A2-stabilizable", is_stabilizable(A, B))
    rep.record("A2-observable", is_observable(A, C))
    U = agent.U
    try:
        bounded = all(np.isfinite(U.coordinate_bounds(k)).all() for k in range(U.dim))
    except RgError:
        bounded = False
    rep.record("A4", bounded and np.all(U.g > 0), "U bounded, origin interior")
    rep.record("A5", is_observable(ref.S, ref.Q))
    rep.record("A6", ref.h > 0, f"h = {ref.h}")
    q = C.shape[0]
    M = np.block([[A - np.eye(n), B], [C, np.zeros((q, agent.p))]])
    rep.record("A7", _rank(M) == n + q, "full row rank at lambda = 1")
    mult = numerics.unit_eigenvalue_multiplicity(A)
    rep.record("A8", mult >= 1, f"eigenvalue 1 multiplicity {mult}")
    try:
        sol = solve_regulator(agent, ref)
        Ak = sol.AK
        Aa = np.block([[Ak, np.zeros((n, 1))], [np.zeros((1, n)), np.ones((1, 1))]])
        Ca = np.hstack([sol.K, sol.Gamma2.reshape(-1, 1)])
        rep.record("A9", is_observable(Aa, Ca))
    except (RgError, np.linalg.LinAlgError) as exc:
        rep.record("A9", False, f"regulator unavailable: {exc}")
    rep.record("A11", numerics.is_lyapunov_stable(A) and mult == 1,
               "Lyapunov stable, simple eigenvalue 1")
    return rep


# -- regulator equations -------------------------------------------------------

def compatible_output_map(agent: AgentModel, Q2) -> np.ndarray:
    """Output map ``Q = [C xi, Q2]`` for which a ``Gamma[:, 0] = 0`` solution exists."""
    xi = numerics.nullspace_vector(agent.A - np.eye(agent.n))
    if xi is None:
        raise NoUnitEigenvector("A has no eigenvalue 1")
    return np.column_stack([agent.C @ xi, np.asarray(Q2, dtype=float).reshape(-1)])


def solve_regulator(agent: AgentModel, ref: ReferenceModel) -> RegulatorSolution:
    A, B, C, n, p = agent.A, agent.B, agent.C, agent.n, agent.p
    if C.shape[0] != ref.q:
        raise DimensionMismatch(f"C has {C.shape[0]} outputs, Q has {ref.q}")
    xi = numerics.nullspace_vector(A - np.eye(n))
    if xi is None:
        raise NoUnitEigenvector("A has no eigenvalue 1")
    Cxi = C @ xi
    if abs(Cxi[0]) < 1e-10 * max(1.0, np.linalg.norm(C)):
        raise ScalingImpossible("C xi = 0; (A, C) is numerically unobservable at 1")
    gamma = float(ref.Q[0, 0] / Cxi[0])
    Pi1 = gamma * xi
    if np.max(np.abs(C @ Pi1 - ref.Q[:, 0])) > RESIDUAL_TOL:
        raise RegulatorInfeasible("Q[:, 0] is not a multiple of C xi; see compatible_output_map")

    q = ref.q
    M = np.block([[A - np.eye(n), B], [C, np.zeros((q, p))]])
    rhs = np.concatenate([Pi1 * ref.h, ref.Q[:, 1]])
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if np.max(np.abs(M @ sol - rhs)) > RESIDUAL_TOL:
        raise RegulatorInfeasible("second regulator column has no exact solution")
    Pi = np.column_stack([Pi1, sol[:n]])
    Gamma = np.column_stack([np.zeros(p), sol[n:]])

    if agent.K is not None:
        K = agent.K
    else:
        K = numerics.solve_dare(A, B)
    if not numerics.is_schur(A + B @ K):
        raise NoConvergence("A + B K is not Schur")
    L = Gamma - K @ Pi
    return RegulatorSolution(agent=agent, ref=ref, Pi=Pi, Gamma=Gamma, K=K, L=L, xi=xi, gamma=gamma)


def control_law(sol: RegulatorSolution, x, w) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape[-1] != sol.agent.n or w.shape[-1] != 2:
        raise DimensionMismatch("state or reference has the wrong size")
    return sol.K @ x + sol.L @ w
