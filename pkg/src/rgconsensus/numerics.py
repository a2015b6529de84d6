"""Small dense linear-algebra and optimisation kernels.

Everything here works on tiny problems (a handful of variables, a few hundred
rows at most), so the routines favour simple, deterministic algorithms over
speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, Infeasible, IterationLimit, NoConvergence, Unbounded

LP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LpProblem:
    """``maximize c @ x  subject to  G @ x <= g`` with optional box bounds.

    ``lb`` / ``ub`` may contain ``-inf`` / ``inf`` for free directions.
    """

    c: np.ndarray
    G: np.ndarray
    g: np.ndarray
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        G = np.asarray(self.G, dtype=float).reshape(-1, c.size)
        g = np.atleast_1d(np.asarray(self.g, dtype=float))
        if G.shape[0] != g.size:
            raise DimensionMismatch(f"G has {G.shape[0]} rows but g has {g.size} entries")
        if not np.all(np.isfinite(g)):
            raise ValueError("rhs must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "g", g)
        for name in ("lb", "ub"):
            val = getattr(self, name)
            if val is not None:
                val = np.broadcast_to(np.asarray(val, dtype=float), c.shape).copy()
                object.__setattr__(self, name, val)

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """Constraint rows with the finite box bounds folded in."""
        n = self.c.size
        rows, rhs = [self.G], [self.g]
        eye = np.eye(n)
        if self.ub is not None:
            m = np.isfinite(self.ub)
            rows.append(eye[m])
            rhs.append(self.ub[m])
        if self.lb is not None:
            m = np.isfinite(self.lb)
            rows.append(-eye[m])
            rhs.append(-self.lb[m])
        return np.vstack(rows), np.concatenate(rhs)


@dataclass(frozen=True, eq=False)
class LpResult:
    value: float
    x: np.ndarray
    iterations: int


def _pivot(T: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run_simplex(T, basis, ncols, max_iter, tol, count):
    """Bland-rule primal simplex on a tableau whose last row holds ``-c``.

    Only the first ``ncols`` columns may enter.  Returns the pivot count;
    raises Unbounded / IterationLimit.
    """
    m = T.shape[0] - 1
    while True:
        obj = T[-1, :ncols]
        candidates = np.flatnonzero(obj < -tol)
        if candidates.size == 0:
            return count
        if count >= max_iter:
            raise IterationLimit(f"simplex exceeded {max_iter} pivots")
        j = int(candidates[0])
        colj = T[:m, j]
        pos = colj > tol
        if not np.any(pos):
            raise Unbounded("objective unbounded above")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / colj[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, r, j)
        basis[r] = j
        count += 1


def solve_lp(p: LpProblem, tol: float = LP_TOL, max_iter: int | None = None) -> LpResult:
    """Maximise ``p.c @ x`` over ``{x : G x <= g}`` with a two-phase dense simplex.

    Variables are free; they are split as ``x = x+ - x-``.  Bland's rule is
    used for both entering and leaving choices so the result is deterministic
    and the method cannot cycle.

    Raises
    ------
    Infeasible, Unbounded, IterationLimit
    """
    G, g = p.stacked()
    m, n = G.shape
    neg = g < 0
    k = int(neg.sum())
    ncols = 2 * n + m + k
    if max_iter is None:
        max_iter = 10 * (m + ncols)

    T = np.zeros((m + 1, ncols + 1))
    sign = np.where(neg, -1.0, 1.0)
    T[:m, :n] = G * sign[:, None]
    T[:m, n:2 * n] = -G * sign[:, None]
    T[:m, 2 * n:2 * n + m] = np.diag(sign)
    T[:m, -1] = g * sign
    basis = [2 * n + i for i in range(m)]
    art_rows = np.flatnonzero(neg)
    for a, i in enumerate(art_rows):
        col = 2 * n + m + a
        T[i, col] = 1.0
        basis[i] = col

    count = 0
    if k:
        # phase 1: maximise -sum(artificials)
        T[-1, 2 * n + m:ncols] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        count = _run_simplex(T, basis, ncols, max_iter, tol, count)
        if T[-1, -1] < -tol * max(1.0, np.abs(g).max()):
            raise Infeasible("constraint set is empty")
        # drive artificials that are still basic (at zero level) out of the basis
        keep = np.ones(m + 1, dtype=bool)
        for i in range(m):
            if basis[i] >= 2 * n + m:
                nz = np.flatnonzero(np.abs(T[i, :2 * n + m]) > tol)
                if nz.size:
                    _pivot(T, i, int(nz[0]))
                    basis[i] = int(nz[0])
                else:
                    keep[i] = False
        T = np.delete(T, np.s_[2 * n + m:ncols], axis=1)[keep]
        basis = [b for b, kp in zip(basis, keep[:m]) if kp]
        ncols = 2 * n + m

    T[-1] = 0.0
    T[-1, :n] = -p.c
    T[-1, n:2 * n] = p.c
    for i, b in enumerate(basis):
        if T[-1, b] != 0.0:
            T[-1] -= T[-1, b] * T[i]
    count = _run_simplex(T, basis, ncols, max_iter, tol, count)

    y = np.zeros(ncols)
    for i, b in enumerate(basis):
        y[b] = T[i, -1]
    x = y[:n] - y[n:2 * n]
    return LpResult(value=float(p.c @ x), x=x, iterations=count)


def min_norm_point_2d(center, G, g, tol: float = 1e-9) -> np.ndarray:
    """Closest point to ``center`` in the polygon ``{z : G z <= g}``.

    Exact enumeration: the minimiser is the centre itself, the projection onto
    the boundary line of a violated row, or a vertex of the polygon.  All
    candidates are generated and the nearest feasible one is returned.
    """
    c = np.asarray(center, dtype=float).reshape(2)
    G = np.asarray(G, dtype=float).reshape(-1, 2)
    g = np.asarray(g, dtype=float).reshape(-1)
    if G.shape[0] != g.size:
        raise DimensionMismatch("row/rhs count mismatch")

    def feasible(P):
        return np.all(P @ G.T <= g + tol, axis=-1)

    if G.shape[0] == 0 or feasible(c):
        return c

    norms2 = np.einsum("ij,ij->i", G, G)
    ok = norms2 > 1e-24
    G, g, norms2 = G[ok], g[ok], norms2[ok]
    viol = G @ c - g > 0
    cands = [c - ((G[viol] @ c - g[viol]) / norms2[viol])[:, None] * G[viol]]

    i, j = np.triu_indices(G.shape[0], k=1)
    det = G[i, 0] * G[j, 1] - G[i, 1] * G[j, 0]
    scale = np.sqrt(norms2[i] * norms2[j])
    nd = np.abs(det) > 1e-12 * scale
    i, j, det = i[nd], j[nd], det[nd]
    vx = (g[i] * G[j, 1] - g[j] * G[i, 1]) / det
    vy = (G[i, 0] * g[j] - G[j, 0] * g[i]) / det
    cands.append(np.column_stack([vx, vy]))

    P = np.vstack(cands)
    P = P[feasible(P)]
    if P.shape[0] == 0:
        raise Infeasible("polygon is empty")
    d = np.einsum("ij,ij->i", P - c, P - c)
    return P[int(np.argmin(d))].copy()


def nullspace_vector(M, tol: float = 1e-8) -> np.ndarray | None:
    """Unit vector ``v`` with ``||M v|| <= tol * ||M||``, or ``None``.

    The sign is fixed so that the largest-magnitude entry is positive.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    _, s, vt = np.linalg.svd(M, full_matrices=True)
    v = vt[-1]
    norm = s[0] if s.size else 0.0
    smallest = s[-1] if s.size == vt.shape[0] else 0.0
    if smallest > tol * max(norm, np.finfo(float).tiny) and norm > 0:
        return None
    v = v / np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v


def solve_dare(A, B, Qw=None, Rw=None, tol: float = 1e-12, max_iter: int = 10000) -> np.ndarray:
    """LQR gain ``K`` (so that ``u = K x``) from the Riccati fixed-point iteration."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n, p = B.shape
    Qw = np.eye(n) if Qw is None else np.atleast_2d(np.asarray(Qw, dtype=float))
    Rw = np.eye(p) if Rw is None else np.atleast_2d(np.asarray(Rw, dtype=float))
    P = Qw.copy()
    for _ in range(max_iter):
        BtP = B.T @ P
        gain = np.linalg.solve(Rw + BtP @ B, BtP @ A)
        P_next = Qw + A.T @ P @ A - A.T @ P @ B @ gain
        P_next = 0.5 * (P_next + P_next.T)
        if np.max(np.abs(P_next - P)) <= tol * max(1.0, np.max(np.abs(P_next))):
            P = P_next
            break
        P = P_next
    else:
        raise NoConvergence(f"Riccati iteration did not converge in {max_iter} steps")
    K = -np.linalg.solve(Rw + B.T @ P @ B, B.T @ P @ A)
    if spectral_radius(A + B @ K) >= 1.0:
        raise NoConvergence("Riccati fixed point does not stabilise (A, B)")
    return K


def eigenvalues(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch("eigenvalues need a square matrix")
    try:
        return np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc


def spectral_radius(M) -> float:
    return float(np.max(np.abs(eigenvalues(M))))


def is_schur(M, margin: float = 0.0) -> bool:
    return spectral_radius(M) < 1.0 - margin


def _rank(M, tol):
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol))


def _unit_circle_clusters(M, tol):
    """Groups of eigenvalues with modulus ~1, as (representative, algebraic count)."""
    lam = eigenvalues(M)
    on = lam[np.abs(np.abs(lam) - 1.0) <= tol]
    clusters: list[list[complex]] = []
    for z in on:
        for cl in clusters:
            if abs(cl[0] - z) <= 1e-6:
                cl.append(z)
                break
        else:
            clusters.append([z])
    return lam, [(np.mean(cl), len(cl)) for cl in clusters]


def is_lyapunov_stable(M, tol: float = 1e-9) -> bool:
    """All ``|lambda| <= 1`` and unit-modulus eigenvalues are semisimple."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    lam, clusters = _unit_circle_clusters(M, max(tol, 1e-7))
    if np.any(np.abs(lam) > 1.0 + tol):
        return False
    n = M.shape[0]
    rtol = 1e-6 * max(1.0, np.linalg.norm(M, 2))
    for z, alg in clusters:
        geo = n - _rank(M - z * np.eye(n), rtol)
        if geo < alg:
            return False
    return True


def unit_eigenvalue_multiplicity(M, tol: float = 1e-6) -> int:
    """Algebraic multiplicity of the eigenvalue 1."""
    return int(np.sum(np.abs(eigenvalues(M) - 1.0) <= tol))
