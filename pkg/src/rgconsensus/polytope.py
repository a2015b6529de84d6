"""Halfspace polytopes ``{x : G x <= g}``; all geometry goes through LPs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, OriginNotInterior, Unbounded
from .numerics import LP_TOL, LpProblem, solve_lp

ROW_NORM_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class HPolytope:
    G: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        g = np.atleast_1d(np.asarray(self.g, dtype=float)).reshape(-1)
        if G.shape[0] != g.size:
            raise DimensionMismatch(f"{G.shape[0]} rows but {g.size} rhs entries")
        tiny = np.linalg.norm(G, axis=1) < ROW_NORM_FLOOR
        if np.any(tiny & (g < 0)):
            # 0 <= negative: the set is empty; keep the row so LPs report it
            tiny &= g >= 0
        G, g = G[~tiny], g[~tiny]
        G.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "g", g)

    @property
    def dim(self) -> int:
        return self.G.shape[1]

    @property
    def n_rows(self) -> int:
        return self.G.shape[0]

    @classmethod
    def box(cls, lo, hi) -> "HPolytope":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        eye = np.eye(lo.size)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    def intersect(self, G, g) -> "HPolytope":
        G = np.atleast_2d(np.asarray(G, dtype=float))
        return HPolytope(np.vstack([self.G, G]), np.concatenate([self.g, np.atleast_1d(g)]))

    def contains(self, x, slack: float = 0.0, tol: float = 0.0) -> bool:
        """``G x <= g - slack`` componentwise (``tol`` absorbs rounding)."""
        return bool(np.all(self.margins(x) >= slack - tol))

    def margins(self, x) -> np.ndarray:
        """Row slacks ``g - G x``; the point is inside iff all are >= 0."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"point has dimension {x.shape[-1]}, polytope {self.dim}")
        return self.g - x @ self.G.T

    def contains_many(self, X, slack: float = 0.0, tol: float = 0.0) -> np.ndarray:
        return np.all(self.margins(np.atleast_2d(X)) >= slack - tol, axis=-1)

    def support(self, direction) -> float:
        """``max direction @ x`` over the polytope (raises Unbounded/Infeasible)."""
        return solve_lp(LpProblem(np.asarray(direction, dtype=float), self.G, self.g)).value

    def is_redundant(self, row, rhs: float, tol: float = LP_TOL) -> bool:
        """True iff ``row @ x <= rhs`` already holds on the whole polytope."""
        try:
            return self.support(row) <= rhs + tol
        except Unbounded:
            return False

    def coordinate_bounds(self, axis: int) -> tuple[float, float]:
        e = np.zeros(self.dim)
        e[axis] = 1.0
        try:
            hi = self.support(e)
            lo = -self.support(-e)
        except Unbounded as exc:
            raise Unbounded(f"polytope unbounded along axis {axis}") from exc
        return lo, hi

    def normalize(self) -> "HPolytope":
        """Rescale every row so its rhs is 1; needs the origin strictly inside."""
        if np.any(self.g <= 0):
            raise OriginNotInterior("origin is not in the interior (some rhs <= 0)")
        return HPolytope(self.G / self.g[:, None], np.ones_like(self.g))

    def essential_rows(self, tol: float = LP_TOL) -> np.ndarray:
        """Mask of rows kept when implied rows are dropped one at a time, in order."""
        keep = np.ones(self.n_rows, dtype=bool)
        for i in range(self.n_rows):
            keep[i] = False
            rest = HPolytope(self.G[keep], self.g[keep])
            if rest.n_rows == 0 or not rest.is_redundant(self.G[i], self.g[i], tol):
                keep[i] = True
        return keep

    def remove_redundant(self, tol: float = LP_TOL) -> "HPolytope":
        keep = self.essential_rows(tol)
        return HPolytope(self.G[keep], self.g[keep])


def contains(P: HPolytope, x, slack: float = 0.0) -> bool:
    return P.contains(x, slack)


def is_redundant(P: HPolytope, row, rhs: float) -> bool:
    return P.is_redundant(row, rhs)


def coordinate_bounds(P: HPolytope, axis: int) -> tuple[float, float]:
    return P.coordinate_bounds(axis)


def normalize(P: HPolytope) -> HPolytope:
    return P.normalize()
