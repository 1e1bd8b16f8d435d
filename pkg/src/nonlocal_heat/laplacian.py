"""Discrete Dirichlet Laplacian: assembly, application, and shifted solves.

The operator is the standard 3-point (1D) / 5-point (2D) stencil for
-Laplace with zero boundary values: diagonal ``sum_i 2/h_i^2``, off-diagonal
``-1/h_i^2`` toward axis neighbours, boundary neighbours dropped.  It is a
symmetric positive definite M-matrix, so ``I + tau*(L + diag(w))`` with
``w >= 0`` has a nonnegative inverse that is non-expansive in both the max
and the Euclidean norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs

from .mesh import Field, Grid

_gttrf, _gttrs = get_lapack_funcs(("gttrf", "gttrs"), (np.empty(0, dtype=float),))

#: Relative residual target for the 2D conjugate-gradient solve.
CG_RTOL = 1e-10


class SolverFailure(RuntimeError):
    """Linear solve did not reach its residual target within max iterations."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class DirichletLaplacian:
    """Matrix-free stencil operator for -Laplace with zero boundary data."""

    grid: Grid

    @property
    def diagonal(self) -> float:
        return 2.0 * sum(1.0 / h**2 for h in self.grid.h)

    def offdiagonal(self, axis: int) -> float:
        return -1.0 / self.grid.h[axis] ** 2

    def apply_array(self, v: np.ndarray) -> np.ndarray:
        """Stencil product on a raw value array (implicit zero boundary)."""
        g = self.grid
        if g.dim == 1:
            inv = 1.0 / g.h[0] ** 2
            out = 2.0 * inv * v
            out[1:] -= inv * v[:-1]
            out[:-1] -= inv * v[1:]
            return out
        V = v.reshape(g.n)
        inv0 = 1.0 / g.h[0] ** 2
        inv1 = 1.0 / g.h[1] ** 2
        out = (2.0 * inv0 + 2.0 * inv1) * V
        out[1:, :] -= inv0 * V[:-1, :]
        out[:-1, :] -= inv0 * V[1:, :]
        out[:, 1:] -= inv1 * V[:, :-1]
        out[:, :-1] -= inv1 * V[:, 1:]
        return out.ravel()


def assemble(grid: Grid) -> DirichletLaplacian:
    """Build the stencil operator for a grid."""
    return DirichletLaplacian(grid)


def apply(lap: DirichletLaplacian, f: Field) -> Field:
    """Apply the Laplacian stencil to a field."""
    if f.grid != lap.grid:
        raise ValueError("field and operator live on different grids")
    return Field(lap.grid, lap.apply_array(f.values))


def dirichlet_lambda1(grid: Grid) -> float:
    """First Dirichlet eigenvalue of -Laplace on the continuous box."""
    return math.pi**2 * sum(1.0 / L**2 for L in grid.lengths)


def dirichlet_lambda1_discrete(grid: Grid) -> float:
    """Smallest eigenvalue of the stencil: ``sum_i (4/h_i^2) sin^2(pi h_i / (2 L_i))``."""
    return sum(
        (4.0 / h**2) * math.sin(math.pi * h / (2.0 * L)) ** 2
        for h, L in zip(grid.h, grid.lengths)
    )


class _TridiagonalSystem:
    """LU-factored tridiagonal system, solved by direct elimination."""

    def __init__(self, diag: np.ndarray, off: float):
        n = diag.size
        self._n = n
        if n == 1:
            self._pivot = float(diag[0])
            return
        dl = np.full(n - 1, off)
        du = np.full(n - 1, off)
        dlf, df, duf, du2, ipiv, info = _gttrf(dl, diag, du)
        if info != 0:  # pragma: no cover - SPD systems never hit this
            raise SolverFailure("tridiagonal factorization failed", math.nan, 0)
        self._fact = (dlf, df, duf, du2, ipiv)

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._n == 1:
            return b / self._pivot
        x, info = _gttrs(*self._fact, b)
        if info != 0:  # pragma: no cover
            raise SolverFailure("tridiagonal back-substitution failed", math.nan, 0)
        return x


class _ConjugateGradientSystem:
    """Matrix-free CG for ``(I + tau*(L + diag(w))) x = b`` in 2D."""

    def __init__(self, lap: DirichletLaplacian, w: np.ndarray, tau: float, max_iter: int):
        self._lap = lap
        self._shift = 1.0 + tau * w
        self._tau = tau
        self._max_iter = max_iter

    def _matvec(self, v: np.ndarray) -> np.ndarray:
        return self._shift * v + self._tau * self._lap.apply_array(v)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b_norm = np.linalg.norm(b)
        if b_norm == 0.0:
            return np.zeros_like(b)
        target = CG_RTOL * b_norm
        x = b.copy()  # good start: the system is a small perturbation of I
        r = b - self._matvec(x)
        rs = float(r @ r)
        if math.sqrt(rs) <= target:
            return x
        p = r.copy()
        for k in range(1, self._max_iter + 1):
            Ap = self._matvec(p)
            alpha = rs / float(p @ Ap)
            x += alpha * p
            r -= alpha * Ap
            rs_new = float(r @ r)
            if math.sqrt(rs_new) <= target:
                # guard against drift of the recursive residual
                true_res = float(np.linalg.norm(b - self._matvec(x)))
                if true_res <= target:
                    return x
                r = b - self._matvec(x)
                rs_new = float(r @ r)
                p = r.copy()
                rs = rs_new
                continue
            p = r + (rs_new / rs) * p
            rs = rs_new
        residual = float(np.linalg.norm(b - self._matvec(x)) / b_norm)
        raise SolverFailure(
            f"CG did not reach rtol={CG_RTOL:g} within {self._max_iter} iterations "
            f"(relative residual {residual:.3e})",
            residual,
            self._max_iter,
        )


def shifted_system(
    lap: DirichletLaplacian,
    w: np.ndarray,
    tau: float,
    max_iter: int | None = None,
):
    """Prepare ``(I + tau*(L + diag(w)))`` for repeated solves.

    1D grids get a factored tridiagonal elimination; 2D grids get
    unpreconditioned CG with relative tolerance ``CG_RTOL`` and a default
    iteration cap of ``10 * num_nodes``.
    """
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    g = lap.grid
    if w.shape != (g.num_nodes,):
        raise ValueError("shift vector does not match the grid")
    if g.dim == 1:
        inv = 1.0 / g.h[0] ** 2
        diag = 1.0 + tau * (2.0 * inv + w)
        return _TridiagonalSystem(diag, -tau * inv)
    if max_iter is None:
        max_iter = 10 * g.num_nodes
    return _ConjugateGradientSystem(lap, w, tau, max_iter)


def solve_shifted(
    lap: DirichletLaplacian,
    w: Field,
    tau: float,
    b: Field,
    max_iter: int | None = None,
) -> Field:
    """Solve ``(I + tau*(L + diag(w))) x = b`` for one right-hand side.

    Raises :class:`SolverFailure` (carrying the relative residual) if the 2D
    CG loop exhausts its iteration budget.
    """
    if w.grid != lap.grid or b.grid != lap.grid:
        raise ValueError("operands live on different grids")
    system = shifted_system(lap, w.values, tau, max_iter=max_iter)
    return Field(lap.grid, system.solve(b.values))
