"""Independent cross-checks for the mode-decomposed pipeline.

Two oracles that share no code path with the per-mode solver:

* an exact product-ratio determinant for explicit finite spectra (rational
  arithmetic for short lists), pinning the det = exp(-zeta'(0)) convention;
* a genuinely two-dimensional five-point solver on the (s, theta) cylinder,
  assembled as one sparse generalized pencil and solved by shift-invert
  Lanczos.  Its theta-difference symbol mu_m = (4/h^2) sin^2(m h / 2) is what
  ``mode_sum_reference`` substitutes into the 1D assembly, so the two routes
  solve the *same* discrete operator through entirely different linear
  algebra and can be compared at solver precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .discretize import Grid, assemble_mode_operator, solve_mode
from .geometry import MetricProfile

__all__ = [
    "Grid2D",
    "make_grid_2d",
    "finite_matrix_relative_det",
    "low_eigenvalues_2d",
    "mode_sum_reference",
]

_EXACT_PATH_MAX = 20  # spectra shorter than this use rational arithmetic
_EIGSH_SEED = 12345


def finite_matrix_relative_det(lam_a, lam_b) -> float:
    """Relative determinant prod(lam_a) / prod(lam_b) of two finite spectra.

    Same convention as the zeta route (det = exp(-zeta'(0))), so
    finite_matrix_relative_det([1, 2, 3], [1, 2, 4]) == 0.75.  Lists shorter
    than 20 are evaluated in exact rational arithmetic (floats are taken at
    their exact binary values); longer lists fall back to log-sums.
    """
    la = list(np.asarray(lam_a, dtype=float).ravel())
    lb = list(np.asarray(lam_b, dtype=float).ravel())
    if len(la) != len(lb):
        raise ValueError("spectra must have equal length")
    if not la:
        raise ValueError("spectra must be nonempty")
    if min(la) <= 0 or min(lb) <= 0:
        raise ValueError("spectra must be positive")
    if len(la) < _EXACT_PATH_MAX:
        num = Fraction(1)
        for x in la:
            num *= Fraction(x)
        den = Fraction(1)
        for x in lb:
            den *= Fraction(x)
        return float(num / den)
    return math.exp(float(np.sum(np.log(la)) - np.sum(np.log(lb))))


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid for the five-point solver: the 1D chart grid crossed with
    n_theta equispaced angles (periodic)."""

    s_nodes: np.ndarray = field(repr=False)
    n_theta: int
    bc_left: str
    bc_right: str

    def __post_init__(self):
        if self.n_theta < 8:
            raise ValueError("need at least 8 angular nodes")
        self.s_nodes.setflags(write=False)

    @property
    def n_s(self) -> int:
        return len(self.s_nodes)

    @property
    def h_s(self) -> float:
        return float(self.s_nodes[1] - self.s_nodes[0])

    @property
    def h_theta(self) -> float:
        return 2.0 * math.pi / self.n_theta


def make_grid_2d(profile: MetricProfile, n_s: int = 400, n_theta: int = 64) -> Grid2D:
    nodes = np.linspace(profile.s_min, profile.s_max, n_s)
    return Grid2D(
        s_nodes=nodes,
        n_theta=n_theta,
        bc_left=profile.bc_left,
        bc_right=profile.bc_right,
    )


def _active_slice(grid: Grid2D) -> tuple[int, int, bool, bool]:
    # A cap edge is kept (Neumann for every theta); the m != 0 components
    # there sit at ~ e^{-2 m s_max} and cannot move the low spectrum.
    left_active = grid.bc_left in ("neumann", "cap")
    right_active = grid.bc_right in ("neumann", "cap")
    lo = 0 if left_active else 1
    hi = grid.n_s if right_active else grid.n_s - 1
    return lo, hi, left_active, right_active


def _assemble_2d(profile: MetricProfile, grid: Grid2D):
    """One sparse pencil (A, W) for the quadratic forms
    int (u_s^2 + u_theta^2) ds dtheta  against  int u^2 w ds dtheta,
    on lumped cells -- the exact tensor product of the 1D assembly."""
    h = grid.h_s
    ht = grid.h_theta
    lo, hi, left_active, right_active = _active_slice(grid)
    n_act = hi - lo
    w = profile.weight(grid.s_nodes)
    if np.any(~np.isfinite(w)) or np.any(w <= 0.0):
        raise ValueError("weight must be positive and finite on the grid")
    cell = np.full(n_act, h)
    deg = np.full(n_act, 2.0)
    if left_active:
        cell[0] = h / 2.0
        deg[0] = 1.0
    if right_active:
        cell[-1] = h / 2.0
        deg[-1] = 1.0
    K_s = sp.diags(
        [np.full(n_act - 1, -1.0 / h), deg / h, np.full(n_act - 1, -1.0 / h)],
        [-1, 0, 1],
    )
    C_s = sp.diags(cell)
    nt = grid.n_theta
    shift = sp.lil_matrix((nt, nt))
    shift.setdiag(np.ones(nt - 1), 1)
    shift[nt - 1, 0] = 1.0
    shift = shift.tocsr()
    K_t = (2.0 * sp.eye(nt) - shift - shift.T) / ht
    I_t = sp.eye(nt)
    A = sp.kron(K_s, ht * I_t) + sp.kron(C_s, K_t)
    W = sp.diags(np.repeat(w[lo:hi] * cell, nt) * ht)
    return A.tocsc(), W.tocsc()


def low_eigenvalues_2d(
    profile: MetricProfile,
    grid: Grid2D,
    count: int = 20,
    *,
    sigma: float = -0.05,
    residual_tol: float = 1e-8,
) -> np.ndarray:
    """First ``count`` eigenvalues of the five-point pencil, ascending.

    Shift-invert Lanczos around sigma (below the spectrum) with a fixed,
    seeded start vector; every returned pair is verified to satisfy
    ||A v - lam W v|| <= residual_tol * ||A v|| and non-convergence raises.

    pre: count <= 50 (this is a low-spectrum cross-check, not a production
    eigensolver); a bump, when present, must span at least 8 radial nodes.
    """
    if count > 50:
        raise ValueError("the 2D oracle is limited to the first 50 eigenvalues")
    if count < 1:
        raise ValueError("count must be positive")
    bump = profile.spec.bump if profile.spec is not None else profile._fn.bump
    if bump is not None and 2.0 * bump.radius / grid.h_s < 8.0:
        raise ValueError(
            f"bump of radius {bump.radius} spans fewer than 8 radial nodes at "
            f"h_s={grid.h_s:.4g}; refine the oracle grid"
        )
    A, W = _assemble_2d(profile, grid)
    n = A.shape[0]
    if count >= n - 1:
        raise ValueError("count exceeds the oracle grid size")
    lu = splu((A - sigma * W).tocsc())
    op = LinearOperator(A.shape, matvec=lu.solve)
    v0 = np.random.default_rng(_EIGSH_SEED).standard_normal(n)
    vals, vecs = eigsh(A, k=count, M=W, sigma=sigma, OPinv=op, v0=v0)
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    for lam, v in zip(vals, vecs.T):
        av = A @ v
        res = float(np.linalg.norm(av - lam * (W @ v)))
        if res > residual_tol * max(float(np.linalg.norm(av)), 1e-30):
            raise RuntimeError(
                f"2D eigenpair residual {res:.3e} exceeds {residual_tol:.1e} "
                f"at lam={lam:.6g}; Lanczos did not converge"
            )
    return vals


def angular_symbol(m: int, n_theta: int) -> float:
    """Five-point angular symbol mu_m = (4/h^2) sin^2(m h / 2), h = 2 pi / n_theta."""
    h = 2.0 * math.pi / n_theta
    return (4.0 / h**2) * math.sin(0.5 * m * h) ** 2


def mode_sum_reference(
    profile: MetricProfile,
    grid: Grid2D,
    count: int = 20,
) -> np.ndarray:
    """The same discrete spectrum as the five-point pencil, by angular
    diagonalization: the theta circulant factors into modes m = 0..n_theta/2
    with symbol mu_m (multiplicity 2 except m = 0 and Nyquist), leaving 1D
    pencils that the tridiagonal solver handles.  Returns the first ``count``
    values ascending; agreement with low_eigenvalues_2d is at linear-algebra
    precision since both routes diagonalize the same matrix pair.
    """
    if count < 1:
        raise ValueError("count must be positive")
    grid_1d = Grid(nodes=np.asarray(grid.s_nodes), bc_left=grid.bc_left, bc_right=grid.bc_right)
    w = profile.weight(grid.s_nodes)
    max_w = float(np.max(w))
    nyquist = grid.n_theta // 2
    cap = 16.0
    while True:
        found: list[tuple[float, int]] = []
        for m in range(nyquist + 1):
            mu = angular_symbol(m, grid.n_theta)
            if mu / max_w > cap:
                continue
            op = assemble_mode_operator(profile, m, grid_1d, m2_value=mu)
            vals, _ = solve_mode(op, cap)
            mult = 1 if (m == 0 or (grid.n_theta % 2 == 0 and m == nyquist)) else 2
            for lam in vals:
                found.append((float(lam), mult))
        total = sum(mult for _, mult in found)
        found.sort()
        expanded: list[float] = []
        for lam, mult in found:
            expanded.extend([lam] * mult)
        if total >= count and expanded[count - 1] <= cap:
            return np.asarray(expanded[:count])
        cap *= 2.0
        if cap > 1e9:
            raise RuntimeError("could not collect enough eigenvalues below any cap")
