"""Per-Fourier-mode Sturm-Liouville discretization and eigensolvers.

Separating variables on w(s)(ds^2 + dtheta^2) turns the Laplace eigenproblem
into, for each angular mode m,

    (-u'' + m^2 u) = lambda w(s) u      on [s_min, s_max],

a generalized symmetric tridiagonal pencil once discretized on a uniform grid
(second-order stencil, lumped cell masses: interior rows (-1, 2, -1)/h^2
against mass w_i, half cells at retained Neumann/cap endpoints).  Eigenvalues
up to a cutoff are computed mode by mode with LAPACK bisection + inverse
iteration after a diagonal congruence, and modes are enumerated up to the
provable Rayleigh cutoff m^2 > lambda_cut * max(w).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .geometry import MetricProfile

__all__ = [
    "Grid",
    "ModeOperator",
    "Eigensystem",
    "make_grid",
    "assemble_mode_operator",
    "solve_mode",
    "solve_modes",
    "mode_cutoff",
    "worker_count",
]

_BC = ("dirichlet", "neumann", "cap")
KERNEL_FLOOR = -1e-9  # lower edge of the bisection window; catches exact kernels


@dataclass(frozen=True)
class Grid:
    """Uniform grid on a profile chart with end boundary conditions.

    'cap' is resolved per mode when operators are assembled: Neumann for
    m = 0 (no flux through the smooth tip closure), Dirichlet for m != 0
    (those modes decay like e^{-m s} down the tip, so the far truncation
    error is ~ e^{-2 m s_max}).
    """

    nodes: np.ndarray = field(repr=False)
    bc_left: str
    bc_right: str

    def __post_init__(self):
        if self.bc_left not in _BC or self.bc_right not in _BC:
            raise ValueError(f"boundary conditions must be one of {_BC}")
        if len(self.nodes) < 8:
            raise ValueError("grid needs at least 8 nodes")
        steps = np.diff(self.nodes)
        scale = max(1.0, abs(float(self.nodes[0])), abs(float(self.nodes[-1])))
        if np.max(np.abs(steps - steps[0])) > 1e-14 * scale:
            raise ValueError("grid spacing must be uniform")
        self.nodes.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def h(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    def same_family(self, other: "Grid") -> bool:
        return (
            self.n == other.n
            and self.bc_left == other.bc_left
            and self.bc_right == other.bc_right
            and np.array_equal(self.nodes, other.nodes)
        )


def make_grid(
    profile: MetricProfile,
    n_nodes: int,
    *,
    bc_left: str | None = None,
    bc_right: str | None = None,
) -> Grid:
    """Uniform n_nodes grid spanning the profile chart (endpoints included).
    Boundary conditions default to the profile's own (overridable for
    experiments, e.g. Neumann reference problems)."""
    nodes = np.linspace(profile.s_min, profile.s_max, n_nodes)
    return Grid(
        nodes=nodes,
        bc_left=bc_left if bc_left is not None else profile.bc_left,
        bc_right=bc_right if bc_right is not None else profile.bc_right,
    )


def _resolve_bc(bc: str, m: int) -> str:
    if bc == "cap":
        return "neumann" if m == 0 else "dirichlet"
    return bc


@dataclass(frozen=True)
class ModeOperator:
    """Generalized tridiagonal pencil (stiffness, mass) for one angular mode,
    on the active nodes (Dirichlet endpoints dropped)."""

    grid: Grid
    m: int
    stiff_diag: np.ndarray = field(repr=False)
    stiff_off: np.ndarray = field(repr=False)
    mass_diag: np.ndarray = field(repr=False)
    left_active: bool
    right_active: bool

    @property
    def active_nodes(self) -> np.ndarray:
        lo = 0 if self.left_active else 1
        hi = self.grid.n if self.right_active else self.grid.n - 1
        return self.grid.nodes[lo:hi]

    def symmetrized(self) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal congruence to an ordinary symmetric tridiagonal problem."""
        d = self.stiff_diag / self.mass_diag
        e = self.stiff_off / np.sqrt(self.mass_diag[:-1] * self.mass_diag[1:])
        return d, e


def assemble_mode_operator(
    profile: MetricProfile,
    m: int,
    grid: Grid,
    *,
    m2_value: float | None = None,
) -> ModeOperator:
    """Assemble the pencil for mode m on the grid.

    ``m2_value`` replaces the exact angular symbol m^2 (used for
    discretization-matched comparisons against 2D stencils, where the
    five-point angular symbol (4/h^2) sin^2(m h / 2) is substituted).
    """
    if m < 0:
        raise ValueError("mode index must be nonnegative")
    h = grid.h
    w = profile.weight(grid.nodes)
    if np.any(~np.isfinite(w)) or np.any(w <= 0.0):
        raise ValueError("weight must be positive and finite on the grid")
    m2 = float(m * m) if m2_value is None else float(m2_value)
    bcl = _resolve_bc(grid.bc_left, m)
    bcr = _resolve_bc(grid.bc_right, m)
    left_active = bcl == "neumann"
    right_active = bcr == "neumann"
    lo = 0 if left_active else 1
    hi = grid.n if right_active else grid.n - 1
    n_active = hi - lo
    cell = np.full(n_active, h)
    deg = np.full(n_active, 2.0)
    if left_active:
        cell[0] = h / 2.0
        deg[0] = 1.0
    if right_active:
        cell[-1] = h / 2.0
        deg[-1] = 1.0
    stiff_diag = deg / h + m2 * cell
    stiff_off = np.full(n_active - 1, -1.0 / h)
    mass_diag = w[lo:hi] * cell
    return ModeOperator(
        grid=grid,
        m=m,
        stiff_diag=stiff_diag,
        stiff_off=stiff_off,
        mass_diag=mass_diag,
        left_active=left_active,
        right_active=right_active,
    )


def solve_mode(
    op: ModeOperator,
    lambda_cut: float,
    *,
    with_vectors: bool = False,
) -> tuple[np.ndarray, np.ndarray | None]:
    """All eigenvalues of the pencil in (KERNEL_FLOOR, lambda_cut], ascending.

    Eigenvectors (when requested) are returned on the full grid (zeros at
    dropped Dirichlet endpoints) and are mass-orthonormal: u_i^T M u_j =
    delta_ij, which the diagonal congruence gives for free from LAPACK's
    orthonormal vectors.
    """
    d, e = op.symmetrized()
    if with_vectors:
        vals, vecs = eigh_tridiagonal(
            d, e, select="v", select_range=(KERNEL_FLOOR, lambda_cut)
        )
        u = vecs / np.sqrt(op.mass_diag)[:, None]
        full = np.zeros((op.grid.n, u.shape[1]))
        lo = 0 if op.left_active else 1
        full[lo : lo + u.shape[0], :] = u
        return vals, full
    vals = eigh_tridiagonal(
        d, e, select="v", select_range=(KERNEL_FLOOR, lambda_cut), eigvals_only=True
    )
    return vals, None


def mode_cutoff(lambda_cut: float, max_weight: float) -> int:
    """Smallest M with M^2 > lambda_cut * max(w): the discrete Rayleigh bound
    lambda_min(m) >= m^2 / max(w) (stiffness = L + m^2 C with L psd against
    mass W C) proves every mode m >= M stays above the cutoff."""
    return int(math.floor(math.sqrt(lambda_cut * max_weight))) + 1


def worker_count() -> int:
    env = os.environ.get("RELSPEC_WORKERS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("RELSPEC_WORKERS must be a positive integer")
        return n
    return min(4, os.cpu_count() or 1)


@dataclass(eq=False)
class Eigensystem:
    """Eigenvalues (<= lambda_cut) of all angular modes of one surface.

    mode_eigenvalues[m] holds the ascending eigenvalues of mode m; angular
    multiplicity is 1 for m = 0 and 2 for m >= 1.  ``vectors`` (optional)
    holds mass-orthonormal eigenfunctions on the full grid.
    """

    profile: MetricProfile
    grid: Grid
    lambda_cut: float
    m_max: int
    max_weight: float
    mode_eigenvalues: dict[int, np.ndarray] = field(repr=False)
    vectors: dict[int, np.ndarray] | None = field(repr=False, default=None)

    def multiplicity(self, m: int) -> int:
        return 1 if m == 0 else 2

    def eigenvalues_with_multiplicity(self) -> np.ndarray:
        parts = []
        for m in sorted(self.mode_eigenvalues):
            vals = self.mode_eigenvalues[m]
            parts.append(vals)
            if m > 0:
                parts.append(vals)
        if not parts:
            return np.empty(0)
        return np.sort(np.concatenate(parts), kind="stable")

    @property
    def count(self) -> int:
        return sum(
            self.multiplicity(m) * len(v) for m, v in self.mode_eigenvalues.items()
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("m,index,multiplicity,eigenvalue\n")
            for m in sorted(self.mode_eigenvalues):
                for j, lam in enumerate(self.mode_eigenvalues[m]):
                    fh.write(f"{m},{j},{self.multiplicity(m)},{float(lam)!r}\n")


def solve_modes(
    profile: MetricProfile,
    grid: Grid,
    lambda_cut: float,
    *,
    m_max: int | None = None,
    with_vectors: bool = False,
    workers: int | None = None,
) -> Eigensystem:
    """Solve every angular mode up to the cutoff (inclusive witness mode).

    The first provably empty mode (m = mode_cutoff) is solved as a runtime
    witness and must come back empty; a nonempty witness means the cutoff
    logic is broken and raises.  Worker threads (RELSPEC_WORKERS) parallelize
    over modes; results are merged in fixed m order, so the output is
    independent of the worker count.
    """
    if lambda_cut <= 0:
        raise ValueError("lambda_cut must be positive")
    w = profile.weight(grid.nodes)
    max_weight = float(np.max(w))
    # Resolution capacity: the largest wavenumber admitted by the cutoff,
    # k = sqrt(lambda_cut * max w), needs a few nodes per wavelength or the
    # top of the requested window is pure discretization noise.
    if math.sqrt(lambda_cut * max_weight) * grid.h > 0.8 * math.pi:
        raise ValueError(
            "lambda_cut exceeds grid resolution capacity: "
            f"sqrt(lambda_cut * max_w) * h = {math.sqrt(lambda_cut * max_weight) * grid.h:.3f} "
            "> 0.8*pi (fewer than 2.5 nodes per wavelength at the cutoff); "
            "refine the grid or lower lambda_cut"
        )
    cutoff = mode_cutoff(lambda_cut, max_weight)
    top = cutoff if m_max is None else max(m_max, cutoff)

    def run(m: int):
        op = assemble_mode_operator(profile, m, grid)
        return solve_mode(op, lambda_cut, with_vectors=with_vectors)

    modes = list(range(top + 1))
    n_workers = worker_count() if workers is None else workers
    results: dict[int, tuple[np.ndarray, np.ndarray | None]] = {}
    if n_workers > 1 and len(modes) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            for m, res in zip(modes, pool.map(run, modes)):
                results[m] = res
    else:
        for m in modes:
            results[m] = run(m)
    witness = results[top][0]
    if len(witness) != 0:
        raise RuntimeError(
            f"mode cutoff violated: mode {top} has eigenvalues below "
            f"{lambda_cut} (max weight {max_weight:.6g})"
        )
    mode_eigenvalues = {m: results[m][0] for m in modes}
    vectors = {m: results[m][1] for m in modes} if with_vectors else None
    return Eigensystem(
        profile=profile,
        grid=grid,
        lambda_cut=float(lambda_cut),
        m_max=top,
        max_weight=max_weight,
        mode_eigenvalues=mode_eigenvalues,
        vectors=vectors,
    )
