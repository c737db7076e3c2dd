"""Relative heat traces, spectral gaps, and off-diagonal heat-kernel integrals.

The relative heat trace of a surgery pair (A, B) sharing one truncated chart,

    E(t) = Tr e^{-t Delta_A} - Tr e^{-t Delta_B},

is evaluated mode by mode with the two spectra paired inside each angular
mode, so that identical surfaces give exactly 0.0 and nearby surfaces cancel
their common ultraviolet bulk before anything is summed.  Heat kernels are
reassembled from the mode eigenfunctions when pointwise or windowed-L2
quantities are needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretize import Eigensystem
from .geometry import line_distance, relative_area

__all__ = [
    "TraceSeries",
    "OffdiagResult",
    "default_time_grid",
    "heat_trace",
    "heat_trace_tail_bound",
    "relative_trace_tail_bound",
    "relative_trace_series",
    "spectral_gap",
    "kernel_value",
    "kernel_diagonal",
    "offdiag_l2_integral",
]


def default_time_grid(t_min: float = 0.02, t_max: float = 20.0, n: int = 60) -> np.ndarray:
    """The standard logarithmic time grid (60 points on [0.02, 20])."""
    if not (0 < t_min < t_max):
        raise ValueError("need 0 < t_min < t_max")
    return np.geomspace(t_min, t_max, n)


def heat_trace(sys, t):
    """Tr e^{-t Delta} over the computed spectrum (with angular multiplicity).

    ``sys`` is an Eigensystem or a plain sequence of eigenvalues; ``t`` may be
    a scalar or an array.  For the spectrum {1, 2} at t = 1 this returns
    e^{-1} + e^{-2} = 0.50321472440805501.
    """
    if isinstance(sys, Eigensystem):
        lam = sys.eigenvalues_with_multiplicity()
    else:
        lam = np.asarray(sys, dtype=float).ravel()
    t_arr = np.asarray(t, dtype=float)
    out = np.exp(-np.multiply.outer(t_arr, lam)).sum(axis=-1)
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return float(out)
    return out


def heat_trace_tail_bound(area: float, lambda_cut: float, t):
    """First-order Weyl estimate of the single-surface trace tail above the
    cutoff: with N(lam) ~ area * lam / (4 pi),

        sum_{lam > cut} e^{-lam t}  ~<  (area / 4 pi) (cut + 1/t) e^{-cut t}.
    """
    t_arr = np.asarray(t, dtype=float)
    return (abs(area) / (4.0 * math.pi)) * (lambda_cut + 1.0 / t_arr) * np.exp(
        -lambda_cut * t_arr
    )


def relative_trace_tail_bound(rel_area: float, lambda_cut: float, t):
    """Tail estimate for the relative trace: the counting functions of a
    surgery pair differ by ~ |rel_area| lam / (4 pi), so the part of E(t)
    lost to the cutoff is of order

        (|rel_area| / 4 pi) (2 cut + 1/t) e^{-cut t}.

    A rel_area of exactly 0.0 (isospectral input) gives exactly 0.0.
    """
    t_arr = np.asarray(t, dtype=float)
    return (abs(rel_area) / (4.0 * math.pi)) * (2.0 * lambda_cut + 1.0 / t_arr) * np.exp(
        -lambda_cut * t_arr
    )


def spectral_gap(sys: Eigensystem, *, kernel_tol: float = 1e-10) -> float:
    """Smallest computed eigenvalue above the kernel threshold."""
    best = math.inf
    for vals in sys.mode_eigenvalues.values():
        above = vals[vals > kernel_tol]
        if len(above):
            best = min(best, float(above[0]))
    if not math.isfinite(best):
        raise ValueError("no eigenvalue above the kernel threshold below the cutoff")
    return best


class _PairedEvaluator:
    """E(t) from two mode-resolved spectra, paired mode by mode.

    Within each mode the exponentials are subtracted element-wise over the
    common prefix of the two (ascending) lists before anything is added up, in
    fixed mode order; bitwise-equal spectra therefore produce exactly 0.0.
    """

    def __init__(self, pairs):
        # pairs: list of (multiplicity, vals_a, vals_b), fixed order
        self.pairs = pairs

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        shape = t_arr.shape
        tt = t_arr.reshape(-1, 1)
        total = np.zeros(tt.shape[0])
        for mult, va, vb in self.pairs:
            k = min(len(va), len(vb))
            term = np.zeros(tt.shape[0])
            if k:
                term += (np.exp(-tt * va[:k]) - np.exp(-tt * vb[:k])).sum(axis=1)
            if len(va) > k:
                term += np.exp(-tt * va[k:]).sum(axis=1)
            if len(vb) > k:
                term -= np.exp(-tt * vb[k:]).sum(axis=1)
            total += mult * term
        if shape == ():
            return float(total[0])
        return total.reshape(shape)


class _FiniteEvaluator:
    def __init__(self, lam_a, lam_b):
        self.lam_a = lam_a
        self.lam_b = lam_b

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        tt = t_arr.reshape(-1, 1)
        out = np.exp(-tt * self.lam_a).sum(axis=1) - np.exp(-tt * self.lam_b).sum(axis=1)
        if t_arr.shape == ():
            return float(out[0])
        return out.reshape(t_arr.shape)


@dataclass(eq=False)
class TraceSeries:
    """A relative heat trace sampled on a time grid.

    values[i] = E(times[i]); tail_bounds[i] estimates what the spectral cutoff
    chopped off (relative_trace_tail_bound).  t_trust_min is the smallest time
    at which that estimate drops below 1e-6 of the series scale -- samples
    below it are cutoff-limited.  ``evaluate`` recomputes E at arbitrary times
    from the retained spectra (unavailable on instances read back from CSV).
    """

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    tail_bounds: np.ndarray = field(repr=False)
    pair_id: str
    rel_area: float
    gap_a: float
    gap_b: float
    t_trust_min: float
    _evaluator: object = field(repr=False, default=None)

    def __post_init__(self):
        if not (len(self.times) == len(self.values) == len(self.tail_bounds)):
            raise ValueError("times, values and tail_bounds must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def gap(self) -> float:
        """Uniform spectral gap of the pair (decay rate of E)."""
        return min(self.gap_a, self.gap_b)

    def evaluate(self, t):
        if self._evaluator is None:
            raise ValueError("series has no evaluator (was it read from CSV?)")
        return self._evaluator(t)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# pair_id={self.pair_id}\n")
            fh.write(f"# rel_area={float(self.rel_area)!r}\n")
            fh.write(f"# gap_a={float(self.gap_a)!r}\n")
            fh.write(f"# gap_b={float(self.gap_b)!r}\n")
            fh.write(f"# t_trust_min={float(self.t_trust_min)!r}\n")
            fh.write("t,value,tail_bound\n")
            # float() strips the numpy scalar wrapper so repr() stays the
            # shortest round-trip decimal form rather than "np.float64(...)"
            for t, v, b in zip(self.times, self.values, self.tail_bounds):
                fh.write(f"{float(t)!r},{float(v)!r},{float(b)!r}\n")

    @classmethod
    def from_csv(cls, path) -> "TraceSeries":
        meta = {}
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    meta[key.strip()] = val.strip()
                elif line.startswith("t,"):
                    continue
                else:
                    rows.append([float(x) for x in line.split(",")])
        data = np.asarray(rows)
        return cls(
            times=data[:, 0],
            values=data[:, 1],
            tail_bounds=data[:, 2],
            pair_id=meta.get("pair_id", "unknown"),
            rel_area=float(meta.get("rel_area", "nan")),
            gap_a=float(meta.get("gap_a", "nan")),
            gap_b=float(meta.get("gap_b", "nan")),
            t_trust_min=float(meta.get("t_trust_min", "nan")),
        )

    @classmethod
    def from_finite_spectra(cls, lam_a, lam_b, times=None) -> "TraceSeries":
        """Relative trace of two explicit finite spectra (no cutoff, no tail)."""
        la = np.sort(np.asarray(lam_a, dtype=float).ravel())
        lb = np.sort(np.asarray(lam_b, dtype=float).ravel())
        if np.any(la <= 0) or np.any(lb <= 0):
            raise ValueError("finite spectra must be positive")
        tgrid = np.geomspace(1e-3, 50.0, 200) if times is None else np.asarray(times, float)
        ev = _FiniteEvaluator(la, lb)
        return cls(
            times=tgrid,
            values=ev(tgrid),
            tail_bounds=np.zeros_like(tgrid),
            pair_id="finite-spectra",
            rel_area=0.0,
            gap_a=float(la[0]),
            gap_b=float(lb[0]),
            t_trust_min=0.0,
            _evaluator=ev,
        )


def _trust_threshold(rel_area: float, lambda_cut: float, ref: float) -> float:
    """Smallest t with relative_trace_tail_bound <= 1e-6 * ref (0.0 if the
    bound already vanishes identically)."""
    if rel_area == 0.0:
        return 0.0
    probe = np.geomspace(1e-5, 5.0, 2049)
    bounds = relative_trace_tail_bound(rel_area, lambda_cut, probe)
    ok = bounds <= 1e-6 * ref
    idx = np.argmax(ok)
    if not ok[idx]:
        return float(probe[-1])
    return float(probe[idx])


def relative_trace_series(
    sys_a: Eigensystem,
    sys_b: Eigensystem,
    times=None,
) -> TraceSeries:
    """Relative heat trace E(t) of two eigensystems on a shared chart.

    pre: the systems were solved on the same grid family with the same cutoff
    and mode range, and their profiles agree on the end regions (so the
    relative area is well defined); violations raise ValueError.
    """
    if not sys_a.grid.same_family(sys_b.grid):
        raise ValueError("eigensystems live on different grids; relative trace undefined")
    if sys_a.lambda_cut != sys_b.lambda_cut:
        raise ValueError("eigensystems have different cutoffs")
    if sys_a.m_max != sys_b.m_max:
        raise ValueError("eigensystems have different mode ranges")
    tgrid = default_time_grid() if times is None else np.asarray(times, dtype=float)
    rel_area = relative_area(sys_a.profile, sys_b.profile)
    pairs = []
    for m in range(max(sys_a.m_max, sys_b.m_max) + 1):
        va = sys_a.mode_eigenvalues.get(m)
        vb = sys_b.mode_eigenvalues.get(m)
        va = np.empty(0) if va is None else va
        vb = np.empty(0) if vb is None else vb
        if len(va) == 0 and len(vb) == 0:
            continue
        pairs.append((1 if m == 0 else 2, va, vb))
    ev = _PairedEvaluator(pairs)
    values = ev(tgrid)
    tails = relative_trace_tail_bound(rel_area, sys_a.lambda_cut, tgrid)
    ref = max(float(np.max(np.abs(values))), abs(rel_area) / (4.0 * math.pi), 1e-300)
    return TraceSeries(
        times=tgrid,
        values=values,
        tail_bounds=tails,
        pair_id=f"{sys_a.profile.label}-vs-{sys_b.profile.label}",
        rel_area=rel_area,
        gap_a=spectral_gap(sys_a),
        gap_b=spectral_gap(sys_b),
        t_trust_min=_trust_threshold(rel_area, sys_a.lambda_cut, ref),
        _evaluator=ev,
    )


# ----------------------------------------------------------------------------
# pointwise kernel and windowed off-diagonal integrals
# ----------------------------------------------------------------------------

def _require_vectors(sys: Eigensystem) -> None:
    if sys.vectors is None:
        raise ValueError("eigensystem was solved without vectors; pass with_vectors=True")


def _snap(sys: Eigensystem, s: float) -> int:
    nodes = sys.grid.nodes
    if s < nodes[0] - 1e-12 or s > nodes[-1] + 1e-12:
        raise ValueError(f"point s={s} outside the chart [{nodes[0]}, {nodes[-1]}]")
    return int(np.argmin(np.abs(nodes - s)))


def _radial_parts(sys: Eigensystem, t: float, i_y: int, i_y2: int):
    """Per-mode sums r_m(s) = sum_j e^{-lam t} u_j(s) u_j(s_y): the radial
    factor of the kernel column through y (and through y2)."""
    cols_a, cols_b = [], []
    ms = sorted(sys.mode_eigenvalues)
    for m in ms:
        lam = sys.mode_eigenvalues[m]
        if len(lam) == 0:
            cols_a.append(None)
            cols_b.append(None)
            continue
        U = sys.vectors[m]
        w = np.exp(-lam * t)
        cols_a.append(U @ (w * U[i_y, :]))
        cols_b.append(U @ (w * U[i_y2, :]))
    return ms, cols_a, cols_b


def kernel_value(sys: Eigensystem, t: float, y, y2=None) -> float:
    """Heat kernel K(t, y, y2) reassembled from the computed modes.

    y = (s, theta); the radial coordinate snaps to the nearest grid node.
    The angular factors are 1/(2 pi) for m = 0 and cos(m dtheta)/pi for
    m >= 1 (cos cos + sin sin pairs summed).
    """
    _require_vectors(sys)
    if y2 is None:
        y2 = y
    s_y, th_y = y
    s_y2, th_y2 = y2
    i_y, i_y2 = _snap(sys, s_y), _snap(sys, s_y2)
    if t <= 0:
        raise ValueError("t must be positive")
    total = 0.0
    dth = th_y - th_y2
    for m in sorted(sys.mode_eigenvalues):
        lam = sys.mode_eigenvalues[m]
        if len(lam) == 0:
            continue
        U = sys.vectors[m]
        radial = float(np.dot(np.exp(-lam * t), U[i_y, :] * U[i_y2, :]))
        ang = 1.0 / (2.0 * math.pi) if m == 0 else math.cos(m * dth) / math.pi
        total += ang * radial
    return total


def kernel_diagonal(sys: Eigensystem, t: float, y) -> float:
    """On-diagonal heat kernel K(t, y, y)."""
    return kernel_value(sys, t, y, y)


@dataclass(frozen=True)
class OffdiagResult:
    """A windowed kernel-product integral

        I(t) = int_{region x S^1} K(t, x, y) K(t, x, y2) dA(x),

    with the chart distances that control its decay: region_distance from y
    to the integration window (0 when y lies inside) and pair_distance
    between the two base circles.  Over the full chart the semigroup property
    collapses I(t) to K(2t, y, y2).
    """

    value: float
    t: float
    region: tuple[float, float]
    y: tuple[float, float]
    y2: tuple[float, float]
    region_distance: float
    pair_distance: float
    n_theta: int
    tail_fraction: float


def _region_distance(sys: Eigensystem, s_y: float, lo: float, hi: float) -> float:
    if lo <= s_y <= hi:
        return 0.0
    edge = lo if s_y < lo else hi
    return line_distance(sys.profile, s_y, edge)


def offdiag_l2_integral(
    sys: Eigensystem,
    t: float,
    *,
    region=None,
    y=(None, 0.0),
    y2=None,
    n_theta: int = 256,
) -> OffdiagResult:
    """Integrate K(t, x, y) K(t, x, y2) over region x S^1 against dA = w ds dtheta.

    region is an s-interval (None = the whole chart); y = (s, theta) with s
    snapped to the nearest node.  The radial integral uses the lumped cells of
    the eigenbasis (so the full-chart case reproduces K(2t, y, y2) to
    round-off); the angular integral is an n_theta-point trapezoid rule, exact
    for the trigonometric polynomials that appear once n_theta > 2 m_max.

    pre: t large enough that the spectral cutoff is invisible -- the estimated
    cutoff remainder of Tr e^{-t Delta} must stay below 1e-6 of the trace
    itself (raises otherwise, naming the smallest usable t).
    """
    _require_vectors(sys)
    if t <= 0:
        raise ValueError("t must be positive")
    nodes = sys.grid.nodes
    s_y, th_y = y
    if s_y is None:
        s_y = 0.5 * (nodes[0] + nodes[-1])
    if y2 is None:
        s_y2, th_y2 = s_y, th_y
    else:
        s_y2, th_y2 = y2
    tail = float(heat_trace_tail_bound(sys.profile.area, sys.lambda_cut, t))
    trace = heat_trace(sys, t)
    tail_fraction = 2.0 * tail / trace
    if tail_fraction > 1e-6:
        probe = np.geomspace(1e-4, 10.0, 2049)
        frac = 2.0 * heat_trace_tail_bound(sys.profile.area, sys.lambda_cut, probe) / np.maximum(
            heat_trace(sys, probe), 1e-300
        )
        ok = probe[frac <= 1e-6]
        t_min = float(ok[0]) if len(ok) else float("nan")
        raise ValueError(
            f"t={t} too small for the cutoff {sys.lambda_cut}: kernel tail fraction "
            f"{tail_fraction:.3e} > 1e-6 (smallest usable t ~ {t_min:.4g})"
        )
    if region is None:
        lo, hi = float(nodes[0]), float(nodes[-1])
    else:
        lo, hi = region
        if not (nodes[0] - 1e-12 <= lo < hi <= nodes[-1] + 1e-12):
            raise ValueError("region must be an increasing interval inside the chart")
    i_y, i_y2 = _snap(sys, s_y), _snap(sys, s_y2)
    if n_theta <= 2 * sys.m_max:
        raise ValueError(
            f"n_theta={n_theta} cannot integrate angular degree 2*m_max={2 * sys.m_max} "
            f"exactly; need at least {2 * sys.m_max + 1}"
        )

    ms, cols_a, cols_b = _radial_parts(sys, t, i_y, i_y2)
    n = len(nodes)
    h = sys.grid.h
    mask = (nodes >= lo - 1e-12) & (nodes <= hi + 1e-12)
    cell = np.full(n, h)
    cell[0] = cell[-1] = h / 2.0
    cell[~mask] = 0.0
    w = sys.profile.weight(nodes)

    theta = np.arange(n_theta) * (2.0 * math.pi / n_theta)
    field_a = np.zeros((n, n_theta))
    field_b = np.zeros((n, n_theta))
    for m, ca, cb in zip(ms, cols_a, cols_b):
        if ca is None:
            continue
        if m == 0:
            field_a += ca[:, None] / (2.0 * math.pi)
            field_b += cb[:, None] / (2.0 * math.pi)
        else:
            field_a += np.outer(ca, np.cos(m * (theta - th_y)) / math.pi)
            field_b += np.outer(cb, np.cos(m * (theta - th_y2)) / math.pi)
    radial_weights = w * cell
    value = float(
        (radial_weights @ (field_a * field_b)).sum() * (2.0 * math.pi / n_theta)
    )
    return OffdiagResult(
        value=value,
        t=t,
        region=(lo, hi),
        y=(float(nodes[i_y]), float(th_y)),
        y2=(float(nodes[i_y2]), float(th_y2)),
        region_distance=_region_distance(sys, float(nodes[i_y]), lo, hi),
        pair_distance=line_distance(sys.profile, float(nodes[i_y]), float(nodes[i_y2])),
        n_theta=n_theta,
        tail_fraction=tail_fraction,
    )
