"""Optimal smoothing kernels under moment and support constraints.

The closed-form parabolic kernel minimizes roughness (the integral of
the squared kernel) subject to unit mass, zero mean and a prescribed
second moment.  When parts of the support are excluded, the discrete
problem becomes a quadratic program

    minimize  sum k_i^2
    s.t.      sum k_i dx = 1,  sum x_i k_i dx = 0,  sum x_i^2 k_i dx = a^2,
              k_i >= 0,  k_i = 0 on excluded nodes,

solved here by an active-set scheme on the nonnegativity bounds: each
iteration performs an equality-constrained least-norm solve (normal
equations) for the working set implied by the current multipliers, and
the working set is updated until the KKT conditions hold.  A tiny
regularized slack keeps every iteration well-posed and exposes
infeasibility as an irreducible equality residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import GridTooSmall, Infeasible, NonSeparableExclusion
from .field import GridSpec

_MOMENT_TOL = 1e-8


def kernel_grid(half_width: float, nodes: int) -> GridSpec:
    """1D cell-centered grid whose centers are linspace(-B, B, nodes)."""
    if nodes < 3:
        raise ValueError("need at least 3 nodes")
    dx = 2.0 * half_width / (nodes - 1)
    return GridSpec((nodes,), (-half_width - dx / 2.0,), (nodes * dx,))


def _moments(x: np.ndarray, v: np.ndarray, dx: float) -> tuple[float, float, float]:
    return (
        float(v.sum() * dx),
        float((x * v).sum() * dx),
        float((x * x * v).sum() * dx),
    )


@dataclass(frozen=True, eq=False)
class Kernel1D:
    """Tabulated nonnegative kernel with certified discrete moments."""

    grid: GridSpec
    values: np.ndarray
    second_moment: float
    support_mask: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        mask = np.asarray(self.support_mask, dtype=bool).ravel()
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "support_mask", mask)
        if self.grid.ndim != 1 or v.shape[0] != self.grid.dims[0]:
            raise ValueError("values must match the 1D grid")
        x = self.grid.centers(0)
        dx = self.grid.spacing[0]
        if v.min() < -1e-12:
            raise ValueError("kernel values must be nonnegative")
        if np.any(np.abs(v[~mask]) > 1e-12):
            raise ValueError("kernel must vanish outside its support mask")
        m0, m1, m2 = _moments(x, v, dx)
        a2 = self.second_moment**2
        if abs(m0 - 1.0) > _MOMENT_TOL or abs(m1) > _MOMENT_TOL or abs(m2 - a2) > _MOMENT_TOL:
            raise ValueError(
                f"moment certificate failed: mass={m0}, mean={m1}, second={m2} (want {a2})"
            )

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.centers(0)

    @property
    def support_radius(self) -> float:
        live = np.abs(self.values) > 1e-12
        if not live.any():
            return 0.0
        return float(np.abs(self.nodes[live]).max())

    def __call__(self, u) -> np.ndarray:
        """Kernel value by linear interpolation of the table; 0 outside."""
        return np.interp(u, self.nodes, self.values, left=0.0, right=0.0)

    def slope(self, u) -> np.ndarray:
        """Tabulated derivative (central differences of the table)."""
        return np.interp(u, self.nodes, self._slope_table(), left=0.0, right=0.0)

    def _slope_table(self) -> np.ndarray:
        tab = getattr(self, "_slopes", None)
        if tab is None:
            dx = self.grid.spacing[0]
            tab = np.gradient(self.values, dx)
            object.__setattr__(self, "_slopes", tab)
        return tab

    def roughness(self) -> float:
        return float((self.values**2).sum() * self.grid.spacing[0])


@dataclass(frozen=True, eq=False)
class KernelND:
    """Multiplicative kernel: one 1D factor per axis."""

    factors: tuple[Kernel1D, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        mass = 1.0
        for f in self.factors:
            mass *= _moments(f.nodes, f.values, f.grid.spacing[0])[0]
        if abs(mass - 1.0) > 1e-6:
            raise ValueError("product kernel does not integrate to 1")

    @property
    def ndim(self) -> int:
        return len(self.factors)

    @property
    def support_radius(self) -> float:
        """Euclidean reach of the product support box."""
        return float(np.linalg.norm([f.support_radius for f in self.factors]))

    def __call__(self, u: np.ndarray) -> np.ndarray:
        """Product kernel at points of shape (..., d)."""
        u = np.asarray(u, dtype=float)
        out = np.ones(u.shape[:-1])
        for a, f in enumerate(self.factors):
            out = out * f(u[..., a])
        return out

    def value_and_grad(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Kernel value and gradient w.r.t. the argument, shape (..., d)."""
        u = np.asarray(u, dtype=float)
        vals = [f(u[..., a]) for a, f in enumerate(self.factors)]
        slopes = [f.slope(u[..., a]) for a, f in enumerate(self.factors)]
        prod = np.ones(u.shape[:-1])
        for v in vals:
            prod = prod * v
        grad = np.empty_like(u)
        for a in range(self.ndim):
            g = slopes[a]
            for b in range(self.ndim):
                if b != a:
                    g = g * vals[b]
            grad[..., a] = g
        return prod, grad


@dataclass
class QpProblem:
    """Least-norm QP: minimize ||k||^2 over the equality/bound constraints."""

    n: int
    equalities: list[tuple[np.ndarray, float]]
    lower_bounded: np.ndarray  # True where k_i >= 0 applies
    fixed_zero: np.ndarray = dc_field(default=None)

    def __post_init__(self):
        if self.fixed_zero is None:
            self.fixed_zero = np.zeros(self.n, dtype=bool)
        self.lower_bounded = np.asarray(self.lower_bounded, dtype=bool).ravel()
        self.fixed_zero = np.asarray(self.fixed_zero, dtype=bool).ravel()
        if self.lower_bounded.shape[0] != self.n or self.fixed_zero.shape[0] != self.n:
            raise ValueError("bound masks must have length n")
        rows = [np.asarray(c, dtype=float).ravel() for c, _ in self.equalities]
        if any(r.shape[0] != self.n for r in rows):
            raise ValueError("equality row length mismatch")
        free = ~self.fixed_zero
        live = []
        for r, (_, rhs) in zip(rows, self.equalities):
            rr = r[free]
            if np.abs(rr).max(initial=0.0) <= 1e-14:
                if abs(rhs) > 1e-12:
                    raise Infeasible("constraint row vanishes but rhs is nonzero")
                continue  # vacuous row
            live.append((rr, rhs))
        if not live:
            raise ValueError("no effective equality constraints")
        mat = np.array([r for r, _ in live])
        if np.linalg.matrix_rank(mat, tol=1e-10 * max(1.0, np.abs(mat).max())) < len(live):
            raise ValueError("equality system is rank-deficient after eliminating fixed zeros")
        self._live_rows = live
        self._free = free


def qp_solve(problem: QpProblem, feas_tol: float = 1e-9, max_iter: int = 300) -> np.ndarray:
    """Globally minimize ||k||^2 subject to the problem's constraints.

    Returns the full-length solution vector (zeros on fixed_zero vars).
    Raises :class:`Infeasible` when no nonnegative solution exists.
    """
    free = problem._free
    nf = int(free.sum())
    bounded = problem.lower_bounded[free]
    E = np.array([r for r, _ in problem._live_rows])
    b = np.array([rhs for _, rhs in problem._live_rows])
    scales = np.linalg.norm(E, axis=1)
    E = E / scales[:, None]
    b = b / scales
    m = E.shape[0]

    # Regularized slack: constraint Ek + s = b with a huge penalty on s
    # keeps the working-set normal equations SPD for every active set and
    # turns infeasibility into an irreducible residual ||s||.
    reg = 1e-14
    lam = np.zeros(m)

    def split(kraw):
        k = kraw.copy()
        k[bounded] = np.maximum(k[bounded], 0.0)
        return k

    gnorm_prev = np.inf
    for _ in range(max_iter):
        kraw = E.T @ lam
        k = split(kraw)
        g = E @ k + reg * lam - b
        gnorm = np.linalg.norm(g)
        if gnorm <= feas_tol * max(1.0, np.linalg.norm(b)):
            break
        active = np.ones(nf, dtype=bool)
        active[bounded] = kraw[bounded] > 0.0
        D = E[:, active]
        J = D @ D.T + reg * np.eye(m)
        step = np.linalg.solve(J, g)
        # Backtrack if the semismooth step fails to reduce the residual.
        alpha = 1.0
        for _ in range(40):
            trial = lam - alpha * step
            kt = split(E.T @ trial)
            gt = E @ kt + reg * trial - b
            if np.linalg.norm(gt) < gnorm * (1 - 1e-10):
                lam = trial
                break
            alpha *= 0.5
        else:
            break  # stalled; feasibility verdict below
        gnorm_prev = gnorm
    kraw = E.T @ lam
    k = split(kraw)
    resid = np.linalg.norm(E @ k - b)
    if resid > 1e-7 * max(1.0, np.linalg.norm(b)):
        raise Infeasible(
            f"no nonnegative solution: equality residual {resid:.3e} is irreducible"
        )
    out = np.zeros(problem.n)
    out[free] = k
    out[problem.fixed_zero] = 0.0
    return out


def _epanechnikov_closed_form(x: np.ndarray, a: float) -> np.ndarray:
    w = a * np.sqrt(5.0)
    vals = 0.75 / w * (1.0 - (x / w) ** 2)
    return np.where(np.abs(x) <= w, np.maximum(vals, 0.0), 0.0)


def _project_moments(x, v, dx, a2, mask):
    """Least-norm correction onto the discrete moment equalities.

    Restricted to support nodes; clamps and re-projects until the values
    stay nonnegative (corrections are O(dx^2), so this settles quickly).
    """
    rows = np.stack([np.ones_like(x), x, x * x])[:, mask] * dx
    b = np.array([1.0, 0.0, a2])
    vs = v[mask]
    for _ in range(60):
        r = b - rows @ vs
        corr = rows.T @ np.linalg.solve(rows @ rows.T, r)
        vs = vs + corr
        if vs.min() >= 0.0:
            break
        vs = np.maximum(vs, 0.0)
    out = np.zeros_like(v)
    out[mask] = np.maximum(vs, 0.0)
    return out


def epanechnikov(a: float, grid: GridSpec) -> Kernel1D:
    """Tabulate the parabolic minimum-roughness kernel for second moment a.

    The raw tabulation violates the discrete moments at O(dx^2); a
    least-norm correction on the support nodes restores them exactly so
    the moment certificate holds.
    """
    if a <= 0:
        raise ValueError("second moment must be positive")
    if grid.ndim != 1:
        raise ValueError("1D grid required")
    x = grid.centers(0)
    w = a * np.sqrt(5.0)
    if x[0] > -w or x[-1] < w:
        raise GridTooSmall(f"grid centers must cover [-{w}, {w}]")
    mask = np.abs(x) <= w + 1e-12
    v = _epanechnikov_closed_form(x, a)
    v = _project_moments(x, v, grid.spacing[0], a * a, mask)
    return Kernel1D(grid, v, a, mask)


def _exclusion_mask(x: np.ndarray, exclusion) -> np.ndarray:
    """True where the node is excluded; ``exclusion`` is (lo, hi) pairs."""
    mask = np.zeros_like(x, dtype=bool)
    for lo, hi in exclusion or ():
        if hi < lo:
            raise ValueError(f"empty exclusion interval ({lo}, {hi})")
        mask |= (x >= lo) & (x <= hi)
    return mask


def optimize_kernel_1d(grid: GridSpec, a: float, exclusion=()) -> Kernel1D:
    """QP-optimal kernel: minimum roughness under moments + support holes."""
    if a <= 0:
        raise ValueError("second moment must be positive")
    x = grid.centers(0)
    w = a * np.sqrt(5.0)
    if x[0] > -w or x[-1] < w:
        raise GridTooSmall(f"grid centers must cover [-{w}, {w}]")
    dx = grid.spacing[0]
    excluded = _exclusion_mask(x, exclusion)
    eqs = [
        (np.ones_like(x) * dx, 1.0),
        (x * dx, 0.0),
        (x * x * dx, a * a),
    ]
    prob = QpProblem(
        n=x.shape[0],
        equalities=eqs,
        lower_bounded=np.ones_like(x, dtype=bool),
        fixed_zero=excluded,
    )
    k = qp_solve(prob)
    # The solve leaves O(1e-9) moment drift; re-certify on the positive set
    # so nodes the QP zeroed stay exactly zero.
    k = _project_moments(x, k, dx, a * a, k > 1e-12)
    return Kernel1D(grid, k, a, ~excluded)


def _separable_intervals(ndim: int, exclusion) -> list[list[tuple[float, float]]]:
    """Split an exclusion region into per-axis intervals.

    Accepts slabs given as (axis, lo, hi) or boxes given as a sequence of
    per-axis (lo, hi) / None entries; a box constraining more than one
    axis cannot be expressed by a product kernel.
    """
    per_axis: list[list[tuple[float, float]]] = [[] for _ in range(ndim)]
    for region in exclusion or ():
        region = tuple(region)
        if len(region) == 3 and np.isscalar(region[0]):
            axis, lo, hi = region
            per_axis[int(axis)].append((float(lo), float(hi)))
            continue
        if len(region) != ndim:
            raise ValueError("box exclusion must give one entry per axis")
        constrained = [i for i, iv in enumerate(region) if iv is not None]
        if len(constrained) > 1:
            raise NonSeparableExclusion(
                "exclusion box constrains more than one axis; its complement "
                "does not factor into per-axis supports"
            )
        if constrained:
            i = constrained[0]
            lo, hi = region[i]
            per_axis[i].append((float(lo), float(hi)))
    return per_axis


def optimize_kernel_nd(grids, a: float, exclusion=()) -> KernelND:
    """Per-axis QP kernels assembled into a multiplicative kernel."""
    grids = list(grids)
    per_axis = _separable_intervals(len(grids), exclusion)
    factors = tuple(
        optimize_kernel_1d(g, a, iv) for g, iv in zip(grids, per_axis)
    )
    return KernelND(factors)


def amise_c1(kernel: Kernel1D) -> float:
    """Kernel-dependent AMISE factor: ((int K^2)^4 (int x^2 K)^2)^(1/5)."""
    dx = kernel.grid.spacing[0]
    x = kernel.nodes
    r = float((kernel.values**2).sum() * dx)
    m2 = float((x * x * kernel.values).sum() * dx)
    return float((r**4 * m2**2) ** 0.2)
