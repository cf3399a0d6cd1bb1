"""Uniform cell-centered grids with discrete calculus and quadrature.

Scalar and vector fields live at cell centers of a rectangular grid
(1 to 3 spatial axes).  The discrete gradient uses central differences
with a mirror ghost cell at the boundary, so the implied normal
derivative on every boundary face is zero.  The discrete divergence is
the exact negative adjoint of the gradient under the cell-volume inner
product, which makes summation by parts hold to machine precision and
makes the Laplacian (defined as divergence of gradient) symmetric
negative semidefinite.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

_MAGIC = b"SWOMT1"


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centered grid: cell i sits at origin + (i + 0.5) * spacing."""

    dims: tuple[int, ...]
    origin: tuple[float, ...]
    extent: tuple[float, ...]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        origin = tuple(float(x) for x in self.origin)
        extent = tuple(float(x) for x in self.extent)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extent", extent)
        if not (1 <= len(dims) <= 3):
            raise ValueError("grids support 1 to 3 axes")
        if len(origin) != len(dims) or len(extent) != len(dims):
            raise ValueError("dims/origin/extent length mismatch")
        if any(n < 2 for n in dims):
            raise ValueError("need at least 2 cells per axis")
        if any(e <= 0 for e in extent):
            raise ValueError("extent must be positive")

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / n for e, n in zip(self.extent, self.dims))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def cell_count(self) -> int:
        return int(np.prod(self.dims))

    def centers(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        s = self.spacing[axis]
        return self.origin[axis] + (np.arange(self.dims[axis]) + 0.5) * s

    def center_mesh(self) -> list[np.ndarray]:
        """Full coordinate arrays of shape ``dims``, one per axis."""
        axes = [self.centers(a) for a in range(self.ndim)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.origin, dtype=float)
        return lo, lo + np.asarray(self.extent, dtype=float)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.dims:
            v = v.reshape(self.grid.dims)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: GridSpec
    components: tuple[np.ndarray, ...]

    def __post_init__(self):
        comps = tuple(
            np.asarray(c, dtype=float).reshape(self.grid.dims) for c in self.components
        )
        if len(comps) != self.grid.ndim:
            raise ValueError("one component per spatial axis required")
        object.__setattr__(self, "components", comps)


def _grad_axis(values: np.ndarray, axis: int, spacing: float) -> np.ndarray:
    """Central difference with a mirror ghost cell at each end."""
    out = np.empty_like(values)
    h2 = 2.0 * spacing
    src = np.moveaxis(values, axis, 0)
    dst = np.moveaxis(out, axis, 0)
    dst[1:-1] = (src[2:] - src[:-2]) / h2
    dst[0] = (src[1] - src[0]) / h2
    dst[-1] = (src[-1] - src[-2]) / h2
    return out


def _div_axis(values: np.ndarray, axis: int, spacing: float) -> np.ndarray:
    """Exact negative transpose of :func:`_grad_axis` (same spacing)."""
    out = np.empty_like(values)
    h2 = 2.0 * spacing
    src = np.moveaxis(values, axis, 0)
    dst = np.moveaxis(out, axis, 0)
    n = src.shape[0]
    if n == 2:
        dst[0] = (src[0] + src[1]) / h2
        dst[1] = -(src[0] + src[1]) / h2
        return out
    dst[0] = (src[0] + src[1]) / h2
    dst[1] = (src[2] - src[0]) / h2
    if n > 4:
        dst[2:-2] = (src[3:-1] - src[1:-3]) / h2
    dst[-2] = (src[-1] - src[-3]) / h2
    dst[-1] = -(src[-2] + src[-1]) / h2
    return out


def gradient(f: ScalarField) -> VectorField:
    """Discrete gradient with zero normal derivative at the boundary."""
    s = f.grid.spacing
    comps = tuple(_grad_axis(f.values, a, s[a]) for a in range(f.grid.ndim))
    return VectorField(f.grid, comps)


def divergence(v: VectorField) -> ScalarField:
    """Discrete divergence, the negative adjoint of :func:`gradient`."""
    s = v.grid.spacing
    total = np.zeros(v.grid.dims)
    for a in range(v.grid.ndim):
        total += _div_axis(v.components[a], a, s[a])
    return ScalarField(v.grid, total)


def laplacian(f: ScalarField) -> ScalarField:
    """Divergence of the gradient; symmetric negative semidefinite."""
    return divergence(gradient(f))


def quadrature(f: ScalarField) -> float:
    """Midpoint rule: sum of cell values times cell volume."""
    return float(f.values.sum() * f.grid.cell_volume)


def _index_weights(grid: GridSpec, points: np.ndarray):
    """Clamped multilinear index/weight decomposition for queries."""
    lo, hi = grid.bounds()
    pts = np.clip(points, lo, hi)
    idx = []
    frac = []
    for a in range(grid.ndim):
        u = (pts[:, a] - grid.origin[a]) / grid.spacing[a] - 0.5
        u = np.clip(u, 0.0, grid.dims[a] - 1.0)
        i0 = np.minimum(np.floor(u).astype(np.intp), grid.dims[a] - 2)
        idx.append(i0)
        frac.append(u - i0)
    return idx, frac


def _interp_values(values: np.ndarray, idx, frac, ndim: int) -> np.ndarray:
    n = idx[0].shape[0]
    out = np.zeros(n)
    for corner in range(1 << ndim):
        w = np.ones(n)
        sel = []
        for a in range(ndim):
            if corner >> a & 1:
                w = w * frac[a]
                sel.append(idx[a] + 1)
            else:
                w = w * (1.0 - frac[a])
                sel.append(idx[a])
        out += w * values[tuple(sel)]
    return out


def interpolate(f: ScalarField | VectorField, point) -> float | np.ndarray:
    """Multilinear interpolation at one point ``(d,)`` or a batch ``(n, d)``.

    Queries outside the bounding box are clamped to the box, so the
    call is total.  Exact on multilinear fields inside the hull of the
    cell centers.
    """
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    single = np.asarray(point).ndim == 1
    grid = f.grid
    if pts.shape[1] != grid.ndim:
        raise ValueError("query dimension does not match grid")
    idx, frac = _index_weights(grid, pts)
    if isinstance(f, ScalarField):
        out = _interp_values(f.values, idx, frac, grid.ndim)
        return float(out[0]) if single else out
    stacked = np.stack(
        [_interp_values(c, idx, frac, grid.ndim) for c in f.components], axis=-1
    )
    return stacked[0] if single else stacked


def save_field(f: ScalarField, path) -> None:
    """Write the little-endian binary field format (magic ``SWOMT1``)."""
    grid = f.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", grid.ndim))
        fh.write(struct.pack(f"<{grid.ndim}I", *grid.dims))
        fh.write(struct.pack(f"<{grid.ndim}d", *grid.origin))
        fh.write(struct.pack(f"<{grid.ndim}d", *grid.extent))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path) -> ScalarField:
    with open(path, "rb") as fh:
        magic = fh.read(6)
        if magic != _MAGIC:
            raise ValueError(f"not a field file (bad magic {magic!r}): {path}")
        (rank,) = struct.unpack("<I", fh.read(4))
        dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
        origin = struct.unpack(f"<{rank}d", fh.read(8 * rank))
        extent = struct.unpack(f"<{rank}d", fh.read(8 * rank))
        count = int(np.prod(dims))
        values = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(dims)
    return ScalarField(GridSpec(dims, origin, extent), values.copy())


def field_to_csv(f: ScalarField, path) -> None:
    """One row per cell: coordinates then value."""
    mesh = f.grid.center_mesh()
    cols = [m.ravel() for m in mesh] + [f.values.ravel()]
    header = ",".join([f"x{a}" for a in range(f.grid.ndim)] + ["value"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
