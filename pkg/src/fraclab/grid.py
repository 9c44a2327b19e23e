"""Discrete geometry: grids, cubes, cube families and exact power quadrature.

Functions are cellwise constant on a mesh.  Two meshes are available:

* :class:`Grid` -- uniform cells on ``[-L, L]^dim`` for ``dim`` in {1, 2};
* :class:`RadialGrid` -- a symmetric, geometrically graded 1-D mesh that
  resolves the ``|x|^a`` singularity of power weights down to ``r_min``.

A cell belongs to a region iff its center does (half-open boundaries).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
from scipy.special import hyp2f1

FAMILY_KINDS = ("dyadic", "thirds", "all-intervals", "centered", "explicit")
_KIND_ALIASES = {
    "shifted-dyadic-thirds": "thirds",
    "all-grid-intervals": "all-intervals",
    "centered-at": "centered",
}


# {{{ meshes


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid on ``[-extent, extent]^dim`` with ``points_per_axis`` cells per axis."""

    dim: int
    extent: float
    points_per_axis: int

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError(f"unsupported dimension: {self.dim}")
        if not self.extent > 0:
            raise ValueError(f"extent must be positive: {self.extent}")
        if self.points_per_axis < 2:
            raise ValueError(f"need at least 2 points per axis: {self.points_per_axis}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    @cached_property
    def axis_edges(self) -> np.ndarray:
        return -self.extent + self.spacing * np.arange(self.points_per_axis + 1)

    @cached_property
    def axis_centers(self) -> np.ndarray:
        return -self.extent + self.spacing * (np.arange(self.points_per_axis) + 0.5)

    @property
    def edges(self) -> np.ndarray:
        if self.dim != 1:
            raise ValueError("edges is defined for 1-D meshes; use axis_edges")
        return self.axis_edges

    @property
    def centers(self) -> np.ndarray:
        """Cell centers, shape ``shape`` (dim 1) or ``shape + (2,)`` (dim 2)."""
        c = self.axis_centers
        if self.dim == 1:
            return c
        X, Y = np.meshgrid(c, c, indexing="ij")
        return np.stack([X, Y], axis=-1)

    @property
    def widths(self) -> np.ndarray:
        return np.full(self.points_per_axis, self.spacing)

    @property
    def cell_measure(self) -> np.ndarray:
        return np.full(self.shape, self.spacing**self.dim)

    @property
    def is_dyadic(self) -> bool:
        n = self.points_per_axis
        return n & (n - 1) == 0

    def header(self) -> str:
        return (
            f"# fraclab-grid v1 dim={self.dim} extent={self.extent!r} "
            f"points={self.points_per_axis}"
        )


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Symmetric log-graded mesh of ``[-r_max, r_max]``.

    The central cell is ``[-r_min, r_min]``; each side carries ``shells``
    cells whose boundaries grow geometrically.  ``breaks`` are extra radii
    that must appear as shell boundaries (e.g. the unit ball boundary);
    each segment between breaks is graded geometrically with shells
    allotted in proportion to its log-length.
    """

    r_min: float
    r_max: float
    shells: int
    breaks: tuple[float, ...] = ()

    dim = 1

    def __post_init__(self) -> None:
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if self.shells < 2:
            raise ValueError("need at least 2 shells")
        inner = [b for b in self.breaks if self.r_min < b < self.r_max]
        object.__setattr__(self, "breaks", tuple(sorted(set(inner))))
        if self.shells < len(self.breaks) + 1:
            raise ValueError("too few shells for the requested breaks")

    @property
    def ratio(self) -> float:
        """Nominal geometric ratio between consecutive shell radii."""
        return (self.r_max / self.r_min) ** (1.0 / self.shells)

    @cached_property
    def radii(self) -> np.ndarray:
        knots = [self.r_min, *self.breaks, self.r_max]
        logs = np.log(knots)
        span = logs[-1] - logs[0]
        counts = np.maximum(1, np.round(self.shells * np.diff(logs) / span)).astype(int)
        counts[np.argmax(counts)] += self.shells - counts.sum()
        pieces = [np.array([self.r_min])]
        for lo, hi, k in zip(knots[:-1], knots[1:], counts):
            seg = lo * (hi / lo) ** (np.arange(1, k + 1) / k)
            seg[-1] = hi
            pieces.append(seg)
        return np.concatenate(pieces)

    @cached_property
    def edges(self) -> np.ndarray:
        r = self.radii
        return np.concatenate([-r[::-1], r])

    @property
    def axis_edges(self) -> np.ndarray:
        return self.edges

    @cached_property
    def centers(self) -> np.ndarray:
        e = self.edges
        c = 0.5 * (e[:-1] + e[1:])
        c[self.shells] = 0.0
        return c

    @property
    def axis_centers(self) -> np.ndarray:
        return self.centers

    @cached_property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def shape(self) -> tuple[int, ...]:
        return (2 * self.shells + 1,)

    @property
    def size(self) -> int:
        return 2 * self.shells + 1

    @property
    def cell_measure(self) -> np.ndarray:
        return self.widths

    @property
    def extent(self) -> float:
        return self.r_max

    @property
    def is_dyadic(self) -> bool:
        return False

    def header(self) -> str:
        head = (
            f"# fraclab-radial v1 rmin={self.r_min!r} rmax={self.r_max!r} "
            f"shells={self.shells}"
        )
        if self.breaks:
            head += " breaks=" + ";".join(repr(b) for b in self.breaks)
        return head


Mesh = Grid | RadialGrid


def build_grid(dim: int, extent: float, points_per_axis: int) -> Grid:
    return Grid(dim, float(extent), int(points_per_axis))


def build_radial_grid(
    r_min: float, r_max: float, shells: int, breaks: Sequence[float] = ()
) -> RadialGrid:
    return RadialGrid(float(r_min), float(r_max), int(shells), tuple(breaks))


@dataclass(eq=False)
class GridFunction:
    """Cellwise-constant function: one value per cell of ``grid``."""

    grid: Mesh
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"value count {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    @classmethod
    def from_callable(cls, grid: Mesh, fn) -> GridFunction:
        """Sample ``fn`` at cell centers (``fn`` receives an array of points)."""
        return cls(grid, fn(grid.centers))

    @classmethod
    def constant(cls, grid: Mesh, value: float = 1.0) -> GridFunction:
        return cls(grid, np.full(grid.shape, float(value)))

    def __mul__(self, other) -> GridFunction:
        if isinstance(other, GridFunction):
            other = other.values
        return GridFunction(self.grid, self.values * other)

    __rmul__ = __mul__

    def __abs__(self) -> GridFunction:
        return GridFunction(self.grid, np.abs(self.values))


# }}}


# {{{ cubes


@dataclass(frozen=True)
class Cube:
    """Axis-parallel cube with center ``center`` and side length ``side``."""

    center: tuple[float, ...]
    side: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.side > 0:
            raise ValueError("cube side must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return self.side**self.dim

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - 0.5 * self.side

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + 0.5 * self.side

    def dilate(self, r: float) -> Cube:
        return Cube(self.center, r * self.side)

    def contains_origin(self) -> bool:
        return bool(np.all(self.lower <= 0) and np.all(self.upper >= 0))

    def to_dict(self) -> dict:
        return {"center": list(self.center), "side": self.side}


@dataclass(frozen=True)
class Shell:
    """Annulus ``r_inner <= |x| < r_outer`` in ``dim`` dimensions."""

    r_inner: float
    r_outer: float
    dim: int = 1

    def __post_init__(self) -> None:
        if not 0 <= self.r_inner < self.r_outer:
            raise ValueError("need 0 <= r_inner < r_outer")


@dataclass(eq=False)
class CubeFamily:
    """A finite family of cubes over which suprema are taken.

    Grid-aligned families store half-open cell-index ranges ``[lo, hi)``
    per axis; ``explicit`` families store free-standing cubes (used with
    analytic power weights).  The ``all-intervals`` family is generated
    lazily in blocks.
    """

    kind: str
    grid: Mesh | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    cubes: list[Cube] | None = None
    _count: int = field(default=0, repr=False)

    def __len__(self) -> int:
        if self.cubes is not None:
            return len(self.cubes)
        if self.kind == "all-intervals":
            n = self.grid.size
            return n * (n + 1) // 2
        return len(self.lo)

    @property
    def aligned(self) -> bool:
        return self.cubes is None

    def iter_blocks(self, block: int = 256) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield ``(lo, hi)`` index arrays of shape ``(m, dim)``."""
        if self.cubes is not None:
            raise ValueError("explicit families carry no index ranges")
        if self.kind == "all-intervals":
            n = self.grid.size
            for a0 in range(0, n, block):
                a = np.arange(a0, min(a0 + block, n))
                aa, bb = np.meshgrid(a, np.arange(1, n + 1), indexing="ij")
                keep = bb > aa
                yield aa[keep][:, None], bb[keep][:, None]
            return
        step = block * 64
        for s in range(0, len(self.lo), step):
            yield self.lo[s : s + step], self.hi[s : s + step]

    def cube_at(self, lo: np.ndarray, hi: np.ndarray) -> Cube:
        edges = self.grid.axis_edges
        lo = np.atleast_1d(lo)
        hi = np.atleast_1d(hi)
        a, b = edges[lo], edges[hi]
        return Cube(tuple(0.5 * (a + b)), float(np.max(b - a)))

    @property
    def members(self) -> list[Cube]:
        if self.cubes is not None:
            return list(self.cubes)
        out = []
        for lo, hi in self.iter_blocks():
            out.extend(self.cube_at(l, h) for l, h in zip(lo, hi))
        return out


def _as_kind(kind: str) -> str:
    kind = _KIND_ALIASES.get(kind, kind)
    if kind not in FAMILY_KINDS:
        raise ValueError(f"unknown cube family: {kind}")
    return kind


def _aligned_blocks(n: int, dim: int, side: int, offsets: Sequence[int]):
    starts = []
    for o in offsets:
        starts.extend(range(o, n - side + 1, side))
    starts = sorted(set(starts))
    if not starts:
        return np.empty((0, dim), int), np.empty((0, dim), int)
    grids = np.meshgrid(*([np.asarray(starts)] * dim), indexing="ij")
    lo = np.stack([g.ravel() for g in grids], axis=1)
    return lo, lo + side


def enumerate_cubes(
    grid: Mesh,
    kind: str,
    max_count: int | None = None,
    center: Sequence[float] | float | None = None,
) -> CubeFamily:
    """Enumerate a deterministic cube family on ``grid``.

    ``dyadic`` gives every dyadic cube with side between the cell size and
    ``2 * extent`` (coarse to fine); ``thirds`` adds the lattices shifted by
    one and two thirds of the side (rounded to cells); ``all-intervals`` is
    every interval with mesh-aligned endpoints (dim 1 only); ``centered``
    is every symmetric cell block around the cell containing ``center``.
    """
    kind = _as_kind(kind)
    if kind == "explicit":
        raise ValueError("explicit families are built with explicit_family")
    if kind == "all-intervals":
        if grid.dim != 1:
            raise ValueError("family too large; use dyadic or shifted-dyadic-thirds")
        fam = CubeFamily(kind, grid)
    elif kind == "centered":
        if center is None:
            raise ValueError("centered family needs a center")
        c = np.atleast_1d(np.asarray(center, float))
        idx = np.array(
            [
                int(np.clip(np.searchsorted(grid.axis_edges, ci, side="right") - 1, 0, len(grid.axis_edges) - 2))
                for ci in c
            ]
        )
        n = len(grid.axis_edges) - 1
        kmax = int(np.min(np.minimum(idx, n - 1 - idx)))
        k = np.arange(kmax + 1)[:, None]
        fam = CubeFamily(kind, grid, idx[None, :] - k, idx[None, :] + k + 1)
    else:
        if not isinstance(grid, Grid) or not grid.is_dyadic:
            raise ValueError(f"{kind} family needs a uniform grid with 2^m cells per axis")
        n, dim = grid.points_per_axis, grid.dim
        los, his = [], []
        side = n
        while side >= 1:
            offs = [0] if kind == "dyadic" else sorted({0, side // 3, (2 * side) // 3})
            lo, hi = _aligned_blocks(n, dim, side, offs)
            los.append(lo)
            his.append(hi)
            side //= 2
        fam = CubeFamily(kind, grid, np.concatenate(los), np.concatenate(his))
    if max_count is not None and len(fam) > max_count:
        raise ValueError(f"family of {len(fam)} cubes exceeds max_count={max_count}")
    return fam


def explicit_family(cubes: Sequence[Cube], grid: Mesh | None = None) -> CubeFamily:
    return CubeFamily("explicit", grid, cubes=list(cubes))


def offset_family(dim: int, offsets: Sequence[float] | np.ndarray) -> CubeFamily:
    """Unit cubes centered at ``offsets`` (scalars in dim 1, pairs in dim 2).

    For power weights every per-cube quantity used here is dilation
    invariant, so this family sweeps all cubes up to scaling.
    """
    offs = np.asarray(offsets, float).reshape(-1, dim)
    return explicit_family([Cube(tuple(o), 1.0) for o in offs])


# }}}


# {{{ exact power integrals


def _pow_diff(lo: np.ndarray, hi: np.ndarray, e: float) -> np.ndarray:
    """``hi**e - lo**e`` for ``0 <= lo <= hi`` without cancellation."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    out = np.empty(np.broadcast(lo, hi).shape)
    lo, hi = np.broadcast_arrays(lo, hi)
    zero = lo == 0
    out[zero] = hi[zero] ** e
    nz = ~zero
    l = lo[nz]
    out[nz] = l**e * np.expm1(e * np.log1p((hi[nz] - l) / l))
    return out


def _radial_primitive(r0: np.ndarray, r1: np.ndarray, a: float) -> np.ndarray:
    """``int_{r0}^{r1} t^a dt`` for ``0 <= r0 <= r1``."""
    if a == -1.0:
        with np.errstate(divide="ignore"):
            return np.log1p((r1 - r0) / r0)
    return _pow_diff(r0, r1, a + 1.0) / (a + 1.0)


def power_integral_1d(a: float, lo, hi) -> np.ndarray:
    """Exact ``int_lo^hi |x|^a dx`` (vectorized, ``lo <= hi``)."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    lo, hi = np.broadcast_arrays(lo, hi)
    straddle = (lo < 0) & (hi > 0)
    if a <= -1.0 and np.any((lo <= 0) & (hi >= 0) & (hi > lo)):
        raise ValueError("non-integrable singularity")
    out = np.empty(lo.shape)
    pos = lo >= 0
    out[pos] = _radial_primitive(lo[pos], hi[pos], a)
    neg = hi <= 0
    out[neg] = _radial_primitive(-hi[neg], -lo[neg], a)
    s = straddle
    if np.any(s):
        out[s] = (np.abs(lo[s]) ** (a + 1) + hi[s] ** (a + 1)) / (a + 1)
    return out


def kernel_cell_integrals(a: float, points, edges) -> np.ndarray:
    """``int_{cell_j} |x_i - y|^a dy`` for every point ``x_i`` and mesh cell ``j`` (dim 1).

    Cells away from the point are integrated from their near-edge distance
    and their width, so cells far narrower than the distance (the inner
    shells of a radial grid seen from afar) keep full relative accuracy.
    """
    x = np.atleast_1d(np.asarray(points, float))[:, None]
    lo, hi = edges[None, :-1], edges[None, 1:]
    width = np.broadcast_to(hi - lo, (x.shape[0], lo.shape[1]))
    right, left = lo >= x, hi <= x
    out = np.empty(width.shape)
    away = right | left
    near = np.where(right, lo - x, x - hi)[away]
    wd = width[away]
    e = a + 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        if e == 0:
            vals = np.log1p(wd / near)
        else:
            vals = np.where(near > 0, near**e * np.expm1(e * np.log1p(wd / near)) / e, wd**e / e)
    if e <= 0 and np.any(near == 0):
        raise ValueError("non-integrable singularity")
    out[away] = vals
    inside = ~away
    if np.any(inside):
        xi = np.broadcast_to(x, width.shape)[inside]
        out[inside] = power_integral_1d(a, np.broadcast_to(lo, width.shape)[inside] - xi, np.broadcast_to(hi, width.shape)[inside] - xi)
    return out


def _sec_power_integral(beta: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``int_0^theta sec(phi)^beta dphi`` via the hypergeometric closed form."""
    s = np.sin(theta)
    return s * hyp2f1(0.5, 0.5 * (beta + 1.0), 1.5, s * s)


def _csc_power_tail(b: float, y: np.ndarray, r: np.ndarray) -> np.ndarray:
    """``y^b int_theta^{pi/4} csc(phi)^b dphi`` with ``sin(theta) = y / r <= 1/sqrt(2)``.

    Termwise integration of ``u^{-b} (1 - u^2)^{-1/2}`` on ``[y/r, 1/sqrt(2)]``;
    each term is kept in a form that stays finite as ``y / r -> 0``.
    """
    ln_y, ln_r = np.log(y)[:, None], np.log(r)[:, None]
    ln_u = -0.5 * np.log(2.0)
    L = ln_u - (ln_y - ln_r)
    k = np.arange(int(60 + b))
    eps = 2 * k + 1 - b
    coef = np.concatenate([[1.0], np.cumprod((k[:-1] + 0.5) / (k[:-1] + 1))])
    x = np.maximum(np.abs(eps) * L, 1e-300)
    h = np.where(x > 1e-12, -np.expm1(-x) / x, 1.0)
    # y^b u^eps for eps >= 0, y^b (y/r)^eps otherwise
    ln_scale = np.where(eps >= 0, b * ln_y + eps * ln_u, (2 * k + 1) * ln_y + (b - 2 * k - 1) * ln_r)
    return np.sum(coef * np.exp(ln_scale) * L * h, axis=1)


def _corner_primitive(c: float, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``int_0^X int_0^Y |x|^c dy dx`` for ``X, Y >= 0`` (polar closed form).

    The rectangle splits along its diagonal into two triangles.  The one
    spanning the smaller angle uses the hypergeometric form; the other is
    written around the angle pi/4 so nothing degenerates for thin boxes.
    """
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    X, Y = np.broadcast_arrays(X, Y)
    out = np.zeros(X.shape)
    ok = (X > 0) & (Y > 0)
    if not np.any(ok):
        return out
    big = np.maximum(X[ok], Y[ok])
    small = np.minimum(X[ok], Y[ok])
    b = c + 2.0
    th = np.arctan2(small, big)
    beta = np.full(big.shape, b)
    quarter = float(_sec_power_integral(np.array(b), np.array(0.25 * np.pi)))
    part = big**b * _sec_power_integral(beta, th) + small**b * quarter + _csc_power_tail(b, small, np.hypot(big, small))
    out[ok] = part / b
    return out


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def power_integral_2d(a: float, x0, x1, y0, y1) -> np.ndarray:
    """Exact-to-roundoff ``int |x|^a`` over rectangles ``[x0,x1] x [y0,y1]``.

    Rectangles well separated from the origin use 12x12 Gauss-Legendre;
    the rest use the signed polar primitive and inclusion-exclusion.
    """
    x0, x1, y0, y1 = (np.asarray(v, float) for v in (x0, x1, y0, y1))
    x0, x1, y0, y1 = np.broadcast_arrays(x0, x1, y0, y1)
    out = np.empty(x0.shape)
    wx, wy = x1 - x0, y1 - y0
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    dist = np.hypot(np.maximum(np.abs(cx) - wx / 2, 0), np.maximum(np.abs(cy) - wy / 2, 0))
    far = dist > 2.0 * np.maximum(wx, wy)
    if np.any(far):
        xs = cx[far, None] + 0.5 * wx[far, None] * _GL_NODES[None, :]
        ys = cy[far, None] + 0.5 * wy[far, None] * _GL_NODES[None, :]
        r2 = xs[:, :, None] ** 2 + ys[:, None, :] ** 2
        vals = np.einsum("mij,i,j->m", r2 ** (0.5 * a), _GL_WEIGHTS, _GL_WEIGHTS)
        out[far] = 0.25 * wx[far] * wy[far] * vals
    near = ~far
    if np.any(near):
        if a <= -2.0 and np.any((x0[near] <= 0) & (x1[near] >= 0) & (y0[near] <= 0) & (y1[near] >= 0)):
            raise ValueError("non-integrable singularity")

        def F(X, Y):
            return np.sign(X) * np.sign(Y) * _corner_primitive(a, np.abs(X), np.abs(Y))

        X0, X1, Y0, Y1 = x0[near], x1[near], y0[near], y1[near]
        out[near] = F(X1, Y1) - F(X0, Y1) - F(X1, Y0) + F(X0, Y0)
    return out


def power_cell_integral(a: float, region: Cube | Shell) -> float:
    """``int_region |x|^a dx`` for a cube or a shell.

    Exact in dim 1 (antiderivative of ``|t|^a``) and for shells; cubes in
    dim 2 use the polar primitive, accurate to roundoff.
    """
    if isinstance(region, Shell):
        n = region.dim
        if region.r_inner == 0 and a <= -n:
            raise ValueError("non-integrable singularity")
        surface = 2.0 if n == 1 else 2.0 * np.pi
        return float(surface * _radial_primitive(np.float64(region.r_inner), np.float64(region.r_outer), a + n - 1))
    lo, hi = region.lower, region.upper
    if region.dim == 1:
        return float(power_integral_1d(a, lo[0], hi[0]))
    if region.dim == 2:
        return float(power_integral_2d(a, lo[0], hi[0], lo[1], hi[1]))
    raise ValueError(f"unsupported dimension: {region.dim}")


def power_cell_integrals(grid: Mesh, a: float) -> np.ndarray:
    """``int_cell |x|^a`` for every cell of ``grid`` (shape ``grid.shape``)."""
    e = grid.axis_edges
    if grid.dim == 1:
        return power_integral_1d(a, e[:-1], e[1:])
    X0, Y0 = np.meshgrid(e[:-1], e[:-1], indexing="ij")
    X1, Y1 = np.meshgrid(e[1:], e[1:], indexing="ij")
    return power_integral_2d(a, X0, X1, Y0, Y1)


def power_cell_extrema(grid: Mesh, a: float, which: str = "min") -> np.ndarray:
    """Infimum (or supremum) of ``|x|^a`` over each cell."""
    e = grid.axis_edges
    lo, hi = e[:-1], e[1:]
    near = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(np.abs(lo), np.abs(hi)))
    far = np.maximum(np.abs(lo), np.abs(hi))
    if grid.dim == 2:
        near = np.hypot(near[:, None], near[None, :])
        far = np.hypot(far[:, None], far[None, :])
    small, large = (near, far) if a >= 0 else (far, near)
    r = small if which == "min" else large
    with np.errstate(divide="ignore"):
        return r**a


def power_cell_averages(grid: Mesh, a: float, radius: float | None = None) -> GridFunction:
    """Cell averages of ``|x|^a`` (times the indicator of ``|x| < radius``).

    In dim 1 the truncation is exact when ``radius`` is a mesh edge; in
    dim 2 cells are kept by their centers.
    """
    vals = power_cell_integrals(grid, a) / grid.cell_measure
    if radius is not None:
        c = grid.centers
        r = np.abs(c) if grid.dim == 1 else np.linalg.norm(c, axis=-1)
        vals = np.where(r < radius, vals, 0.0)
    return GridFunction(grid, vals)


# }}}


# {{{ integration


def _region_mask(grid: Mesh, region: Cube) -> np.ndarray:
    c = grid.axis_centers
    lo, hi = region.lower, region.upper
    masks = [(c >= lo[k]) & (c < hi[k]) for k in range(grid.dim)]
    if grid.dim == 1:
        return masks[0]
    return masks[0][:, None] & masks[1][None, :]


def integrate(f: GridFunction, region: Cube | None = None) -> float:
    """Sum of value times cell measure over cells whose centers lie in ``region``.

    Summation runs in row-major order; an empty intersection gives 0.
    """
    vals = f.values * f.grid.cell_measure
    if region is not None:
        if region.dim != f.grid.dim:
            raise ValueError("region dimension does not match grid")
        vals = vals[_region_mask(f.grid, region)]
    return float(math.fsum(vals.ravel()))


def region_measure(grid: Mesh, region: Cube) -> float:
    return float(math.fsum(grid.cell_measure[_region_mask(grid, region)].ravel()))


def _pairwise_levels(vals: np.ndarray, axis: int) -> list[np.ndarray]:
    """Dyadic partial sums along ``axis``: level j holds sums of 2^j cells."""
    n = vals.shape[axis]
    size = 1 << max(n - 1, 0).bit_length()
    pad = [(0, 0)] * vals.ndim
    pad[axis] = (0, size - n)
    levels = [np.pad(vals, pad)]
    while levels[-1].shape[axis] > 1:
        t = levels[-1]
        even = np.take(t, np.arange(0, t.shape[axis], 2), axis=axis)
        odd = np.take(t, np.arange(1, t.shape[axis], 2), axis=axis)
        levels.append(even + odd)
    return levels


def _dyadic_pieces(lo: np.ndarray, hi: np.ndarray):
    """Split ``[lo, hi)`` into dyadic nodes: yields ``(level, index, mask)``."""
    l, r = lo.copy(), hi.copy()
    level = 0
    while np.any(l < r):
        take_l = (l < r) & (l & 1 == 1)
        yield level, np.where(take_l, l, 0), take_l
        l = l + take_l
        take_r = (l < r) & (r & 1 == 1)
        r = r - take_r
        yield level, np.where(take_r, r, 0), take_r
        l, r = l >> 1, r >> 1
        level += 1


def box_sums(cell_values: np.ndarray, lo: np.ndarray, hi: np.ndarray, accurate: bool = False) -> np.ndarray:
    """Sums of ``cell_values`` over index boxes ``[lo, hi)``.

    The default uses prefix sums accumulated in extended precision.  With
    ``accurate=True`` every box is assembled from pairwise dyadic partial
    sums, so sums of non-negative data keep full relative accuracy however
    small the box is next to the total.
    """
    if accurate:
        vals = np.asarray(cell_values, float)
        if vals.ndim == 1:
            levels = _pairwise_levels(vals, 0)
            out = np.zeros(len(lo))
            for j, idx, m in _dyadic_pieces(lo[:, 0], hi[:, 0]):
                out += np.where(m, levels[j][idx], 0.0)
            return out
        rows = _pairwise_levels(vals, 0)
        table = [_pairwise_levels(t, 1) for t in rows]
        out = np.zeros(len(lo))
        for jx, ix, mx in _dyadic_pieces(lo[:, 0], hi[:, 0]):
            for jy, iy, my in _dyadic_pieces(lo[:, 1], hi[:, 1]):
                out += np.where(mx & my, table[jx][jy][ix, iy], 0.0)
        return out
    vals = np.asarray(cell_values, dtype=np.longdouble)
    if vals.ndim == 1:
        P = np.concatenate([np.zeros(1, np.longdouble), np.cumsum(vals)])
        return (P[hi[:, 0]] - P[lo[:, 0]]).astype(float)
    P = np.zeros((vals.shape[0] + 1, vals.shape[1] + 1), np.longdouble)
    P[1:, 1:] = vals.cumsum(0).cumsum(1)
    out = P[hi[:, 0], hi[:, 1]] - P[lo[:, 0], hi[:, 1]] - P[hi[:, 0], lo[:, 1]] + P[lo[:, 0], lo[:, 1]]
    return out.astype(float)


def box_minima(cell_values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Minimum of ``cell_values`` over each index box ``[lo, hi)``."""
    if cell_values.ndim == 1:
        table = [cell_values]
        while 2 ** len(table) <= len(cell_values):
            prev, span = table[-1], 2 ** (len(table) - 1)
            table.append(np.minimum(prev[:-span], prev[span:]))
        length = hi[:, 0] - lo[:, 0]
        k = np.floor(np.log2(length)).astype(int)
        out = np.empty(len(lo))
        for level in np.unique(k):
            sel = k == level
            t = table[level]
            out[sel] = np.minimum(t[lo[sel, 0]], t[hi[sel, 0] - 2**level])
        return out
    return np.array([cell_values[a0:b0, a1:b1].min() for (a0, a1), (b0, b1) in zip(lo, hi)])


# }}}


# {{{ file format


def write_grid_function(f: GridFunction, path) -> None:
    """Write ``f`` in the text format: one header line then one value per line."""
    lines = [f.grid.header()]
    lines.extend(repr(float(v)) for v in f.values.ravel())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_header(line: str) -> tuple[str, dict[str, str]]:
    parts = line.lstrip("#").split()
    if len(parts) < 2 or parts[1] != "v1":
        raise ValueError(f"unrecognized grid header: {line!r}")
    fields = dict(p.split("=", 1) for p in parts[2:])
    return parts[0], fields


def read_grid_function(path) -> GridFunction:
    with open(path) as fh:
        header = fh.readline().strip()
        values = np.array([float(v) for v in fh.read().split()])
    tag, kv = _parse_header(header)
    if tag == "fraclab-grid":
        grid: Mesh = build_grid(int(kv["dim"]), float(kv["extent"]), int(kv["points"]))
    elif tag == "fraclab-radial":
        breaks = tuple(float(b) for b in kv["breaks"].split(";")) if "breaks" in kv else ()
        grid = build_radial_grid(float(kv["rmin"]), float(kv["rmax"]), int(kv["shells"]), breaks)
    else:
        raise ValueError(f"unrecognized grid header: {header!r}")
    return GridFunction(grid, values.reshape(grid.shape))


# }}}
