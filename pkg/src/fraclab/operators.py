"""Riesz potentials, fractional maximal functions, the dyadic model operator,
Calderon-Zygmund stopping cubes and truncation on grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from .grid import (
    Cube,
    Grid,
    GridFunction,
    Mesh,
    RadialGrid,
    box_sums,
    kernel_cell_integrals,
    power_integral_1d,
    power_integral_2d,
)
from .weights import ExponentTriple


def _alpha(alpha, n: int, allow_zero: bool) -> float:
    a = alpha.alpha if isinstance(alpha, ExponentTriple) else float(alpha)
    lo_ok = a >= 0 if allow_zero else a > 0
    if not (lo_ok and a < n):
        raise ValueError(f"exponent out of range: alpha={a}")
    return a


# {{{ Riesz potential


def riesz_matrix(mesh: Mesh, alpha, quadrature: str | None = None) -> np.ndarray:
    """Matrix ``A`` with ``(I_alpha f)(x_i) = sum_j A_ij f_j`` in dim 1.

    ``"midpoint"`` uses ``|x_i - x_j|^{alpha-1} |cell_j|`` off the diagonal
    and the exact integral of the kernel over the own cell on it.
    ``"cell"`` integrates the kernel exactly over every cell, which is the
    default on radial grids where cells span many decades.
    """
    if mesh.dim != 1:
        raise ValueError("riesz_matrix is dim 1; use riesz_potential in dim 2")
    a = _alpha(alpha, 1, allow_zero=False)
    if quadrature is None:
        quadrature = "cell" if isinstance(mesh, RadialGrid) else "midpoint"
    x, e = mesh.centers, mesh.edges
    if quadrature == "cell":
        return kernel_cell_integrals(a - 1.0, x, e)
    if quadrature != "midpoint":
        raise ValueError(f"unknown quadrature: {quadrature}")
    d = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(d, 1.0)
    A = d ** (a - 1.0) * mesh.widths[None, :]
    np.fill_diagonal(A, power_integral_1d(a - 1.0, e[:-1] - x, e[1:] - x))
    return A


def _riesz_kernel_2d(grid: Grid, a: float) -> np.ndarray:
    n, h = grid.points_per_axis, grid.spacing
    k = h * np.arange(-(n - 1), n)
    r = np.hypot(k[:, None], k[None, :])
    r[n - 1, n - 1] = 1.0
    K = r ** (a - 2.0) * h * h
    K[n - 1, n - 1] = power_integral_2d(a - 2.0, -h / 2, h / 2, -h / 2, h / 2)
    return K


def riesz_potential(f: GridFunction, alpha, quadrature: str | None = None) -> GridFunction:
    """``I_alpha f`` sampled at cell centers, with ``f`` zero off the domain."""
    mesh = f.grid
    if mesh.dim == 1:
        return GridFunction(mesh, riesz_matrix(mesh, alpha, quadrature) @ f.values)
    a = _alpha(alpha, 2, allow_zero=False)
    K = _riesz_kernel_2d(mesh, a)
    n = mesh.points_per_axis
    method = "direct" if n <= 128 else "fft"
    full = signal.convolve(f.values, K, mode="full", method=method)
    return GridFunction(mesh, full[n - 1 : 2 * n - 1, n - 1 : 2 * n - 1])


def riesz_at_points(f: GridFunction, alpha, points) -> np.ndarray:
    """``I_alpha f`` at arbitrary points of the line, kernel integrated exactly per cell."""
    mesh = f.grid
    if mesh.dim != 1:
        raise ValueError("riesz_at_points is dim 1")
    a = _alpha(alpha, 1, allow_zero=False)
    x = np.atleast_1d(np.asarray(points, float))
    return kernel_cell_integrals(a - 1.0, x, mesh.edges) @ f.values


# }}}


# {{{ maximal functions

MAXIMAL_MODES = ("uncentered-cube", "centered-cube", "centered-ball", "dyadic")


def _uncentered_1d(mass: np.ndarray, edges: np.ndarray, a: float, chunk: int = 256) -> np.ndarray:
    """Exact sup over every cell interval ``[l, r)`` containing each cell."""
    n = len(mass)
    P = np.concatenate([[0.0], np.cumsum(mass)])
    out = np.zeros(n)
    cols = np.arange(1, n + 1)
    for s in range(0, n, chunk):
        rows = np.arange(s, min(s + chunk, n))
        length = edges[None, cols] - edges[rows, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            V = np.where(cols[None, :] > rows[:, None], (P[None, cols] - P[rows, None]) * length ** (a - 1.0), -np.inf)
        # best right end at or beyond each position
        R = np.maximum.accumulate(V[:, ::-1], axis=1)[:, ::-1]
        # cell i needs l <= i < r, i.e. r >= i + 1
        C = np.where(np.arange(n)[None, :] >= rows[:, None], R, -np.inf)
        out = np.maximum(out, C.max(axis=0))
    return out


def _uncentered_2d(mass: np.ndarray, h: float, a: float) -> np.ndarray:
    n = mass.shape[0]
    out = np.zeros_like(mass)
    for s in range(1, n + 1):
        idx = np.arange(n - s + 1)
        lo0, lo1 = np.meshgrid(idx, idx, indexing="ij")
        lo = np.stack([lo0.ravel(), lo1.ravel()], axis=1)
        V = box_sums(mass, lo, lo + s).reshape(n - s + 1, n - s + 1) * (s * h) ** (a - 2.0)
        padded = np.full((n + s - 1, n + s - 1), -np.inf)
        padded[s - 1 : n, s - 1 : n] = V
        rowmax = sliding_window_view(padded, s, axis=0).max(axis=-1)
        out = np.maximum(out, sliding_window_view(rowmax, s, axis=1).max(axis=-1))
    return out


def _cell_points(mesh: Mesh) -> np.ndarray:
    return mesh.centers[:, None] if mesh.dim == 1 else mesh.centers.reshape(-1, 2)


def _centered(f_mass: np.ndarray, nu_mass: np.ndarray, pts: np.ndarray, a_over_n: float, metric: str, chunk: int = 128):
    """Sup over centered cell sets (complete distance shells) of ``nu(S)^{a/n-1} * mass(S)``."""
    m = len(f_mass)
    out = np.zeros(m)
    for s in range(0, m, chunk):
        rows = slice(s, min(s + chunk, m))
        diff = pts[rows, None, :] - pts[None, :, :]
        d = np.abs(diff).max(axis=-1) if metric == "cube" else np.linalg.norm(diff, axis=-1)
        order = np.argsort(d, axis=1, kind="stable")
        ds = np.take_along_axis(d, order, axis=1)
        cf = np.cumsum(f_mass[order], axis=1)
        cn = np.cumsum(nu_mass[order], axis=1)
        # only whole shells count; ties within a relative 1e-12
        complete = np.ones_like(ds, dtype=bool)
        complete[:, :-1] = ds[:, 1:] > ds[:, :-1] * (1 + 1e-12) + 1e-300
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(complete & (cn > 0), cf * cn ** (a_over_n - 1.0), 0.0)
        out[rows] = val.max(axis=1)
    return out


def _dyadic_levels(grid: Grid):
    if not isinstance(grid, Grid) or not grid.is_dyadic:
        raise ValueError("dyadic operations need a uniform grid with 2^m cells per axis")
    n = grid.points_per_axis
    s = 1
    while s <= n:
        yield s
        s *= 2


def _block_reduce(x: np.ndarray, s: int) -> np.ndarray:
    if x.ndim == 1:
        return x.reshape(-1, s).sum(axis=1)
    m = x.shape[0] // s
    return x.reshape(m, s, m, s).sum(axis=(1, 3))


def _block_expand(x: np.ndarray, s: int) -> np.ndarray:
    if x.ndim == 1:
        return np.repeat(x, s)
    return np.repeat(np.repeat(x, s, axis=0), s, axis=1)


def fractional_maximal(f: GridFunction, alpha=0.0, mode: str = "uncentered-cube") -> GridFunction:
    """``M_alpha f`` at each cell: sup of ``|Q|^{alpha/n - 1} int_Q |f|`` over regions containing it.

    ``uncentered-cube`` is exact over every cell interval in dim 1 and over
    grid-aligned squares in dim 2.  Centered modes use cell sets made of
    whole distance shells around the cell (sup-norm shells for cubes,
    Euclidean shells for balls) and their discrete measure.  ``dyadic``
    takes dyadic cubes of the grid, from one cell up to the whole domain.
    """
    mesh = f.grid
    a = _alpha(alpha, mesh.dim, allow_zero=True)
    mass = np.abs(f.values) * mesh.cell_measure
    if mode == "uncentered-cube":
        if mesh.dim == 1:
            vals = _uncentered_1d(mass, mesh.edges, a)
        else:
            vals = _uncentered_2d(mass, mesh.spacing, a)
    elif mode in ("centered-cube", "centered-ball"):
        nu = GridFunction(mesh, np.ones(mesh.shape))
        return weighted_centered_fractional_maximal(f, a, nu, metric="cube" if mode == "centered-cube" else "ball")
    elif mode == "dyadic":
        vals = np.zeros(mesh.shape)
        meas = mesh.cell_measure
        for s in _dyadic_levels(mesh):
            blk = _block_reduce(mass, s) * _block_reduce(meas, s) ** (a / mesh.dim - 1.0)
            vals = np.maximum(vals, _block_expand(blk, s))
    else:
        raise ValueError(f"unknown maximal mode: {mode}")
    return GridFunction(mesh, vals)


def weighted_centered_fractional_maximal(f: GridFunction, alpha, nu: GridFunction, metric: str = "cube") -> GridFunction:
    """``M^c_{alpha,nu} f(x) = sup nu(Q_x)^{alpha/n - 1} int_{Q_x} |f| dnu`` over centered cell sets.

    ``nu`` is a density on the grid; cell sets with ``nu(Q_x) = 0`` are skipped.
    """
    mesh = f.grid
    a = _alpha(alpha, mesh.dim, allow_zero=True)
    if np.any(nu.values < 0):
        raise ValueError("measure must be nonnegative")
    nu_mass = (nu.values * mesh.cell_measure).ravel()
    if not np.any(nu_mass > 0):
        raise ValueError("measure vanishes identically")
    f_mass = np.abs(f.values).ravel() * nu_mass
    vals = _centered(f_mass, nu_mass, _cell_points(mesh), a / mesh.dim, metric)
    return GridFunction(mesh, vals.reshape(mesh.shape))


# }}}


# {{{ dyadic model operator


def _dyadic_boxes(n_cells: int, dim: int, s: int):
    starts = np.arange(0, n_cells, s)
    grids = np.meshgrid(*([starts] * dim), indexing="ij")
    lo = np.stack([g.ravel() for g in grids], axis=1)
    return lo, lo + s


def dyadic_model_operator(f: GridFunction, alpha) -> GridFunction:
    """``S f(x) = sum_{Q dyadic, x in Q} |Q|^{alpha/n - 1} int_{3Q} f``.

    Dyadic sides run from one cell to the whole domain; ``3Q`` is clipped
    to the domain.
    """
    mesh = f.grid
    a = _alpha(alpha, mesh.dim, allow_zero=True)
    if np.any(f.values < 0):
        raise ValueError("model operator defined for nonnegative f")
    n, dim = mesh.points_per_axis if isinstance(mesh, Grid) else 0, mesh.dim
    mass = f.values * mesh.cell_measure
    out = np.zeros(mesh.shape)
    for s in _dyadic_levels(mesh):
        lo, hi = _dyadic_boxes(n, dim, s)
        big = box_sums(mass, np.clip(lo - s, 0, n), np.clip(hi + s, 0, n))
        vol = (s * mesh.spacing) ** dim
        blocks = (big * vol ** (a / dim - 1.0)).reshape((n // s,) * dim)
        out += _block_expand(blocks, s)
    return GridFunction(mesh, out)


# }}}


# {{{ Calderon-Zygmund stopping cubes


@dataclass
class CzSelection:
    """Stopping cubes ``Q_{k,j}`` and exceptional sets ``E_{k,j}`` of a nonnegative function.

    Boxes are half-open cell-index ranges; ``exceptional_sets[(k, j)]``
    holds flat cell indices.
    """

    base_ratio: float
    dim: int
    levels: list[int]
    boxes: dict[int, list[tuple[np.ndarray, np.ndarray]]]
    averages: dict[int, np.ndarray]
    exceptional_sets: dict[tuple[int, int], np.ndarray]
    cell_measure: np.ndarray = field(repr=False)
    grid: Grid = field(repr=False)

    @property
    def stopping_cubes(self) -> dict[int, list[Cube]]:
        edges = self.grid.axis_edges
        return {
            k: [Cube(tuple(0.5 * (edges[lo] + edges[hi])), float(edges[hi[0]] - edges[lo[0]])) for lo, hi in bl]
            for k, bl in self.boxes.items()
        }

    def verify(self) -> dict[str, bool]:
        """Re-check disjointness, the two-sided average bound and the mass bound."""
        a, two_n = self.base_ratio, 2.0**self.dim
        meas = self.cell_measure.ravel()
        disjoint, avg_ok, mass_ok = True, True, True
        shape = self.cell_measure.shape
        for k in self.levels:
            cover = np.zeros(shape, int)
            for (lo, hi), avg in zip(self.boxes[k], self.averages[k]):
                cover[tuple(slice(l, h) for l, h in zip(lo, hi))] += 1
                thr = a**k
                avg_ok &= bool(thr < avg <= two_n * thr * (1 + 1e-12))
            disjoint &= bool(cover.max(initial=0) <= 1)
            for j, (lo, hi) in enumerate(self.boxes[k]):
                q_meas = float(np.prod([(h - l) for l, h in zip(lo, hi)])) * meas[0]
                e_meas = float(meas[self.exceptional_sets[(k, j)]].sum())
                mass_ok &= bool(e_meas >= (1 - two_n / a) * q_meas * (1 - 1e-12))
        seen = np.zeros(meas.size, int)
        for idx in self.exceptional_sets.values():
            seen[idx] += 1
        return {
            "disjoint": disjoint,
            "average_bounds": avg_ok,
            "mass_bound": mass_ok,
            "exceptional_disjoint": bool(seen.max(initial=0) <= 1),
        }


def cz_stopping_cubes(gu: GridFunction, a: float) -> CzSelection:
    """Maximal dyadic cubes with average above ``a^k`` for every admissible ``k``.

    A level ``k`` is admissible when some dyadic average exceeds ``a^k``
    and the whole-domain average is at most ``2^n a^k``; on the truncated
    lattice that is exactly when every stopping cube has an average in
    ``(a^k, 2^n a^k]``.  ``E_{k,j}`` is the part of ``Q_{k,j}`` where the
    dyadic maximal function stays at most ``a^{k+1}``.
    """
    grid = gu.grid
    dim = grid.dim
    if a <= 2**dim:
        raise ValueError("base ratio must exceed 2^n")
    if np.any(gu.values < 0) or not np.any(gu.values > 0):
        raise ValueError("need a nonnegative function that is not identically zero")
    n = grid.points_per_axis
    mass = gu.values * grid.cell_measure
    meas = grid.cell_measure
    sides = list(_dyadic_levels(grid))[::-1]
    avgs = {s: _block_reduce(mass, s) / _block_reduce(meas, s) for s in sides}
    md = np.zeros(grid.shape)
    for s in sides:
        md = np.maximum(md, _block_expand(avgs[s], s))
    root = float(avgs[n].ravel()[0])
    top = float(max(v.max() for v in avgs.values()))
    logs = math.log(a)
    k_lo = math.ceil(math.log(root / 2**dim) / logs - 1e-12)
    levels = [k for k in range(k_lo, math.ceil(math.log(top) / logs) + 1) if a**k < top and root <= 2**dim * a**k]

    boxes, averages, exc = {}, {}, {}
    flat_md = md.ravel()
    idx_all = np.arange(grid.size).reshape(grid.shape)
    for k in levels:
        thr = a**k
        covered = np.zeros(grid.shape, bool)
        bl, av = [], []
        for s in sides:
            hit = (avgs[s] > thr) & ~_block_reduce(covered, s).astype(bool)
            for pos in zip(*np.nonzero(hit)):
                lo = np.array(pos) * s
                bl.append((lo, lo + s))
                av.append(float(avgs[s][pos]))
                covered[tuple(slice(l, l + s) for l in lo)] = True
        boxes[k], averages[k] = bl, np.array(av)
        for j, (lo, hi) in enumerate(bl):
            cells = idx_all[tuple(slice(l, h) for l, h in zip(lo, hi))].ravel()
            exc[(k, j)] = cells[(flat_md[cells] > thr) & (flat_md[cells] <= a ** (k + 1))]
    return CzSelection(float(a), dim, levels, boxes, averages, exc, meas, grid)


# }}}


def truncate(g: GridFunction, lam: float) -> GridFunction:
    """``tau_lambda g = min(g, 2 lambda) - min(g, lambda)``."""
    if lam <= 0:
        raise ValueError("truncation level must be positive")
    if np.any(g.values < 0):
        raise ValueError("truncation expects a nonnegative function")
    v = g.values
    return GridFunction(g.grid, np.minimum(v, 2 * lam) - np.minimum(v, lam))
