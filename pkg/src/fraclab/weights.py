"""Weight constants and testing conditions for power and sampled weights."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate as sci_integrate
from scipy import optimize

from .grid import (
    Cube,
    CubeFamily,
    GridFunction,
    Mesh,
    box_minima,
    box_sums,
    integrate,
    offset_family,
    power_cell_extrema,
    power_cell_integral,
    power_cell_integrals,
    region_measure,
)


def dual(p: float) -> float:
    """Hoelder conjugate ``p' = p / (p - 1)`` (``inf`` for ``p = 1``)."""
    return math.inf if p == 1 else p / (p - 1.0)


@dataclass(frozen=True)
class ExponentTriple:
    """Exponents ``(n, p, q, alpha)`` tied by ``1/p - 1/q = alpha/n``."""

    n: int
    p: float
    q: float
    alpha: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if not 0 <= self.alpha < self.n:
            raise ValueError(f"exponent out of range: alpha={self.alpha}")
        if not 1 <= self.p <= self.q < math.inf:
            raise ValueError(f"need 1 <= p <= q < inf, got p={self.p}, q={self.q}")
        if abs(1 / self.p - 1 / self.q - self.alpha / self.n) > 1e-12:
            raise ValueError("exponents violate 1/p - 1/q = alpha/n")

    @classmethod
    def from_alpha(cls, n: int, p: float, alpha: float) -> ExponentTriple:
        inv_q = 1.0 / p - alpha / n
        if inv_q <= 0:
            raise ValueError("p must be below n/alpha")
        return cls(n, p, 1.0 / inv_q, alpha)

    @property
    def p_dual(self) -> float:
        return dual(self.p)

    @property
    def q_dual(self) -> float:
        return dual(self.q)

    @property
    def r(self) -> float:
        """``1 + q/p'``, the A_r class of ``w^q``."""
        return 1.0 + self.q / self.p_dual

    def dual_pair(self) -> ExponentTriple:
        """The triple ``(n, q', p', alpha)`` governing ``w^{-1}``."""
        return ExponentTriple(self.n, self.q_dual, self.p_dual, self.alpha)

    def to_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "q": self.q, "alpha": self.alpha}


# {{{ weights


@dataclass(frozen=True, eq=False)
class Weight:
    """A positive weight: either ``|x|^exponent`` or cellwise samples.

    Derived views such as ``u = w^q`` or ``sigma = w^{-p'}`` are obtained
    with :meth:`pow`.  Power weights are integrated exactly per cell.
    """

    exponent: float | None = None
    samples: GridFunction | None = None

    def __post_init__(self) -> None:
        if (self.exponent is None) == (self.samples is None):
            raise ValueError("give exactly one of exponent or samples")
        if self.samples is not None and np.any(self.samples.values <= 0):
            raise ValueError("weight must be positive")

    @classmethod
    def power(cls, a: float) -> Weight:
        return cls(exponent=float(a))

    @classmethod
    def sampled(cls, f: GridFunction) -> Weight:
        return cls(samples=f)

    @classmethod
    def ones(cls) -> Weight:
        return cls(exponent=0.0)

    @property
    def is_power(self) -> bool:
        return self.exponent is not None

    def pow(self, s: float) -> Weight:
        if self.is_power:
            return Weight(exponent=self.exponent * s)
        return Weight(samples=GridFunction(self.samples.grid, self.samples.values**s))

    def _check_grid(self, grid: Mesh) -> None:
        if not self.is_power and self.samples.grid is not grid:
            g = self.samples.grid
            if type(g) is not type(grid) or g.shape != grid.shape or not np.allclose(g.axis_edges, grid.axis_edges):
                raise ValueError("sampled weight lives on a different grid")

    def _check_integrable(self, dim: int) -> None:
        if self.is_power and self.exponent <= -dim:
            raise ValueError("non-integrable derived view")

    def cell_integrals(self, grid: Mesh) -> np.ndarray:
        """``int_cell w`` for every cell."""
        self._check_grid(grid)
        if self.is_power:
            if self.exponent == 0:
                return grid.cell_measure.copy()
            self._check_integrable(grid.dim)
            return power_cell_integrals(grid, self.exponent)
        return self.samples.values * grid.cell_measure

    def cell_minima(self, grid: Mesh) -> np.ndarray:
        self._check_grid(grid)
        if self.is_power:
            return power_cell_extrema(grid, self.exponent, "min")
        return self.samples.values

    def cube_integral(self, cube: Cube, grid: Mesh | None = None) -> float:
        if self.is_power:
            if self.exponent == 0:
                return cube.volume
            self._check_integrable(cube.dim)
            return power_cell_integral(self.exponent, cube)
        return integrate(self.samples, cube)

    def cube_infimum(self, cube: Cube) -> float:
        if not self.is_power:
            raise ValueError("cube_infimum needs a power weight; use grid-aligned families")
        lo, hi = np.abs(cube.lower), np.abs(cube.upper)
        inside = (cube.lower <= 0) & (cube.upper >= 0)
        near = np.linalg.norm(np.where(inside, 0.0, np.minimum(lo, hi)))
        far = np.linalg.norm(np.maximum(lo, hi))
        r = near if self.exponent >= 0 else far
        return 0.0 if r == 0 and self.exponent > 0 else r**self.exponent

    def describe(self) -> str:
        return f"power:a={self.exponent!r}" if self.is_power else "sampled"


# }}}


# {{{ per-cube reductions


@dataclass
class ConstantReport:
    """Supremum of a per-cube quantity together with its maximizing cube."""

    value: float
    extremal_cube: Cube
    family_kind: str
    per_cube: np.ndarray | None = field(default=None, repr=False)
    skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "value": float(self.value),
            "extremal_cube": self.extremal_cube.to_dict(),
            "family": self.family_kind,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _family_integrals(views: list[Weight], family: CubeFamily):
    """Per-cube integrals of every view, per-cube measures and a cube lookup."""
    if family.aligned:
        grid = family.grid
        cells = [v.cell_integrals(grid) for v in views]
        meas = grid.cell_measure
        ints = [[] for _ in views]
        ms, los, his = [], [], []
        for lo, hi in family.iter_blocks():
            for acc, c in zip(ints, cells):
                acc.append(box_sums(c, lo, hi, accurate=True))
            ms.append(box_sums(meas, lo, hi, accurate=True))
            los.append(lo)
            his.append(hi)
        lo, hi = np.concatenate(los), np.concatenate(his)
        return (
            [np.concatenate(a) for a in ints],
            np.concatenate(ms),
            lambda k: family.cube_at(lo[k], hi[k]),
            (lo, hi),
        )
    cubes = family.cubes
    ints = [np.array([v.cube_integral(c, family.grid) for c in cubes]) for v in views]
    if family.grid is not None and any(not v.is_power for v in views):
        ms = np.array([region_measure(family.grid, c) for c in cubes])
    else:
        ms = np.array([c.volume for c in cubes])
    return ints, ms, lambda k: cubes[k], None


def _report(per_cube: np.ndarray, lookup, family: CubeFamily, skipped: int = 0) -> ConstantReport:
    k = int(np.nanargmax(per_cube))
    return ConstantReport(float(per_cube[k]), lookup(k), family.kind, per_cube, skipped)


def _product_constant(wa: Weight, wb: Weight, power: float, family: CubeFamily) -> ConstantReport:
    """``sup_Q (avg_Q wa) (avg_Q wb)^power``."""
    (ia, ib), m, lookup, _ = _family_integrals([wa, wb], family)
    keep = m > 0
    per = np.full(len(m), np.nan)
    per[keep] = (ia[keep] / m[keep]) * (ib[keep] / m[keep]) ** power
    return _report(per, lookup, family, int(np.sum(~keep)))


def apq_constant(w: Weight, e: ExponentTriple, family: CubeFamily) -> ConstantReport:
    """``[w]_{A_{p,q}} = sup_Q (avg w^q) (avg w^{-p'})^{q/p'}`` over ``family``."""
    if e.p <= 1:
        raise ValueError("apq_constant needs p > 1; use a1q_constant")
    pd = e.p_dual
    return _product_constant(w.pow(e.q), w.pow(-pd), e.q / pd, family)


def ap_constant(w: Weight, p: float, family: CubeFamily) -> ConstantReport:
    """``[w]_{A_p} = sup_Q (avg w) (avg w^{1-p'})^{p-1}``."""
    if p <= 1:
        raise ValueError("ap_constant needs p > 1")
    return _product_constant(w, w.pow(1.0 - dual(p)), p - 1.0, family)


def a1q_constant(w: Weight, q: float, family: CubeFamily) -> ConstantReport:
    """``[w]_{A_{1,q}} = sup_Q avg_Q(w^q) / inf_Q w^q`` with the inf taken cellwise."""
    if q < 1:
        raise ValueError("a1q_constant needs q >= 1")
    u = w.pow(q)
    (iu,), m, lookup, ranges = _family_integrals([u], family)
    if ranges is not None:
        mins = box_minima(u.cell_minima(family.grid), *ranges)
    else:
        mins = np.array([u.cube_infimum(c) for c in family.cubes])
    with np.errstate(divide="ignore", invalid="ignore"):
        per = np.where(mins > 0, (iu / m) / mins, np.inf)
    return _report(per, lookup, family)


@dataclass
class DualityCheck:
    lhs1: float
    rhs1: float
    lhs2: float
    rhs2: float

    @property
    def errors(self) -> tuple[float, float]:
        return (abs(self.lhs1 - self.rhs1) / abs(self.rhs1), abs(self.lhs2 - self.rhs2) / abs(self.rhs2))


def duality_identities(w: Weight, e: ExponentTriple, family: CubeFamily) -> DualityCheck:
    """Evaluate both sides of the two duality identities on one family.

    ``[w]_{A_{p,q}} = [w^q]_{A_{1+q/p'}}`` and
    ``[w^{-1}]_{A_{q',p'}} = [w]_{A_{p,q}}^{p'/q}``.
    """
    lhs1 = apq_constant(w, e, family).value
    rhs1 = ap_constant(w.pow(e.q), e.r, family).value
    lhs2 = apq_constant(w.pow(-1.0), e.dual_pair(), family).value
    rhs2 = lhs1 ** (e.p_dual / e.q)
    return DualityCheck(lhs1, rhs1, lhs2, rhs2)


@dataclass
class ReverseDoublingReport:
    """Per-cube reverse doubling data; ``worst_ratio_margin`` is the minimum slack."""

    worst_ratio_margin: float
    ratios: np.ndarray
    bounds: np.ndarray
    constant: float
    skipped: int

    @property
    def margins(self) -> np.ndarray:
        return self.bounds - self.ratios


def reverse_doubling_report(w: Weight, e: ExponentTriple, family: CubeFamily) -> ReverseDoublingReport:
    """Check ``int_Q w^q / int_{2Q} w^q <= 1 - (|2Q \\ Q|/|2Q|)^q / [w]`` on every cube.

    ``[w]`` is the A_{p,q} supremum over ``family`` enlarged by the doubled
    cubes, so the bound is the proven one with ``E = 2Q \\ Q``.  Cubes whose
    double leaves the domain are skipped.
    """
    if not family.aligned:
        raise ValueError("reverse doubling needs a grid-aligned family")
    grid = family.grid
    u_cells = w.pow(e.q).cell_integrals(grid)
    s_cells = w.pow(-e.p_dual).cell_integrals(grid)
    meas = grid.cell_measure
    centers = grid.axis_centers
    lo_all, hi_all = [], []
    for lo, hi in family.iter_blocks():
        lo_all.append(lo)
        hi_all.append(hi)
    lo, hi = np.concatenate(lo_all), np.concatenate(hi_all)
    edges = grid.axis_edges
    a, b = edges[lo], edges[hi]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    lo2 = np.searchsorted(centers, mid - 2 * half, side="left")
    hi2 = np.searchsorted(centers, mid + 2 * half, side="left")
    side = np.max(b - a, axis=1, keepdims=True)
    ok = np.all((mid - side >= edges[0] - 1e-12 * side) & (mid + side <= edges[-1] + 1e-12 * side), axis=1)
    lo, hi, lo2, hi2 = lo[ok], hi[ok], lo2[ok], hi2[ok]
    uq, u2 = box_sums(u_cells, lo, hi, True), box_sums(u_cells, lo2, hi2, True)
    m1, m2 = box_sums(meas, lo, hi, True), box_sums(meas, lo2, hi2, True)
    s2 = box_sums(s_cells, lo2, hi2, True)
    a2 = (u2 / m2) * (s2 / m2) ** (e.q / e.p_dual)
    const = max(apq_constant(w, e, family).value, float(np.max(a2)) if len(a2) else 1.0)
    ratios = uq / u2
    bounds = 1.0 - ((m2 - m1) / m2) ** e.q / const
    worst = float(np.min(bounds - ratios)) if len(ratios) else math.inf
    return ReverseDoublingReport(worst, ratios, bounds, const, int(np.sum(~ok)))


def subset_ratio_check(w: Weight, e: ExponentTriple, cube_lo, cube_hi, subset: np.ndarray, grid: Mesh):
    """Both sides of ``(|E|/|Q|)^q [w]_Q^{-1} <= int_E w^q / int_Q w^q``.

    ``subset`` is a boolean mask of cells (inside the index box) forming E;
    ``[w]_Q`` is the A_{p,q} quantity of Q itself, so the inequality is the
    per-cube Hoelder step and must hold exactly.
    """
    sl = tuple(slice(a, b) for a, b in zip(np.atleast_1d(cube_lo), np.atleast_1d(cube_hi)))
    u = w.pow(e.q).cell_integrals(grid)[sl]
    s = w.pow(-e.p_dual).cell_integrals(grid)[sl]
    m = grid.cell_measure[sl]
    E = subset[sl]
    apq_q = (u.sum() / m.sum()) * (s.sum() / m.sum()) ** (e.q / e.p_dual)
    lhs = (m[E].sum() / m.sum()) ** e.q / apq_q
    rhs = u[E].sum() / u.sum()
    return lhs, rhs


# }}}


# {{{ testing conditions


def _power_kernel_integral(c: float, ell: float, beta: float, gamma: float, tail_factor: float = 100.0):
    """``int_R (ell + |c - x|)^beta |x|^gamma dx`` in dim 1.

    The head ``|x| <= R`` is integrated with QUADPACK (algebraic endpoint
    weight at the origin); the tail ``|x| > R`` is bracketed analytically
    and its midpoint returned with the bracket half-width.
    """
    if beta + gamma + 1 >= 0:
        raise ValueError("global integral diverges")
    R = tail_factor * (abs(c) + ell + 1.0)

    def kern(x):
        return (ell + abs(c - x)) ** beta

    head = 0.0
    opts = {"epsabs": 0.0, "epsrel": 1e-11, "limit": 400}
    pts = sorted({-R, 0.0, c, R})
    for s0, s1 in zip(pts[:-1], pts[1:]):
        if s1 <= s0:
            continue
        if s0 == 0.0:
            val = sci_integrate.quad(kern, s0, s1, weight="alg", wvar=(gamma, 0.0), **opts)[0]
        elif s1 == 0.0:
            val = sci_integrate.quad(kern, s0, s1, weight="alg", wvar=(0.0, gamma), **opts)[0]
        else:
            val = sci_integrate.quad(lambda x: kern(x) * abs(x) ** gamma, s0, s1, **opts)[0]
        head += val
    eps = (ell + abs(c)) / R
    T = 2.0 * R ** (beta + gamma + 1) / -(beta + gamma + 1)
    lo_t, hi_t = T * (1 + eps) ** beta, T * (1 - eps) ** beta
    return head + 0.5 * (lo_t + hi_t), 0.5 * (hi_t - lo_t)


def global_testing_constant(
    u: Weight,
    v: Weight,
    e: ExponentTriple,
    family: CubeFamily,
    extension: str = "zero",
    tail_tolerance: float = 1e-6,
) -> ConstantReport:
    """``[u, v]_{Glo(p,q)}``: sup over cubes of

    ``(int_Q u)^{1/q} (int (|Q|^{1/n} + |x_Q - x|)^{(alpha-n)p'} v^{1-p'})^{1/p'}``.

    Power weights (dim 1) integrate over the whole line with an analytic
    tail.  Sampled weights use the grid; with ``extension="zero"`` the
    weight view ``v^{1-p'}`` is taken to vanish off the domain, with
    ``extension="constant"`` the boundary values are continued and the
    operation fails unless the continued tail is below
    ``tail_tolerance`` times the head.
    """
    if e.p <= 1:
        raise ValueError("global testing needs p > 1")
    pd = e.p_dual
    beta = (e.alpha - e.n) * pd
    sigma = v.pow(1.0 - pd)
    cubes = family.members
    if u.is_power and sigma.is_power:
        if e.n != 1:
            raise ValueError("analytic global testing is implemented in dim 1")
        heads = []
        for Q in cubes:
            g, _ = _power_kernel_integral(Q.center[0], Q.side, beta, sigma.exponent)
            heads.append(g)
        mass = np.array([u.cube_integral(Q) for Q in cubes])
        per = mass ** (1 / e.q) * np.array(heads) ** (1 / pd)
        return _report(per, lambda k: cubes[k], family)

    grid = family.grid if family.grid is not None else (u.samples or sigma.samples).grid
    sig_cells = sigma.cell_integrals(grid)
    centers = grid.centers.reshape(-1, grid.dim) if grid.dim > 1 else grid.centers[:, None]
    sig_flat = sig_cells.ravel()
    per = np.empty(len(cubes))
    for k, Q in enumerate(cubes):
        dist = np.linalg.norm(centers - np.asarray(Q.center)[None, :], axis=1)
        head = float(np.sum((Q.side + dist) ** beta * sig_flat))
        if extension == "constant":
            edge_val = float(np.max(sigma.samples.values)) if not sigma.is_power else 1.0
            # |x| > L in dim 1: int (ell + |x| - |c|)^beta over both tails
            d0 = Q.side + grid.extent - abs(Q.center[0])
            tail = edge_val * 2.0 * d0 ** (beta + 1) / -(beta + 1) if e.n == 1 else math.inf
            if tail > tail_tolerance * head:
                raise ValueError("global integral tail is not negligible on this domain")
        mass = u.cube_integral(Q, grid)
        per[k] = mass ** (1 / e.q) * head ** (1 / pd)
    return _report(per, lambda k: cubes[k], family)


def sawyer_testing_constant(
    u: Weight,
    sigma: Weight,
    e: ExponentTriple,
    family: CubeFamily,
    potential: Callable[[GridFunction], GridFunction] | None = None,
) -> ConstantReport:
    """``[u, sigma]_{S_{p,q}} = sup_Q sigma(Q)^{-1/p} ||chi_Q I_alpha(chi_Q sigma)||_{L^q(u)}``.

    ``potential`` maps a grid function to its Riesz potential (defaults to
    :func:`fraclab.operators.riesz_potential` at ``e.alpha``).  Cubes with
    ``sigma(Q) = 0`` are skipped.
    """
    if not family.aligned:
        raise ValueError("local testing needs a grid-aligned family")
    grid = family.grid
    if potential is None:
        from .operators import riesz_matrix

        A = riesz_matrix(grid, e.alpha)
        potential = lambda g: GridFunction(grid, (A @ g.values.ravel()).reshape(grid.shape))  # noqa: E731
    s_cells = sigma.cell_integrals(grid)
    s_density = s_cells / grid.cell_measure
    u_cells = u.cell_integrals(grid)
    vals, cubes, skipped = [], [], 0
    for lo, hi in family.iter_blocks():
        for l, h in zip(lo, hi):
            sl = tuple(slice(a, b) for a, b in zip(l, h))
            mass = float(s_cells[sl].sum())
            if mass <= 0:
                skipped += 1
                continue
            chi = np.zeros(grid.shape)
            chi[sl] = s_density[sl]
            Ig = potential(GridFunction(grid, chi)).values
            norm = float(np.sum(np.abs(Ig[sl]) ** e.q * u_cells[sl])) ** (1 / e.q)
            vals.append(mass ** (-1 / e.p) * norm)
            cubes.append(family.cube_at(l, h))
    per = np.array(vals)
    return _report(per, lambda k: cubes[k], family, skipped)


# }}}


# {{{ analytic power-weight constants


def _power_profile(kind: str, a: float, e: ExponentTriple, center: np.ndarray) -> float:
    Q = Cube(tuple(center), 1.0)
    if kind == "apq":
        pd = e.p_dual
        up = power_cell_integral(a * e.q, Q)
        sp = power_cell_integral(-a * pd, Q)
        return up * sp ** (e.q / pd)
    w = Weight.power(a * e.q)
    return w.cube_integral(Q) / w.cube_infimum(Q)


def _check_power(kind: str, a: float, e: ExponentTriple) -> None:
    if a * e.q <= -e.n or (kind == "apq" and -a * e.p_dual <= -e.n):
        raise ValueError("non-integrable derived view")


def _maximize_offset(profile: Callable[[np.ndarray], float], n: int, tol: float = 1e-8):
    if n == 1:
        ts = np.concatenate([np.linspace(0.0, 2.0, 201), np.geomspace(2.0, 1e3, 60)[1:]])
        vals = np.array([profile(np.array([t])) for t in ts])
        k = int(np.argmax(vals))
        lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
        if hi <= lo:
            return vals[k], np.array([ts[k]])
        res = optimize.minimize_scalar(
            lambda t: -profile(np.array([t])), bounds=(lo, hi), method="bounded", options={"xatol": tol}
        )
        if -res.fun >= vals[k]:
            return -res.fun, np.array([res.x])
        return vals[k], np.array([ts[k]])
    ts = np.linspace(0.0, 1.5, 31)
    best, arg = -np.inf, None
    for t1 in ts:
        for t2 in ts[ts <= t1 + 1e-12]:
            val = profile(np.array([t1, t2]))
            if val > best:
                best, arg = val, np.array([t1, t2])
    res = optimize.minimize(lambda t: -profile(np.abs(t)), arg, method="Nelder-Mead", options={"xatol": 1e-6, "fatol": tol * best})
    if -res.fun > best:
        return -res.fun, np.abs(res.x)
    return best, arg


def power_apq_analytic(a: float, e: ExponentTriple, return_offset: bool = False):
    """``[|x|^a]_{A_{p,q}}`` over all cubes via dilation invariance.

    The per-cube quantity depends only on the cube's center measured in
    units of its side, so the supremum is a maximization over that offset:
    a scan followed by bounded Brent refinement (dim 1) or Nelder-Mead
    (dim 2) on exact power integrals.
    """
    _check_power("apq", a, e)
    if a == 0:
        return (1.0, np.zeros(e.n)) if return_offset else 1.0
    val, t = _maximize_offset(lambda c: _power_profile("apq", a, e, c), e.n)
    return (val, t) if return_offset else val


def power_a1q_analytic(a: float, q: float, n: int = 1, return_offset: bool = False):
    """``[|x|^a]_{A_{1,q}}`` (``A_1`` of ``|x|^{aq}``) over all cubes."""
    e = ExponentTriple(n, 1.0, 1.0, 0.0) if q == 1 else ExponentTriple.from_alpha(n, 1.0, n * (1 - 1 / q))
    _check_power("a1q", a, e)
    if a == 0:
        return (1.0, np.zeros(n)) if return_offset else 1.0
    val, t = _maximize_offset(lambda c: _power_profile("a1q", a, e, c), n)
    return (val, t) if return_offset else val


def power_offset_profile(a: float, e: ExponentTriple, offsets) -> np.ndarray:
    """The per-cube A_{p,q} quantity of ``|x|^a`` on unit cubes at ``offsets``."""
    return np.array([_power_profile("apq", a, e, np.atleast_1d(t)) for t in np.atleast_1d(offsets)])


def power_family(kind: str = "dyadic", n: int = 1, reach: int = 64) -> CubeFamily:
    """A scale-free cube family for power weights.

    Per-cube quantities of ``|x|^a`` are dilation invariant, so the dyadic
    lattice reduces to the unit cubes ``[m, m+1]^n`` and the thirds lattice
    adds shifts by one and two thirds.  Symmetry of ``|x|`` lets the
    offsets stay in the closed positive orthant.  ``kind="offsets"`` is a
    dense sweep of centers approximating the supremum over all cubes.
    """
    if kind in ("dyadic", "thirds", "shifted-dyadic-thirds"):
        shifts = [0.0] if kind == "dyadic" else [0.0, 1 / 3, 2 / 3]
        base = np.unique(np.concatenate([np.arange(reach) + 0.5 - s for s in shifts]))
    elif kind == "offsets":
        base = np.concatenate([np.linspace(0.0, 1.0, 81), np.linspace(1.05, 4.0, 60), np.geomspace(4.5, reach, 20)])
    else:
        raise ValueError(f"unknown power family: {kind}")
    if n == 1:
        fam = offset_family(1, base)
    else:
        fam = offset_family(2, [(x, y) for x in base for y in base if y <= x])
    fam.kind = kind
    return fam


# }}}
