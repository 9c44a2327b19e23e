"""Weighted norms, weak quasinorms, operator-norm lower bounds and exponent fits."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .grid import GridFunction, Mesh
from .weights import Weight


def _cell_masses(u, grid: Mesh) -> np.ndarray:
    """Cell masses of a measure given as a Weight, a density, an array of masses or None."""
    if u is None:
        return grid.cell_measure.ravel()
    if isinstance(u, Weight):
        return u.cell_integrals(grid).ravel()
    if isinstance(u, GridFunction):
        return (u.values * grid.cell_measure).ravel()
    m = np.asarray(u, float).ravel()
    if m.shape[0] != grid.size:
        raise ValueError("mass array does not match the grid")
    return m


def weighted_lp_norm(f: GridFunction, w: Weight | None, p: float) -> float:
    """``||f w||_{L^p}`` with ``w^p`` integrated exactly per cell for power weights."""
    if p < 1:
        raise ValueError("p must be at least 1")
    masses = _cell_masses(None if w is None else w.pow(p), f.grid)
    return math.fsum(np.abs(f.values.ravel()) ** p * masses) ** (1.0 / p)


def weak_quasinorm(g: GridFunction | np.ndarray, u=None, q: float = 1.0, grid: Mesh | None = None) -> float:
    """``sup_lambda lambda u({|g| > lambda})^{1/q}``, exact for cellwise constant ``g``.

    ``u`` is a :class:`Weight` (used as a density), a :class:`GridFunction`
    density, an array of cell masses, or ``None`` for Lebesgue measure.
    """
    if q < 1:
        raise ValueError("q must be at least 1")
    if isinstance(g, GridFunction):
        grid, vals = g.grid, np.abs(g.values).ravel()
    else:
        vals = np.abs(np.asarray(g, float)).ravel()
    masses = _cell_masses(u, grid) if grid is not None else np.asarray(u, float).ravel()
    order = np.argsort(-vals, kind="stable")
    v, cum = vals[order], np.cumsum(masses[order])
    # evaluate only at the end of each tie group
    last = np.ones(len(v), bool)
    last[:-1] = v[1:] < v[:-1]
    return float(np.max(v[last] * cum[last] ** (1.0 / q), initial=0.0))


@dataclass
class KernelIdentityCheck:
    lhs: float
    rhs: float

    @property
    def rel_err(self) -> float:
        return abs(self.lhs - self.rhs) / abs(self.rhs)


def kernel_weak_norm_identity_check(
    y: float, alpha: float, u, grid: Mesh, refine: int = 4
) -> KernelIdentityCheck:
    """Both sides of ``|| |. - y|^{alpha-n} ||_{L^{q0,inf}(u)}^{q0} = sup_t t^{-n} u(B(y, t))``.

    ``u`` is taken uniform inside each cell.  The left side is the weak
    quasinorm of the kernel's minimum over shells ``k h <= |x - y| < (k+1) h``
    centered at ``y`` (``h`` is the smallest cell width over ``refine``),
    so every level set is a ball of radius ``k h``.  The right side
    maximizes the ball ratio over the cell edge distances, where the
    piecewise linear ball mass makes it extremal, and the ``t -> 0`` limit.
    """
    if grid.dim != 1:
        raise ValueError("kernel identity check is dim 1")
    if not 0 < alpha < 1:
        raise ValueError(f"exponent out of range: alpha={alpha}")
    e = grid.edges
    if not e[0] <= y <= e[-1]:
        raise ValueError("center lies outside the domain")
    mass = _cell_masses(u, grid)
    if mass.sum() <= 0:
        raise ValueError("measure vanishes identically")
    q0 = 1.0 / (1.0 - alpha)
    cum = np.concatenate([[0.0], np.cumsum(mass)])

    h = float(np.min(np.diff(e))) / refine
    reach = max(y - e[0], e[-1] - y)
    r = np.arange(int(np.ceil(reach / h)) + 1) * h
    ball_mass = np.interp(np.minimum(y + r, e[-1]), e, cum) - np.interp(np.maximum(y - r, e[0]), e, cum)
    lhs = weak_quasinorm(r[1:] ** (alpha - 1.0), np.diff(ball_mass), q0) ** q0

    dens = mass / grid.widths

    def ball(t):
        lo = np.clip(e[:-1], y - t, y + t)
        hi = np.clip(e[1:], y - t, y + t)
        return float(np.sum(dens * (hi - lo)))

    near = np.where((e[:-1] <= y) & (e[1:] >= y), 0.0, np.minimum(np.abs(e[:-1] - y), np.abs(e[1:] - y)))
    far = np.maximum(np.abs(e[:-1] - y), np.abs(e[1:] - y))
    ts = np.unique(np.concatenate([near[near > 0], far]))
    best = max(ball(t) / t for t in ts)
    # small balls see the density on either side of y
    j = int(np.clip(np.searchsorted(e, y, side="right") - 1, 0, len(dens) - 1))
    left = dens[j - 1] if (e[j] == y and j > 0) else dens[j]
    best = max(best, dens[j] + left)
    return KernelIdentityCheck(lhs, best)


# {{{ operator norm search


@dataclass
class NormSearch:
    """Outcome of :func:`operator_norm_lower_bound`; ``value`` is a certified lower bound."""

    value: float
    best_f: np.ndarray
    candidate_values: list[float]
    history: list[float]
    iterations: int
    skipped: int = 0


def _as_operator(apply) -> LinearOperator:
    if isinstance(apply, LinearOperator):
        return apply
    if callable(apply) and not hasattr(apply, "shape"):
        raise ValueError("pass a matrix or a scipy LinearOperator with rmatvec")
    return aslinearoperator(apply)


def operator_norm_lower_bound(
    apply,
    w: Weight | None,
    p: float,
    q: float,
    grid: Mesh,
    candidates: list[np.ndarray],
    max_iter: int = 200,
    rtol: float = 1e-6,
    ascent: bool = True,
) -> NormSearch:
    """Lower bound for ``sup_f ||w A f||_{L^q} / ||w f||_{L^p}`` over nonnegative ``f``.

    Each candidate is scored, then the best is refined by the nonlinear
    power method ``f <- (A^T[U (A f)^{q-1}] / V)^{1/(p-1)}`` where ``U`` and
    ``V`` are the cell integrals of ``w^q`` and ``w^p``.  The running
    maximum is returned, so the result never decreases along the ascent.
    """
    A = _as_operator(apply)
    U = _cell_masses(None if w is None else w.pow(q), grid)
    V = _cell_masses(None if w is None else w.pow(p), grid)

    def ratio(f):
        Af = A.matvec(f)
        num = math.fsum(np.abs(Af) ** q * U) ** (1 / q)
        den = math.fsum(np.abs(f) ** p * V) ** (1 / p)
        return num / den if den > 0 else math.nan

    scores, skipped = [], 0
    best, best_f = -math.inf, None
    for c in candidates:
        c = np.asarray(c, float).ravel()
        r = ratio(c)
        if not math.isfinite(r):
            skipped += 1
            scores.append(math.nan)
            continue
        scores.append(r)
        if r > best:
            best, best_f = r, c
    if best_f is None:
        raise ValueError("no admissible candidate")
    history = [best]
    f = best_f.copy()
    it = 0
    if ascent and p > 1:
        prev = best
        for it in range(1, max_iter + 1):
            Af = A.matvec(f)
            grad = A.rmatvec(U * np.abs(Af) ** (q - 1))
            with np.errstate(divide="ignore", invalid="ignore"):
                f = np.where(V > 0, np.maximum(grad, 0) / V, 0.0) ** (1 / (p - 1))
            scale = math.fsum(f**p * V) ** (1 / p)
            if not scale > 0 or not math.isfinite(scale):
                break
            f = f / scale
            r = ratio(f)
            if math.isfinite(r) and r > best:
                best, best_f = r, f.copy()
            history.append(best)
            if math.isfinite(r) and abs(r - prev) <= rtol * abs(prev):
                break
            prev = r
    return NormSearch(best, best_f, scores, history, it, skipped)


def schur_bound(A: np.ndarray) -> float:
    """Schur test bound for ``||A||_{L^2 -> L^2}`` of a nonnegative matrix."""
    A = np.abs(A)
    return math.sqrt(A.sum(axis=1).max() * A.sum(axis=0).max())


# }}}


# {{{ exponent fitting


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    points: int

    def to_dict(self) -> dict:
        return asdict(self)


def fit_loglog(x, y) -> SlopeFit:
    """Least squares fit of ``log y`` against ``log x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 3:
        raise ValueError("need at least 3 samples")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("fit inputs must be positive")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(ly) == 0:
        return SlopeFit(0.0, float(ly[0]), 1.0, len(x))
    res = stats.linregress(lx, ly)
    return SlopeFit(float(res.slope), float(res.intercept), float(res.rvalue**2), len(x))


def fit_exponent(samples) -> SlopeFit:
    """Fit ``log V`` against ``log(1/delta)`` for ``(delta, V)`` pairs."""
    d, v = np.asarray(samples, float).T
    if np.any(d <= 0):
        raise ValueError("fit inputs must be positive")
    return fit_loglog(1.0 / d, v)


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    bound: str | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": self.value, "bound": self.bound}


def check_range(name: str, value: float, lo: float = -math.inf, hi: float = math.inf) -> Check:
    return Check(name, bool(lo <= value <= hi), float(value), f"[{lo}, {hi}]")


@dataclass
class ScalingReport:
    """A delta sweep: measured columns, the primary fit and named secondary fits."""

    name: str
    deltas: list[float]
    values: list[float]
    fit: SlopeFit
    columns: dict[str, list[float]] = field(default_factory=dict)
    fits: dict[str, SlopeFit] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    runtime_s: float | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "experiment": self.name,
            "deltas": list(map(float, self.deltas)),
            "values": list(map(float, self.values)),
            "fit": self.fit.to_dict(),
            "columns": {k: list(map(float, v)) for k, v in self.columns.items()},
            "fits": {k: f.to_dict() for k, f in self.fits.items()},
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.passed,
            "metadata": self.metadata,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        extra = list(self.columns)
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["delta", "value", "fit_slope", "fit_r2", *extra])
        for i, (d, v) in enumerate(zip(self.deltas, self.values)):
            wr.writerow([repr(float(d)), repr(float(v)), repr(self.fit.slope), repr(self.fit.r2)] + [repr(float(self.columns[k][i])) for k in extra])
        return buf.getvalue()


# }}}


def ratio_spread(values) -> float:
    """``max / min`` of a positive sequence."""
    v = np.asarray(values, float)
    return float(v.max() / v.min())

