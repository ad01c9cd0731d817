"""Operator-valued symbol of the screw-motion trace on the plane z = 0.

For each rotation angle ``phi`` and frequency ``eta`` along the axis, the
symbol acts on functions of one dual variable:

    A_phi(eta) u(xi) = |sin phi| int u(z) dz / ((z - xi cos phi)^2 + sin^2 phi (xi^2 + eta^2)).

The kernel is a Lorentzian in ``z`` centred at ``xi cos phi`` with half
width ``|sin phi| (xi^2 + eta^2)^{1/2}``.  Norms are taken from
``L^2(<z>^{2s})`` to ``L^2(<xi>^{2(s+1)})`` with ``<x> = (1 + x^2)^{1/2}``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DomainError, SobolevIndexError, ToleranceError

SIN_MARGIN = 1e-4


def bracket(x):
    """Japanese bracket ``(1 + x^2)^{1/2}``."""
    return np.sqrt(1.0 + np.asarray(x, float) ** 2)


class NearSingularWarning(UserWarning):
    """Symbol evaluated within the margin of ``sin(phi) = 0``."""


@dataclass(frozen=True)
class LineGrid:
    """Symmetric cells on ``[-z_max, z_max]``, geometric away from 0.

    The smallest cells (size ``h0``) touch 0; sizes grow by ``growth`` up to
    ``z_max``.  ``mids`` are cell midpoints (never 0).
    """

    h0: float = 1e-4
    growth: float = 1.1
    z_max: float = 1e3

    def __post_init__(self):
        if not (0 < self.h0 < self.z_max and self.growth >= 1.0):
            raise DomainError("invalid line grid parameters")

    @property
    def edges(self) -> np.ndarray:
        pos = [0.0]
        h = self.h0
        while pos[-1] < self.z_max:
            pos.append(pos[-1] + h)
            h *= self.growth
        pos = np.array(pos)
        pos[-1] = self.z_max
        if pos[-1] - pos[-2] < 0.5 * (pos[-2] - pos[-3]):
            pos = np.delete(pos, -2)
        return np.concatenate([-pos[::-1], pos[1:]])

    @property
    def mids(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def size(self) -> int:
        return len(self.edges) - 1

    def refined(self) -> "LineGrid":
        return LineGrid(self.h0 / 2, np.sqrt(self.growth), self.z_max)


@dataclass(frozen=True)
class ScrewSymbol:
    """Parameters of one symbol ``A_phi(eta)`` and its weighted spaces."""

    phi: float
    eta: float = 1.0
    s: float = -0.5
    grid: LineGrid = field(default_factory=LineGrid)

    def __post_init__(self):
        if not (-1.0 < self.s < 0.0):
            raise SobolevIndexError("s must lie in (-1, 0)")

    @property
    def near_singular(self) -> bool:
        return abs(np.sin(self.phi)) < SIN_MARGIN

    def with_phi(self, phi: float) -> "ScrewSymbol":
        return ScrewSymbol(phi, self.eta, self.s, self.grid)


def _lorentz(sym: ScrewSymbol, xi):
    c = xi * np.cos(sym.phi)
    b = abs(np.sin(sym.phi)) * np.sqrt(xi ** 2 + sym.eta ** 2)
    return c, b


def kernel(sym: ScrewSymbol, xi, z):
    xi = np.asarray(xi, float)
    z = np.asarray(z, float)
    sp = np.sin(sym.phi)
    return abs(sp) / ((z - xi * np.cos(sym.phi)) ** 2 + sp ** 2 * (xi ** 2 + sym.eta ** 2))


def symbol_apply(sym: ScrewSymbol, u, xi=None, method: str = "substitution",
                 n_theta: int = 64, panels: int = 16) -> np.ndarray:
    """Evaluate ``A_phi(eta) u`` at the points ``xi``.

    If ``u`` is an array of cell values on ``sym.grid`` the result is given
    at the cell midpoints using exact cell integrals and ``xi`` is ignored.

    ``method="substitution"`` uses ``z = c + b tan(theta)``, turning the
    Lorentzian weight into ``dtheta`` on ``(-pi/2, pi/2)`` (composite Gauss,
    ``panels x n_theta`` nodes).  ``method="quad"`` integrates the original
    ``z`` form adaptively with the peak as a break point.
    """
    if sym.near_singular:
        warnings.warn("sin(phi) within the singular margin", NearSingularWarning, stacklevel=2)
    if not callable(u):
        vals = np.asarray(u)
        if vals.shape != (sym.grid.size,):
            raise DomainError("grid values must have one entry per cell")
        return cell_matrix(sym) @ vals
    xi = np.atleast_1d(np.asarray(xi, float))
    c, b = _lorentz(sym, xi)
    if method == "substitution":
        x, w = np.polynomial.legendre.leggauss(n_theta)
        e = np.linspace(-np.pi / 2, np.pi / 2, panels + 1)
        th = (0.5 * (e[1:] + e[:-1])[:, None] + 0.5 * np.diff(e)[:, None] * x).ravel()
        wt = (0.5 * np.diff(e)[:, None] * w).ravel()
        z = c[:, None] + b[:, None] * np.tan(th)[None, :]
        vals = np.asarray(u(z), float if not np.iscomplexobj(u(z[:1])) else complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(b > 0, abs(np.sin(sym.phi)) / b, 0.0)
        return scale * (vals @ wt)
    if method == "quad":
        out = np.empty(len(xi))
        for i, (x0, ci, bi) in enumerate(zip(xi, c, b)):
            f = lambda z, x0=x0: kernel(sym, x0, z) * u(z)
            parts = [(-np.inf, ci - 50 * bi), (ci - 50 * bi, ci), (ci, ci + 50 * bi), (ci + 50 * bi, np.inf)]
            tot = 0.0
            for a, bb in parts:
                val, err = integrate.quad(f, a, bb, epsabs=1e-14, epsrel=1e-12, limit=500)
                if err > 1e-8 * max(1.0, abs(val)):
                    raise ToleranceError("adaptive quadrature did not converge")
                tot += val
            out[i] = tot
        return out
    raise DomainError(f"unknown method {method!r}")


def homogeneity_residual(sym: ScrewSymbol, lam: float, u: Callable, xi, method: str = "quad") -> float:
    """``max |A(lam eta) u - lam^{-1} k_lam^{-1} A(eta) k_lam u|`` relative to ``max |A(lam eta) u|``.

    ``k_lam f(z) = f(lam z)``; both sides are computed independently.
    """
    if lam <= 0:
        raise DomainError("dilation factor must be positive")
    xi = np.atleast_1d(np.asarray(xi, float))
    big = ScrewSymbol(sym.phi, lam * sym.eta, sym.s, sym.grid)
    lhs = symbol_apply(big, u, xi, method)
    rhs = symbol_apply(sym, lambda z: u(lam * z), xi / lam, method) / lam
    return float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(lhs)), 1e-300))


# ---------------------------------------------------------------------------
# discrete operators on the line grid
# ---------------------------------------------------------------------------


def cell_matrix(sym: ScrewSymbol) -> np.ndarray:
    """``M[i, j] = int_{cell j} kernel(xi_i, z) dz`` exactly (arctan), ``xi_i`` midpoints."""
    g = sym.grid
    xi = g.mids
    e = g.edges
    c, b = _lorentz(sym, xi)
    with np.errstate(divide="ignore", invalid="ignore"):
        at = np.arctan((e[None, :] - c[:, None]) / b[:, None])
        scale = abs(np.sin(sym.phi)) / b
    m = scale[:, None] * np.diff(at, axis=1)
    if not np.all(np.isfinite(m)):
        m = np.nan_to_num(m)
    return m


def weighted(sym: ScrewSymbol, m: np.ndarray) -> np.ndarray:
    """Matrix between the weighted spaces in orthonormal cell coordinates."""
    g = sym.grid
    h = g.widths
    x = g.mids
    left = np.sqrt(h) * bracket(x) ** (sym.s + 1)
    right = bracket(x) ** (-sym.s) / np.sqrt(h)
    return left[:, None] * m * right[None, :]


def weighted_norm(sym: ScrewSymbol) -> float:
    return float(np.linalg.norm(weighted(sym, cell_matrix(sym)), 2))


# ---------------------------------------------------------------------------
# Schur bounds
# ---------------------------------------------------------------------------


def schur_row(phi: float, xi: float, s: float) -> float:
    """``int |K(xi, z)| dz`` after ``z = xi cos(phi) + |sin(phi)| <xi> t``."""
    sp, cp = abs(np.sin(phi)), np.cos(phi)
    bx = bracket(xi)
    f = lambda t: bx ** s * bracket(xi * cp + sp * bx * t) ** (-s) / (1 + t * t)
    return _quad_line(f)


def schur_col(phi: float, z: float, s: float) -> float:
    """``int |K(xi, z)| dxi`` after ``xi = z cos(phi) + |sin(phi)| <z> t``."""
    sp, cp = abs(np.sin(phi)), np.cos(phi)
    bz = bracket(z)
    f = lambda t: bracket(z * cp + sp * bz * t) ** (s + 1) * bz ** (-s - 1) / (1 + t * t)
    return _quad_line(f)


def _quad_line(f) -> float:
    tot = 0.0
    for a, b in ((-np.inf, -1.0), (-1.0, 1.0), (1.0, np.inf)):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(f, a, b, epsabs=1e-12, epsrel=1e-10, limit=200)
        if err > 1e-6 * max(1.0, abs(val)):
            raise ToleranceError("adaptive quadrature did not converge")
        tot += val
    return float(tot)


def majorant(s: float) -> float:
    """``int dt / (1 + t^2) (1 + (1 + |t|)^2)^{-s/2}``; finite for ``s > -1``."""
    if not (-1.0 < s < 0.0):
        raise SobolevIndexError("s must lie in (-1, 0)")
    f = lambda t: (1 + (1 + t) ** 2) ** (-s / 2) / (1 + t * t)
    val, err = integrate.quad(f, 0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=400)
    return float(2 * val)


def symmetric_log_grid(lo: float = 1e-3, hi: float = 1e3, n: int = 25) -> np.ndarray:
    p = np.geomspace(lo, hi, n)
    return np.concatenate([-p[::-1], [0.0], p])


@dataclass
class SchurTable:
    s: float
    phis: np.ndarray
    row_sup: np.ndarray
    col_sup: np.ndarray

    @property
    def sup(self) -> np.ndarray:
        return np.maximum(self.row_sup, self.col_sup)


def schur_bounds(s: float, phis, xis=None) -> SchurTable:
    """Sup over ``xi`` of both Schur integrals for each ``phi``."""
    if not (-1.0 < s < 0.0):
        raise SobolevIndexError("s must lie in (-1, 0)")
    xis = symmetric_log_grid() if xis is None else np.asarray(xis, float)
    phis = np.asarray(phis, float)
    rows = np.array([max(schur_row(p, x, s) for x in xis) for p in phis])
    cols = np.array([max(schur_col(p, x, s) for x in xis) for p in phis])
    return SchurTable(s, phis, rows, cols)


DECADES = (1e-3, 1e-2, 1e-1, np.pi / 4)


def decade_sups(table: SchurTable, decades=DECADES) -> np.ndarray:
    """Sup of the Schur integrals over each block ``[decades[k], decades[k+1]]``."""
    out = []
    for lo, hi in zip(decades[:-1], decades[1:]):
        sel = (table.phis >= lo * (1 - 1e-12)) & (table.phis <= hi * (1 + 1e-12))
        if not sel.any():
            raise DomainError(f"no phi nodes in [{lo}, {hi}]")
        out.append(table.sup[sel].max())
    return np.array(out)


def decade_variation(table: SchurTable, decades=DECADES) -> float:
    """Largest ratio between sups of consecutive decades."""
    s = decade_sups(table, decades)
    r = s[1:] / s[:-1]
    return float(np.max(np.maximum(r, 1 / r)))


def decade_phis(per_decade: int = 5, decades=DECADES) -> np.ndarray:
    pts = [np.geomspace(lo, hi, per_decade) for lo, hi in zip(decades[:-1], decades[1:])]
    return np.unique(np.concatenate(pts))


# ---------------------------------------------------------------------------
# continuity scan and fiber operators
# ---------------------------------------------------------------------------


def continuity_scan(eta: float, s: float, phis, grid: LineGrid | None = None) -> np.ndarray:
    """``||A_{phi_{i+1}} - A_{phi_i}||`` in the weighted norm; empty for one point."""
    grid = grid or LineGrid()
    phis = np.asarray(phis, float)
    if len(phis) < 2:
        return np.empty(0)
    mats = [weighted(ScrewSymbol(p, eta, s, grid), cell_matrix(ScrewSymbol(p, eta, s, grid))) for p in phis]
    return np.array([np.linalg.norm(b - a, 2) for a, b in zip(mats[:-1], mats[1:])])


def halving_ratio_regular(eta: float, s: float, lo: float, hi: float, n: int = 4,
                          grid: LineGrid | None = None) -> float:
    """Max difference on an ``n``-step grid of ``[lo, hi]`` after halving, over before."""
    coarse = continuity_scan(eta, s, np.linspace(lo, hi, n + 1), grid)
    fine = continuity_scan(eta, s, np.linspace(lo, hi, 2 * n + 1), grid)
    return float(fine.max() / coarse.max())


def halving_ratios_near_zero(eta: float, s: float, phi0: float = 0.2, steps: int = 5,
                             grid: LineGrid | None = None) -> np.ndarray:
    """``d_{k+1} / d_k`` with ``d_k = ||A_{phi0 2^-k} - A_{phi0 2^-k-1}||``.

    A norm-continuous family would give ratios near 1/2; ratios near 1 flag
    the discontinuity at ``phi = 0``.
    """
    phis = phi0 * 2.0 ** -np.arange(steps + 2)
    d = continuity_scan(eta, s, phis, grid)
    return d[1:] / d[:-1]


@dataclass
class LineOperator:
    """Dense operator on cell values of a line grid with Sobolev metadata."""

    matrix: np.ndarray
    grid: LineGrid
    s: float
    eta: float
    meta: dict = field(default_factory=dict)

    def weighted_norm(self) -> float:
        sym = ScrewSymbol(np.pi / 2, self.eta, self.s, self.grid)
        return float(np.linalg.norm(weighted(sym, self.matrix), 2))


def phi_rule(levels: int = 12, q: int = 8, ratio: float = 0.35):
    """Gauss rule on ``(0, pi)`` graded geometrically towards both ends.

    Panels shrink by ``ratio`` down to ``SIN_MARGIN``; the margin strips are
    represented by one node each on their inner edge, which suffices because
    the symbol is uniformly bounded there.
    """
    x, w = np.polynomial.legendre.leggauss(q)
    half = np.pi / 2
    e = [half]
    while e[-1] * ratio > SIN_MARGIN and len(e) <= levels:
        e.append(e[-1] * ratio)
    e.append(SIN_MARGIN)
    e = np.array(e[::-1])
    a, b = e[:-1], e[1:]
    nodes = (0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * x).ravel()
    wts = (0.5 * (b - a)[:, None] * w).ravel()
    nodes = np.concatenate([[SIN_MARGIN], nodes])
    wts = np.concatenate([[SIN_MARGIN], wts])
    return np.concatenate([nodes, np.pi - nodes[::-1]]), np.concatenate([wts, wts[::-1]])


def fiber_trace(eta: int, s: float = -0.5, grid: LineGrid | None = None,
                levels: int = 12, q: int = 12, rule=None) -> LineOperator:
    """``B(eta) = int_0^{2 pi} A_phi(eta) exp(-i eta phi) dphi``.

    Since ``A_{2 pi - phi} = A_phi`` this equals
    ``2 int_0^pi A_phi(eta) cos(eta phi) dphi``, evaluated with
    :func:`phi_rule` unless ``rule = (nodes, weights)`` on ``(0, pi)`` is
    given.  At ``eta = 0`` the symbol behaves like ``1/|xi|`` near
    ``xi = 0`` and the fiber is unbounded between the weighted spaces; its
    discrete norm then grows under grid refinement (``meta["bounded"]``).
    """
    grid = grid or LineGrid()
    phi, w = phi_rule(levels, q) if rule is None else map(np.asarray, rule)
    out = np.zeros((grid.size, grid.size))
    for p, wk in zip(phi, w):
        if wk != 0:
            out += (2 * wk * np.cos(eta * p)) * cell_matrix(ScrewSymbol(p, eta, s, grid))
    return LineOperator(out, grid, s, float(eta), {"phi_nodes": len(phi), "bounded": bool(eta != 0)})
