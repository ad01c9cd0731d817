"""Trace of the rotation-averaged inverse Laplacian on a tilted plane.

The plane ``-x sin(a) + z cos(a) = 0`` in R^3 carries coordinates (u, v) in
the dual space; the operator averaged over rotations about OZ becomes, after
a change of variables ``(w, phi) -> (rho, psi)``, a Mellin convolution whose
kernel ``K(rho)`` is a family of integral operators on the circle.

This module provides the change of variables, the kernel, its operator norms
and Schur integrals, the Mellin symbol ``K^(p)`` and two independent
evaluations of the trace: the direct double integral over ``(w, phi)`` and
the Mellin convolution over ``(rho, psi)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DomainError, SingularityError, SobolevIndexError, ToleranceError

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class TiltConfig:
    """Tilt angle ``alpha`` of the plane and Sobolev index ``s``."""

    alpha: float = np.pi / 4
    s: float = -0.5
    margin: float = 1e-3

    def __post_init__(self):
        if not (self.margin <= self.alpha <= np.pi / 2 - self.margin):
            raise DomainError("tilt angle must lie inside (0, pi/2) with margin")
        if not (-1.0 < self.s < 0.0):
            raise SobolevIndexError("Sobolev index must lie in (-1, 0)")

    @property
    def ca(self) -> float:
        return float(np.cos(self.alpha))

    @property
    def sa(self) -> float:
        return float(np.sin(self.alpha))


# ---------------------------------------------------------------------------
# change of variables
# ---------------------------------------------------------------------------


def line_point(cfg: TiltConfig, u, v, w, phi):
    """Cartesian point ``(S, T)`` reached from ``(u, v)`` with parameters ``(w, phi)``."""
    ca, sa = cfg.ca, cfg.sa
    cp, sp = np.cos(phi), np.sin(phi)
    s = u * (ca ** 2 * cp + sa ** 2) + v * ca * sp + w * sa * ca * (1 - cp)
    t = -u * ca * sp + v * cp + w * sa * sp
    return s, t


def cov_forward(cfg: TiltConfig, u, v, w, phi):
    """Polar coordinates ``(rho, psi)`` of :func:`line_point`, ``psi`` in ``[0, 2 pi)``."""
    s, t = line_point(cfg, u, v, w, phi)
    return np.hypot(s, t), np.mod(np.arctan2(t, s), TWO_PI)


def _degenerate_gap(u, rho, psi):
    return rho * np.cos(psi) - u


def _check_gap(gap, u, rho, tol=1e-6):
    bad = np.abs(gap) < tol * (1 + np.abs(rho) + np.abs(u))
    if np.any(bad):
        raise SingularityError("point lies on the degenerate line rho cos(psi) = u")


def cov_inverse(cfg: TiltConfig, u, v, rho, psi, tol: float = 1e-6):
    """Inverse change: ``(phi, w)`` with ``phi`` in ``(-pi, pi]``."""
    u, v, rho, psi = np.broadcast_arrays(*(np.asarray(a, float) for a in (u, v, rho, psi)))
    gap = _degenerate_gap(u, rho, psi)
    _check_gap(gap, u, rho, tol)
    ca, sa = cfg.ca, cfg.sa
    phi = inverse_angle(cfg, u, v, rho, psi)
    r2 = u ** 2 + v ** 2
    w = (sa ** 2 * gap ** 2 + ca ** 2 * (rho ** 2 - r2)) / (2 * gap * ca * sa)
    return phi, w


def inverse_angle(cfg: TiltConfig, u, v, rho, psi):
    """Angle ``phi`` of the inverse change, ``phi`` in ``(-pi, pi]``; total on the degenerate line."""
    gap = _degenerate_gap(np.asarray(u, float), np.asarray(rho, float), np.asarray(psi, float))
    den = (np.asarray(v, float) + rho * np.sin(psi)) * cfg.ca
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den == 0, np.pi, 2 * np.arctan(gap / np.where(den == 0, 1.0, den)))


def cov_jacobian(cfg: TiltConfig, u, v, rho, psi, tol: float = 1e-6):
    """Density of ``dw dphi`` against ``drho dpsi``: ``rho / (sin(a) (rho cos(psi) - u))``."""
    gap = _degenerate_gap(np.asarray(u, float), np.asarray(rho, float), np.asarray(psi, float))
    _check_gap(gap, u, rho, tol)
    return rho / (cfg.sa * gap)


def cov_jacobian_fd(cfg: TiltConfig, u, v, w, phi, h: float = 1e-5):
    """``|det d(rho, psi)/d(w, phi)|^{-1}`` by central differences."""
    def polar(ww, pp):
        s, t = line_point(cfg, u, v, ww, pp)
        return np.hypot(s, t), np.unwrap(np.arctan2(t, s))
    r_wp, a_wp = polar(w + h, phi)
    r_wm, a_wm = polar(w - h, phi)
    r_pp, a_pp = polar(w, phi + h)
    r_pm, a_pm = polar(w, phi - h)
    da = lambda x, y: np.angle(np.exp(1j * (x - y)))
    j11 = (r_wp - r_wm) / (2 * h)
    j21 = da(a_wp, a_wm) / (2 * h)
    j12 = (r_pp - r_pm) / (2 * h)
    j22 = da(a_pp, a_pm) / (2 * h)
    return 1.0 / np.abs(j11 * j22 - j12 * j21)


# ---------------------------------------------------------------------------
# kernel
# ---------------------------------------------------------------------------


def kernel_K(cfg: TiltConfig, rho, omega, psi, check: bool = True):
    """Circle kernel ``K(rho, omega, psi)``; non-negative, singular only at rho = 1, psi = +-omega."""
    rho = np.asarray(rho, float)
    if check and np.any(rho <= 0):
        raise DomainError("rho must be positive")
    ca, sa = cfg.ca, cfg.sa
    d = rho * np.cos(psi) - np.cos(omega)
    num = 4 * sa * ca ** 2 * rho ** 2 * np.abs(d)
    den = 4 * ca ** 2 * sa ** 2 * d ** 2 + (sa ** 2 * d ** 2 + ca ** 2 * (rho ** 2 - 1)) ** 2
    if check and np.any(den == 0):
        raise SingularityError("kernel is singular at rho = 1, psi = +-omega")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / den
    return np.where(den == 0, np.inf, out) if not check else out


def ridge_points(rho: float, omega) -> np.ndarray:
    """Angles ``psi`` with ``rho cos(psi) = cos(omega)`` (kink of the kernel)."""
    c = np.cos(omega) / rho
    if abs(c) > 1:
        return np.empty(0)
    a = np.arccos(c)
    return np.mod(np.array([a, -a]), TWO_PI)


# ---------------------------------------------------------------------------
# graded quadrature helpers
# ---------------------------------------------------------------------------


def _gauss_on_edges(edges: np.ndarray, q: int):
    x, w = np.polynomial.legendre.leggauss(q)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def graded_unit_rule(levels: int, q: int, ratio: float = 0.25):
    """Rule on [0, 1] graded geometrically toward both ends."""
    left = 0.5 * ratio ** np.arange(levels, -1, -1)
    edges = np.concatenate([[0.0], left, 1.0 - left[::-1][1:], [1.0]])
    return _gauss_on_edges(edges, q)


def _levels_for(scale: float, ratio: float = 0.25, cap: int = 40) -> int:
    scale = min(max(scale, 1e-15), 0.5)
    return int(min(cap, max(1, np.ceil(np.log(scale) / np.log(ratio)))))


def _singular_angles(rho: float, omega: float) -> np.ndarray:
    pts = [0.0, np.pi, np.mod(omega, TWO_PI), np.mod(-omega, TWO_PI)]
    pts.extend(ridge_points(rho, omega))
    return np.array(pts)


def _singular_table(rho: float, omega: np.ndarray) -> np.ndarray:
    """Singular angles for many ``omega``; missing ridge points repeat ``omega``."""
    omega = np.asarray(omega, float)
    c = np.cos(omega) / rho
    a = np.arccos(np.clip(c, -1, 1))
    has = np.abs(c) <= 1
    r1 = np.where(has, a, omega)
    r2 = np.where(has, -a, omega)
    cols = [np.zeros_like(omega), np.full_like(omega, np.pi), omega, -omega, r1, r2]
    return np.mod(np.stack(cols, axis=1), TWO_PI)


def cell_matrix(cfg: TiltConfig, rho: float, edges: np.ndarray, q: int = 4,
                graded: bool | None = None, level_cap: int = 40) -> np.ndarray:
    """``C[i, j] = int_{I_i} int_{I_j} K(rho, omega, psi) dpsi domega`` on circle cells.

    ``edges`` partitions ``[0, 2 pi]``.  Near ``rho = 1`` cells touching the
    kink set of the kernel are integrated with rules graded toward the
    singular angles, and the outer rule is graded toward the cell ends.
    """
    edges = np.asarray(edges, float)
    m = len(edges) - 1
    h = np.diff(edges)
    gap = abs(rho - 1.0)
    if graded is None:
        graded = gap < 0.5
    lev = _levels_for(0.05 * gap / max(h.max(), 1e-12), cap=level_cap) if graded else 0
    if graded:
        ux, uw = graded_unit_rule(lev, 3)
    else:
        ux, uw = np.polynomial.legendre.leggauss(q)
        ux, uw = 0.5 * (ux + 1), 0.5 * uw
    om = (edges[:-1, None] + h[:, None] * ux).ravel()
    om_w = (h[:, None] * uw).ravel()
    om_cell = np.repeat(np.arange(m), len(ux))

    gx, gw = np.polynomial.legendre.leggauss(q)
    gx, gw = 0.5 * (gx + 1), 0.5 * gw
    ps = (edges[:-1, None] + h[:, None] * gx).ravel()
    ps_w = (h[:, None] * gw).ravel()
    ps_cell = np.repeat(np.arange(m), q)

    kk = kernel_K(cfg, rho, om[:, None], ps[None, :], check=False)
    inner = np.zeros((len(om), m))
    np.add.at(inner.T, ps_cell, (kk * ps_w).T)

    if graded:
        glev = _levels_for(0.02 * gap / max(h.max(), 1e-12), cap=level_cap)
        cx, cw = graded_unit_rule(glev, 3)
        sing = _singular_table(rho, om)                                   # (n_om, S)
        cell = np.clip(np.searchsorted(edges, sing, side="right") - 1, 0, m - 1)
        near = np.zeros((len(om), m), bool)
        for off in (-1, 0, 1):
            np.put_along_axis(near, (cell + off) % m, True, axis=1)
        rows, cols = np.nonzero(near)
        a, b = edges[cols], edges[cols + 1]
        sp = sing[rows]
        inside = np.where((sp > a[:, None]) & (sp < b[:, None]), sp, b[:, None])
        brk = np.concatenate([a[:, None], np.sort(inside, axis=1), b[:, None]], axis=1)
        lo, hi = brk[:, :-1], brk[:, 1:]
        nodes = lo[..., None] + (hi - lo)[..., None] * cx
        wts = (hi - lo)[..., None] * cw
        vals = kernel_K(cfg, rho, om[rows][:, None, None], nodes, check=False)
        vals = np.where(np.isfinite(vals), vals, 0.0)
        inner[rows, cols] = np.sum(vals * wts, axis=(1, 2))

    out = np.zeros((m, m))
    np.add.at(out, om_cell, inner * om_w[:, None])
    return out


def galerkin_matrix(cfg: TiltConfig, rho: float, edges: np.ndarray, **kw) -> np.ndarray:
    """Orthonormal piecewise-constant Galerkin matrix of ``K(rho)``."""
    c = cell_matrix(cfg, rho, edges, **kw)
    s = 1.0 / np.sqrt(np.diff(edges))
    return s[:, None] * c * s[None, :]


def nystrom_matrix(cfg: TiltConfig, rho: float, m: int) -> np.ndarray:
    """Trapezoid Nystrom matrix with weights ``2 pi / m``."""
    th = TWO_PI * np.arange(m) / m
    return kernel_K(cfg, rho, th[:, None], th[None, :]) * (TWO_PI / m)


def clustered_edges(rho: float, base: int = 64, growth: float = 1.25) -> np.ndarray:
    """Circle partition refined toward 0 and pi down to about ``|rho-1|^{1/2}/4``."""
    hmin = 0.25 * np.sqrt(abs(rho - 1.0))
    hmax = TWO_PI / base
    steps = [0.0]
    h = hmin
    while steps[-1] < np.pi / 2:
        steps.append(steps[-1] + h)
        h = min(h * growth, hmax)
    half = np.array(steps)
    half = half[half < np.pi / 2]
    quarter = np.concatenate([half, [np.pi / 2]])
    left = np.concatenate([quarter, np.pi - quarter[::-1][1:]])            # [0, pi]
    return np.concatenate([left, np.pi + left[1:]])


def operator_norm_K(cfg: TiltConfig, rho: float, m: int = 64, method: str = "auto") -> float:
    """Norm of ``K(rho)`` on ``L^2(S^1)``.

    ``method`` is ``"nystrom"`` (trapezoid, smooth regime), ``"galerkin"``
    (clustered cells with graded integration) or ``"auto"``, which uses the
    Nystrom matrix for ``rho <= 1/2`` or ``rho >= 2``.
    """
    if rho <= 0:
        raise DomainError("rho must be positive")
    if rho == 1:
        raise SingularityError("the norm is infinite at rho = 1")
    if method == "auto":
        method = "nystrom" if (rho <= 0.5 or rho >= 2) else "galerkin"
    if method == "nystrom":
        return float(np.linalg.norm(nystrom_matrix(cfg, rho, m), 2))
    if method == "galerkin":
        return float(np.linalg.norm(galerkin_matrix(cfg, rho, clustered_edges(rho, m)), 2))
    raise DomainError(f"unknown method {method!r}")


def fit_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def norm_sweep(cfg: TiltConfig, rhos, m: int = 64) -> np.ndarray:
    return np.array([operator_norm_K(cfg, r, m) for r in rhos])


# ---------------------------------------------------------------------------
# Schur integrals
# ---------------------------------------------------------------------------


def schur_integrals(cfg: TiltConfig, rho: float, angle: float, epsabs: float = 1e-12,
                    epsrel: float = 1e-10) -> tuple[float, float]:
    """``(int K domega at psi = angle, int K dpsi at omega = angle)``."""
    if rho <= 0 or rho == 1:
        raise SingularityError("Schur integrals need rho > 0, rho != 1")

    def run(fun, pts):
        pts = np.unique(np.clip(np.mod(pts, TWO_PI), 0, TWO_PI))
        br = np.unique(np.concatenate([[0.0], pts, [TWO_PI]]))
        total = 0.0
        for a, b in zip(br[:-1], br[1:]):
            if b - a < 1e-15:
                continue
            val, err = integrate.quad(fun, a, b, epsabs=epsabs, epsrel=epsrel, limit=400)
            if err > 1e-6 * max(1.0, abs(val)):
                raise ToleranceError("adaptive quadrature did not converge")
            total += val
        return total

    c = rho * np.cos(angle)
    ridge_om = np.mod([np.arccos(c), -np.arccos(c)], TWO_PI) if abs(c) <= 1 else []
    col = run(lambda w: kernel_K(cfg, rho, w, angle), np.concatenate([[np.pi, angle, -angle], ridge_om]))
    row = run(lambda p: kernel_K(cfg, rho, angle, p),
              np.concatenate([[np.pi, angle, -angle], ridge_points(rho, angle)]))
    return float(col), float(row)


# ---------------------------------------------------------------------------
# Mellin symbol
# ---------------------------------------------------------------------------

STRIP = (-2.0, 1.0)


def _rho_rule(rho_min: float, rho_max: float, near: float = 0.3, dx: float = 0.1,
              n_tau: int = 12, q: int = 6):
    """Nodes/weights for ``int f(rho) drho`` on ``[rho_min, rho_max]``.

    Gauss panels of width ``dx`` in ``log rho`` away from 1; within ``near``
    of 1 the substitution ``rho = 1 -+ tau^2`` removes the square-root
    behaviour, with Gauss panels in ``tau``.
    """
    nodes, wts = [], []
    lo1, hi1 = 1 - near, 1 + near
    tmax = np.sqrt(near)
    tedges = np.linspace(0, tmax, n_tau + 1)
    tx, tw = _gauss_on_edges(tedges, q)
    # left of 1
    nodes.append(1 - tx ** 2)
    wts.append(2 * tx * tw)
    nodes.append(1 + tx ** 2)
    wts.append(2 * tx * tw)
    for a, b in ((rho_min, lo1), (hi1, rho_max)):
        la, lb = np.log(a), np.log(b)
        k = max(1, int(np.ceil((lb - la) / dx)))
        x, w = _gauss_on_edges(np.linspace(la, lb, k + 1), q)
        nodes.append(np.exp(x))
        wts.append(np.exp(x) * w)
    nodes = np.concatenate(nodes)
    wts = np.concatenate(wts)
    order = np.argsort(nodes)
    return nodes[order], wts[order]


@dataclass
class MellinSymbol:
    """Matrix ``K^(p)`` in the orthonormal cell basis of the circle."""

    p: complex
    matrix: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


class MellinTable:
    """Cell matrices of ``K(rho)`` on a fixed rho rule, reused for many ``p``.

    ``evaluate(p)`` returns ``sum_q w_q rho_q^{p-1} A(rho_q)`` plus closed
    form tails that assume ``A ~ rho^2`` below ``rho_min`` and
    ``A ~ rho^{-1}`` above ``rho_max``.
    """

    def __init__(self, cfg: TiltConfig, m: int = 64, rho_min: float = 1e-2,
                 rho_max: float = 1e2, dx: float = 0.1, n_tau: int = 12, tails: bool = True,
                 level_cap: int = 10):
        if not (0 < rho_min < 0.7 and rho_max > 1.3):
            raise DomainError("rho range must straddle 1 with room for the graded zone")
        self.cfg = cfg
        self.m = m
        self.rho_min, self.rho_max = rho_min, rho_max
        self.tails = tails
        self.edges = TWO_PI * np.arange(m + 1) / m
        self.rho, self.w = _rho_rule(rho_min, rho_max, dx=dx, n_tau=n_tau)
        self.mats = np.stack([galerkin_matrix(cfg, r, self.edges, level_cap=level_cap)
                              for r in self.rho])
        self.a_min = galerkin_matrix(cfg, rho_min, self.edges)
        self.a_max = galerkin_matrix(cfg, rho_max, self.edges)

    def evaluate(self, p: complex, tails: bool | None = None) -> MellinSymbol:
        p = complex(p)
        if not (STRIP[0] < p.real < STRIP[1]):
            raise DomainError("p lies outside the strip -2 < Re p < 1")
        c = self.w * self.rho ** (p - 1)
        mat = np.tensordot(c, self.mats, axes=1)
        if self.tails if tails is None else tails:
            mat = mat + self.a_min * self.rho_min ** p / (p + 2) + self.a_max * self.rho_max ** p / (1 - p)
        return MellinSymbol(p, mat, {"m": self.m, "rho_min": self.rho_min, "rho_max": self.rho_max,
                                     "nodes": int(len(self.rho))})

    def truncated(self, p: complex, rho_cap: float) -> np.ndarray:
        """Integral over ``rho <= rho_cap`` without tails (drift detection)."""
        sel = self.rho <= rho_cap
        c = self.w[sel] * self.rho[sel] ** (complex(p) - 1)
        return np.tensordot(c, self.mats[sel], axes=1)


def mellin_symbol(cfg: TiltConfig, p: complex, m: int = 64, margin: float = 1e-3,
                  table: MellinTable | None = None, **rule) -> MellinSymbol:
    """``K^(p) = int rho^{p-1} K(rho) drho`` as an ``m x m`` matrix."""
    p = complex(p)
    if not (STRIP[0] + margin <= p.real <= STRIP[1] - margin):
        raise DomainError("p must lie inside the strip -2 < Re p < 1 with margin")
    table = table or MellinTable(cfg, m, **rule)
    return table.evaluate(p)


def tail_drift(table: MellinTable, p: complex, factor: float = 4.0) -> float:
    """Relative change of the truncated integral when the upper cut grows by ``factor``."""
    a = table.truncated(p, table.rho_max / factor)
    b = table.truncated(p, table.rho_max)
    return float(np.linalg.norm(b - a, 2) / max(np.linalg.norm(b, 2), 1e-300))


def contour_residual(table: MellinTable, rect: tuple, n_side: int = 64) -> float:
    """Max entry of ``|oint K^(p) dp|`` relative to the max entry on the contour.

    ``rect = (sigma_lo, sigma_hi, t_lo, t_hi)``; Gauss-Legendre on each side.
    """
    s0, s1, t0, t1 = rect
    if not (STRIP[0] < s0 <= s1 < STRIP[1]):
        raise DomainError("rectangle must lie strictly inside the strip")
    if s1 == s0 or t1 == t0:
        return 0.0
    x, w = np.polynomial.legendre.leggauss(n_side)
    corners = [complex(s0, t0), complex(s1, t0), complex(s1, t1), complex(s0, t1)]
    total = np.zeros((table.m, table.m), complex)
    peak = 0.0
    for a, b in zip(corners, corners[1:] + corners[:1]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        for xi, wi in zip(x, w):
            val = table.evaluate(mid + half * xi).matrix
            total += wi * half * val
            peak = max(peak, float(np.abs(val).max()))
    return float(np.abs(total).max() / peak)


def decay_table(table: MellinTable, sigma: float, ts) -> list[tuple[float, float]]:
    return [(float(t), table.evaluate(complex(sigma, t)).norm) for t in ts]


def analyticity_and_decay(cfg: TiltConfig, rect=(-1.5, 0.5, -1.0, 1.0), ts=(0, 10, 20, 40),
                          sigma: float = -0.5, m: int = 32, n_side: int = 64,
                          table: MellinTable | None = None):
    table = table or MellinTable(cfg, m)
    return contour_residual(table, rect, n_side), decay_table(table, sigma, ts)


# ---------------------------------------------------------------------------
# the trace in two forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeparableField:
    """``f(rho, psi) = sum_k B_k(log rho) A_k(psi)`` on the dual plane.

    ``support`` bounds ``log rho`` outside which every ``B_k`` is negligible.
    """

    terms: tuple
    support: tuple

    def polar(self, rho, psi):
        y = np.log(rho)
        return sum(b(y) * a(psi) for b, a in self.terms)

    def __call__(self, s, t):
        rho = np.hypot(s, t)
        with np.errstate(divide="ignore"):
            y = np.log(np.where(rho > 0, rho, 1e-300))
        psi = np.arctan2(t, s)
        lo, hi = self.support
        inside = (y > lo) & (y < hi)
        out = sum(b(y) * a(psi) for b, a in self.terms)
        return np.where(inside, out, 0.0)


def log_gaussian(center: float, width: float):
    def b(y):
        return np.exp(-0.5 * ((np.asarray(y) - center) / width) ** 2)
    return b


def annulus_field(center: float = 0.0, width: float = 0.25, angular: Callable | None = None,
                  cutoff: float = 9.0) -> SeparableField:
    """Gaussian ring in ``log rho`` times an angular profile (default constant)."""
    ang = angular or (lambda psi: np.ones_like(np.asarray(psi, float)))
    return SeparableField(((log_gaussian(center, width), ang),),
                          (center - cutoff * width, center + cutoff * width))


def reference_fields() -> list[SeparableField]:
    """Three test fields supported in annuli away from the origin."""
    return [
        annulus_field(0.0, 0.25),
        annulus_field(0.3, 0.2, lambda p: 1.0 + 0.5 * np.cos(np.asarray(p))),
        SeparableField(
            ((log_gaussian(-0.2, 0.25), lambda p: np.cos(2 * np.asarray(p))),
             (log_gaussian(0.4, 0.2), lambda p: np.sin(np.asarray(p)) ** 2)),
            (-0.2 - 9 * 0.25, 0.4 + 9 * 0.2)),
    ]


def _graded_panels(a: float, b: float, left: bool, right: bool, levels: int, bulk: int,
                   ratio: float = 0.25) -> np.ndarray:
    """Panel edges on [a, b]: ``bulk`` uniform panels, geometric toward graded ends."""
    edges = np.linspace(a, b, bulk + 1)
    first, last = edges[1] - edges[0], edges[-1] - edges[-2]
    parts = [edges]
    if left:
        parts.append(a + first * ratio ** np.arange(1, levels + 1))
    if right:
        parts.append(b - last * ratio ** np.arange(1, levels + 1))
    return np.unique(np.concatenate(parts))


RESOLUTIONS = {1: (10, 6, 8), 2: (14, 8, 12), 3: (18, 10, 16), 4: (22, 12, 20)}


def _resolution(level: int):
    if level not in RESOLUTIONS:
        raise DomainError(f"resolution must be one of {sorted(RESOLUTIONS)}")
    return RESOLUTIONS[level]


def _check_support(f: SeparableField):
    if not np.isfinite(f.support[0]) or f.support[0] < np.log(1e-8):
        raise DomainError("field support touches the dual-space origin")


def trace_direct_eq1(cfg: TiltConfig, f: Callable, r, omega, resolution: int = 1) -> np.ndarray:
    """``g(u, v) = r int dw int dphi f(S, T) / (r^2 + w^2)`` at polar points ``(r, omega)``.

    With ``w = r tan(theta)`` the weight becomes ``dtheta`` on
    ``(-pi/2, pi/2)``, so no truncation of the ``w`` line is needed.  Panels
    are graded toward ``phi = 0`` (where the line collapses) and toward
    ``theta = +-pi/2``.
    """
    levels, q, bulk = _resolution(resolution)
    r = np.atleast_1d(np.asarray(r, float))
    omega = np.atleast_1d(np.asarray(omega, float))
    if np.any(r <= 0):
        raise DomainError("output radii must be positive")
    pe = np.concatenate([_graded_panels(-np.pi, 0.0, False, True, levels, bulk),
                         _graded_panels(0.0, np.pi, True, False, levels, bulk)[1:]])
    phi, wphi = _gauss_on_edges(pe, q)
    te = _graded_panels(-np.pi / 2, np.pi / 2, True, True, levels, 2 * bulk)
    th, wth = _gauss_on_edges(te, q)
    out = np.zeros((len(r), len(omega)))
    P, TH = np.meshgrid(phi, th, indexing="ij")
    W = np.outer(wphi, wth)
    tan = np.tan(TH)
    for i, rr in enumerate(r):
        for j, om in enumerate(omega):
            u, v = rr * np.cos(om), rr * np.sin(om)
            s, t = line_point(cfg, u, v, rr * tan, P)
            out[i, j] = np.sum(W * f(s, t))
    return out


def _eq2_rules(cfg: TiltConfig, f: SeparableField, r, om: float, resolution: int):
    """Nodes ``x_a``, and per ``a`` angular nodes and weights for one output angle."""
    levels, q, bulk = _resolution(resolution)
    lo = f.support[0] - np.log(np.max(r))
    hi = f.support[1] - np.log(np.min(r))
    if lo < 0 < hi:
        xe = np.concatenate([_graded_panels(lo, 0.0, False, True, levels, bulk),
                             _graded_panels(0.0, hi, True, False, levels, bulk)[1:]])
    else:
        xe = np.linspace(lo, hi, 2 * bulk + 1)
    x, wx = _gauss_on_edges(xe, q)
    rho = np.exp(x)
    c = np.cos(om) / rho
    a = np.arccos(np.clip(c, -1, 1))
    has = np.abs(c) <= 1
    om_m = np.mod(om, TWO_PI)
    cols = [np.zeros_like(x), np.full_like(x, np.pi), np.full_like(x, om_m),
            np.full_like(x, np.mod(-om, TWO_PI)), np.where(has, a, om_m),
            np.where(has, TWO_PI - a, om_m), np.full_like(x, TWO_PI)]
    brk = np.sort(np.stack(cols, axis=1), axis=1)
    ux, uw = graded_unit_rule(levels, q)
    lo_b, hi_b = brk[:, :-1], brk[:, 1:]
    psi = (lo_b[..., None] + (hi_b - lo_b)[..., None] * ux).reshape(len(x), -1)
    wpsi = ((hi_b - lo_b)[..., None] * uw).reshape(len(x), -1)
    return x, wx, psi, wpsi


def _eq2_coefficients(cfg: TiltConfig, f: SeparableField, r, om: float, resolution: int):
    """``c[k, a] = sum_b W_ab K(e^{x_a}, omega, psi_ab) A_k(psi_ab)``."""
    x, wx, psi, wpsi = _eq2_rules(cfg, f, r, om, resolution)
    kern = kernel_K(cfg, np.exp(x)[:, None], om, psi, check=False)
    kern = np.where(np.isfinite(kern), kern, 0.0)
    kw = kern * wpsi * wx[:, None]
    coef = np.stack([np.sum(kw * a(psi), axis=1) for _, a in f.terms])
    return x, coef


def trace_via_mellin_eq2(cfg: TiltConfig, f: SeparableField, r, omega, resolution: int = 1,
                         path: str = "convolution", n_tau: int = 1024, tau_max: float = 60.0) -> np.ndarray:
    """``g(r, omega) = int int K(rho/r, omega, psi) f(rho, psi) dpsi drho/rho``.

    ``path="convolution"`` sums the quadrature directly; ``path="mellin"``
    applies the discretized symbol ``K^(i tau)`` to the Mellin transform of
    the field and inverts, on the same ``(x, psi)`` nodes.
    """
    _check_support(f)
    r = np.atleast_1d(np.asarray(r, float))
    omega = np.atleast_1d(np.asarray(omega, float))
    if np.any(r <= 0):
        raise DomainError("output radii must be positive")
    out = np.zeros((len(r), len(omega)))
    if path == "mellin":
        tau = np.linspace(-tau_max, tau_max, n_tau + 1)
        dtau = tau[1] - tau[0]
        yq, wy = _gauss_on_edges(np.linspace(*f.support, 257), 8)
        bhat = np.stack([(b(yq) * wy) @ np.exp(-1j * np.outer(yq, tau)) for b, _ in f.terms])
        trap = np.full(len(tau), dtau)
        trap[[0, -1]] *= 0.5
    for j, om in enumerate(omega):
        x, coef = _eq2_coefficients(cfg, f, r, om, resolution)
        if path == "convolution":
            for k, (b, _) in enumerate(f.terms):
                out[:, j] += (b(np.log(r)[:, None] + x[None, :]) * coef[k]).sum(axis=1)
        elif path == "mellin":
            sym = coef @ np.exp(1j * np.outer(x, tau))                       # (terms, tau)
            g_tau = np.sum(sym * bhat, axis=0)
            phase = np.exp(1j * np.outer(np.log(r), tau))
            out[:, j] = ((phase * g_tau) @ trap).real / TWO_PI
        else:
            raise DomainError(f"unknown path {path!r}")
    return out


def rel_l2(a, b) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def output_grid(n_r: int = 5, n_omega: int = 12, r_lo: float = 0.6, r_hi: float = 1.8):
    """Radii and offset angles (avoiding 0 and pi) for comparisons."""
    r = np.geomspace(r_lo, r_hi, n_r)
    om = TWO_PI * (np.arange(n_omega) + 0.5) / n_omega
    return r, om


def schur_sup(cfg: TiltConfig, rho: float, n: int = 33) -> tuple[float, float]:
    """Max over fixed angles of the two Schur integrals.

    Angles are uniform on ``[0, pi]`` plus points clustered at 0 and pi on
    the scale ``|rho - 1|^{1/2}`` where the integrals peak; the kernel is even
    in both angles, so ``[0, pi]`` suffices.
    """
    scale = np.sqrt(abs(rho - 1.0))
    near = scale * np.array([0.25, 0.5, 1.0, 1.5, 2.0, 3.0])
    angles = np.unique(np.concatenate([np.linspace(0, np.pi, n), near, np.pi - near]))
    vals = np.array([schur_integrals(cfg, rho, a) for a in angles])
    return float(vals[:, 0].max()), float(vals[:, 1].max())
