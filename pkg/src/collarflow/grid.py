"""Computational grid on the collar.

Nodes are uniform in xi on [-1, 1] and placed in the collar coordinate by a
monotone stretch s = S(xi; X).  The stretch keeps two fixed-resolution bands
(around the collar centre and next to both boundaries, where the map has
order-one features) and absorbs the growth of X in the featureless middle:

    S(xi; X) = g(X) xi + (X - g(X)) W(xi),   g(X) = gamma0 tanh(X / gamma0),

with W odd, W(1) = 1 and W' a normalized sin^2 bump supported on
band_lo < |xi| < band_hi.  For X << gamma0 this is essentially the linear
stretch s = xi X; for large X the centre and boundary cell size saturates at
gamma0 * dxi independently of ell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .collar import CollarMetric


@dataclass(frozen=True)
class StretchSpec:
    gamma0: float = 80.0
    band_lo: float = 0.30
    band_hi: float = 0.85

    def _gamma(self, X: float) -> float:
        return self.gamma0 * math.tanh(X / self.gamma0)

    def _gamma_dX(self, X: float) -> float:
        u = X / self.gamma0
        return 0.0 if u > 350.0 else 1.0 / math.cosh(u) ** 2

    def _w_and_deriv(self, xi):
        a, b = self.band_lo, self.band_hi
        u = np.abs(xi)
        t = np.clip((u - a) / (b - a), 0.0, 1.0)
        # int_0^u of sin^2(pi t) over the band, normalized to 1 at u = 1
        ib = (b - a) * (t / 2.0 - np.sin(2.0 * math.pi * t) / (4.0 * math.pi))
        w = np.sign(xi) * ib / ((b - a) / 2.0)
        wp = np.where((u > a) & (u < b), np.sin(math.pi * t) ** 2 / ((b - a) / 2.0), 0.0)
        return w, wp

    def s_of_xi(self, xi, X: float):
        g = self._gamma(X)
        w, _ = self._w_and_deriv(np.asarray(xi, dtype=float))
        return g * np.asarray(xi, dtype=float) + (X - g) * w

    def ds_dxi(self, xi, X: float):
        g = self._gamma(X)
        _, wp = self._w_and_deriv(np.asarray(xi, dtype=float))
        return g + (X - g) * wp

    def ds_dX(self, xi, X: float):
        """Node velocity per unit change of X (the moving-grid gauge field)."""
        xi = np.asarray(xi, dtype=float)
        g, gp = self._gamma(X), self._gamma_dX(X)
        w, _ = self._w_and_deriv(xi)
        return gp * (xi - w) + w


def _deriv4_weights(s: np.ndarray) -> np.ndarray:
    """First-derivative weights of the 5-point Lagrange stencil, per node.

    Returns W of shape (n+1, 5) with df[i] = sum_j W[i, j] f[i - 2 + j]
    (stencil shifted inward at the two nodes next to each boundary).
    Fourth-order on smooth data for any monotone node placement.
    """
    n1 = len(s)
    W = np.zeros((n1, 5))
    offs = np.empty(n1, dtype=int)
    offs[:] = -2
    offs[0], offs[1] = 0, -1
    offs[-2], offs[-1] = -3, -4
    base = np.arange(n1) + offs  # leftmost stencil index
    idx = base[:, None] + np.arange(5)[None, :]
    xs = s[idx]                      # (n1, 5) stencil nodes
    xc = s[:, None]                  # evaluation points
    for j in range(5):
        denom = np.ones(n1)
        for k in range(5):
            if k != j:
                denom *= xs[:, j] - xs[:, k]
        num = np.zeros(n1)
        for m in range(5):
            if m == j:
                continue
            prod = np.ones(n1)
            for k in range(5):
                if k != j and k != m:
                    prod *= xc[:, 0] - xs[:, k]
            num += prod
        W[:, j] = num / denom
    return W


@dataclass(frozen=True)
class CollarGrid:
    """Node placement plus all per-node metric data used by the observables."""

    metric: CollarMetric
    stretch: StretchSpec
    n: int
    xi: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)          # cell widths, len n
    w_trap: np.ndarray = field(repr=False)     # trapezoid node weights, len n+1
    rho: np.ndarray = field(repr=False)
    rho2: np.ndarray = field(repr=False)
    rho_m2: np.ndarray = field(repr=False)
    ds_dX: np.ndarray = field(repr=False)
    _d4: np.ndarray = field(repr=False)
    _d4_idx: np.ndarray = field(repr=False)

    @property
    def X(self) -> float:
        return self.metric.X

    @property
    def ell(self) -> float:
        return self.metric.ell

    def deriv(self, y: np.ndarray) -> np.ndarray:
        """Fourth-order first derivative d/ds of nodal data."""
        return np.einsum("ij,ij->i", self._d4, y[self._d4_idx])

    def trapz(self, y: np.ndarray) -> float:
        return float(np.dot(self.w_trap, y))


def build_grid(n: int, metric: CollarMetric, stretch: StretchSpec | None = None,
               light: bool = False) -> CollarGrid:
    """Build the grid; light=True skips the derivative stencils (energy-only
    evaluations at perturbed ell)."""
    if n % 2 != 0 or n < 16:
        raise ValueError("n must be even and >= 16")
    stretch = stretch or StretchSpec()
    xi = np.linspace(-1.0, 1.0, n + 1)
    X = metric.X
    s = stretch.s_of_xi(xi, X)
    s[0], s[-1] = -X, X
    s[n // 2] = 0.0
    h = np.diff(s)
    if np.any(h <= 0):
        raise ValueError("stretch map not monotone for this X")
    w = np.zeros(n + 1)
    w[:-1] += h / 2.0
    w[1:] += h / 2.0
    rho = metric.rho(s)
    dsdX = stretch.ds_dX(xi, X)
    if light:
        d4 = np.zeros((0, 5))
        idx = np.zeros((0, 5), dtype=int)
    else:
        d4 = _deriv4_weights(s)
        offs = np.full(n + 1, -2, dtype=int)
        offs[0], offs[1], offs[-2], offs[-1] = 0, -1, -3, -4
        idx = (np.arange(n + 1) + offs)[:, None] + np.arange(5)[None, :]
    return CollarGrid(metric=metric, stretch=stretch, n=n, xi=xi, s=s, h=h,
                      w_trap=w, rho=rho, rho2=rho * rho, rho_m2=1.0 / (rho * rho),
                      ds_dX=dsdX, _d4=d4, _d4_idx=idx)
