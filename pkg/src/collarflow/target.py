"""Warped-product target geometry.

The target is N = R x_f Ntilde where Ntilde = (R^3, rho_Nt^2 g_eucl) carries
a compactly supported conformal bump of amplitude C_N,

    rho_Nt^2(x) = C_N exp(1 - 1/(1 - |x|^2)) 1_{|x|<1} + 1,

and the warping function f = f0(. - vbar) is non-increasing with plateau
f0 = 8 on (-inf, 0], a controlled middle blend, and an exact polynomial or
exponential tail on [Lambda, inf).  A compact-coupling construction derives
an admissible exponential-tail f0 (alpha = 2 pi) from profile functions
(k, h) satisfying a totally-geodesic constraint.

Metric coefficients in the symmetric coordinates (v, r, z, theta):
    diag(1, F P, F P, F P r^2),  F = f(v), P = rho_Nt^2(sqrt(r^2 + z^2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

_SLOPE_CAP = 0.125  # global bound on -f0' required on [1, inf)


class TargetConstructionError(ValueError):
    """A named constraint of the target construction is violated."""


# ---------------------------------------------------------------------------
# conformal bump metric on R^3
# ---------------------------------------------------------------------------

def bump_factor(radius, c_n: float):
    """rho_Nt^2 at Euclidean radius >= 0; equals 1 for radius >= 1."""
    r = np.asarray(radius, dtype=float)
    out = np.ones_like(r)
    m = r < 1.0
    if np.any(m):
        u = 1.0 - r[m] ** 2
        out[m] = c_n * np.exp(1.0 - 1.0 / u) + 1.0
    return out if out.ndim else float(out)


def bump_factor_deriv(radius, c_n: float):
    """d/dr of rho_Nt^2; vanishes identically for radius >= 1."""
    r = np.asarray(radius, dtype=float)
    out = np.zeros_like(r)
    m = (r < 1.0) & (r > 0.0)
    if np.any(m):
        u = 1.0 - r[m] ** 2
        out[m] = c_n * np.exp(1.0 - 1.0 / u) * (-2.0 * r[m] / u**2)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BumpMetric:
    c_n: float

    def factor(self, radius):
        return bump_factor(radius, self.c_n)

    def factor_deriv(self, radius):
        return bump_factor_deriv(radius, self.c_n)


def _radial_crit_fn(r, c_n):
    """phi(r) with g'(r) = 2 r phi(r) for g = r^2 rho_Nt^2; stable near r = 1."""
    r = np.asarray(r, dtype=float)
    u = 1.0 - r**2
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        b = np.where(u > 0, np.exp(1.0 - 1.0 / np.where(u > 0, u, 1.0)), 0.0)
        # b * r^2/u^2 computed in log space to avoid 0 * inf
        logval = 1.0 - 1.0 / np.where(u > 0, u, 1.0) + 2.0 * np.log(np.maximum(r, 1e-300)) \
            - 2.0 * np.log(np.where(u > 0, u, 1.0))
        val = np.where(u > 0, np.exp(logval), 0.0)
    return 1.0 + c_n * b - c_n * val


def extremal_radii(c_n: float, n_scan: int = 400_000) -> tuple[float, float]:
    """Interior critical radii (r_max, r_min) of r -> r^2 rho_Nt^2(r) on (0, 1).

    r_max is the local maximum, r_min the local minimum; exactly two sign
    changes of the radial derivative must exist, else c_n is inadmissible.
    Bisection-refined to 1e-10.
    """
    rs = np.linspace(1e-4, 1.0 - 1e-12, n_scan)
    phi = _radial_crit_fn(rs, c_n)
    sign = np.sign(phi)
    flips = np.nonzero(sign[1:] * sign[:-1] < 0)[0]
    if len(flips) != 2:
        raise TargetConstructionError(
            f"C_N below admissible threshold: found {len(flips)} interior critical points, need 2"
        )
    roots = []
    for i in flips:
        roots.append(brentq(lambda r: float(_radial_crit_fn(r, c_n)), rs[i], rs[i + 1],
                            xtol=1e-12, rtol=8.9e-16))
    r_max, r_min = sorted(roots)
    return float(r_max), float(r_min)


# ---------------------------------------------------------------------------
# warping functions
# ---------------------------------------------------------------------------

def _smoothstep(z):
    z = np.clip(z, 0.0, 1.0)
    return z**3 * (10.0 - 15.0 * z + 6.0 * z * z)


def _smoothstep_int(z):
    """int_0^z of the quintic smoothstep; equals 1/2 at z = 1."""
    z = np.clip(z, 0.0, 1.0)
    return 2.5 * z**4 - 3.0 * z**5 + z**6


@dataclass(frozen=True)
class WarpingSpec:
    """Shifted warping f(v) = f0(v - vbar) with plateau 8, blend, exact tail.

    kind: 'poly' (tail 1 + c3 v^{-(2/(1+delta)-1)}), 'exp'
    (tail 1 + c3 exp(-alpha (v - Lam))), 'compact' (f0 derived from a
    CompactCoupling) or 'const' (f = 1, the product-target control; skips
    the admissibility checks).
    """

    kind: str
    vbar: float = 0.0
    delta: float = 0.5
    alpha: float = 2.0 * math.pi
    c3: float = 1.0
    lam: float = 5.0
    # blend data (solved at construction): -f0' rises to m1 on [0,1], stays
    # m1 on the plateau part of [1,Lam], dives to the tail slope inside the
    # window [ya, yb] (normalized coordinates on [1, Lam]).
    m1: float = 0.0
    ya: float = 0.0
    yb: float = 1.0
    m_lam: float = 0.0
    _coupling: "CompactCoupling | None" = field(default=None, compare=False)

    # -- tail ---------------------------------------------------------------
    @property
    def tail_exponent(self) -> float:
        return 2.0 / (1.0 + self.delta) - 1.0

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "poly":
            return 1.0 + self.c3 * x ** (-self.tail_exponent)
        if self.kind in ("exp", "compact"):
            return 1.0 + self.c3 * np.exp(-self.alpha * (x - self.lam))
        raise TargetConstructionError(f"no tail for kind {self.kind!r}")

    def tail_slope(self, x):
        """-d/dx of the tail (positive)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "poly":
            b = self.tail_exponent
            return self.c3 * b * x ** (-b - 1.0)
        return self.alpha * self.c3 * np.exp(-self.alpha * (x - self.lam))

    # -- f0 and its derivative ---------------------------------------------
    def _blend_m(self, x):
        """-f0'(x) on [0, Lam]."""
        x = np.asarray(x, dtype=float)
        m = np.zeros_like(x)
        left = (x > 0.0) & (x < 1.0)
        m[left] = self.m1 * _smoothstep(x[left])
        mid = (x >= 1.0) & (x <= self.lam)
        y = (x[mid] - 1.0) / (self.lam - 1.0)
        z = (y - self.ya) / max(self.yb - self.ya, 1e-300)
        m[mid] = self.m_lam + (self.m1 - self.m_lam) * (1.0 - _smoothstep(z))
        return m

    def _blend_m_integral(self, x):
        """int_0^x of -f0' for x in [0, Lam]; closed form."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        lo = x < 1.0
        out[lo] = self.m1 * _smoothstep_int(np.maximum(x[lo], 0.0))
        hi = ~lo
        y = np.minimum((x[hi] - 1.0) / (self.lam - 1.0), 1.0)
        w = max(self.yb - self.ya, 1e-300)
        z = np.clip((y - self.ya) / w, 0.0, 1.0)
        int_g = np.minimum(y, self.ya) + w * (np.clip(z, 0, 1) - _smoothstep_int(z))
        out[hi] = self.m1 * 0.5 + (self.lam - 1.0) * (
            self.m_lam * y + (self.m1 - self.m_lam) * int_g
        )
        return out

    def f0(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return np.ones_like(x) if x.ndim else 1.0
        out = np.empty_like(x)
        out[x <= 0.0] = 8.0
        mid = (x > 0.0) & (x < self.lam)
        out[mid] = 8.0 - self._blend_m_integral(x[mid])
        tl = x >= self.lam
        out[tl] = self.tail(x[tl])
        return out if out.ndim else float(out)

    def f0_prime(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return np.zeros_like(x) if x.ndim else 0.0
        out = np.zeros_like(x)
        mid = (x > 0.0) & (x < self.lam)
        out[mid] = -self._blend_m(x[mid])
        tl = x >= self.lam
        out[tl] = -self.tail_slope(x[tl])
        return out if out.ndim else float(out)

    # -- shifted evaluators ---------------------------------------------------
    def f(self, v):
        return self.f0(np.asarray(v, dtype=float) - self.vbar)

    def f_prime(self, v):
        return self.f0_prime(np.asarray(v, dtype=float) - self.vbar)

    def v_star(self, value: float = 2.0) -> float:
        """Unique v with f(v) = value (value in (tail inf, 8))."""
        if self.kind == "const":
            raise TargetConstructionError("const warping has no level v*")
        hi = self.lam
        # near-flat tails (delta -> 1) cross low levels astronomically late
        while self.f0(hi) > value:
            hi *= 2.0
            if hi > 1e18:
                raise TargetConstructionError(f"f0 stays above {value} below 1e18")
        x = brentq(lambda t: float(self.f0(t)) - value, 0.0, hi,
                   xtol=1e-12, rtol=8.9e-16)
        return float(x + self.vbar)

    def config_dict(self) -> dict:
        return {
            "kind": self.kind, "vbar": self.vbar, "delta": self.delta,
            "alpha": self.alpha, "c3": self.c3, "lam": self.lam,
        }


def _verify_warping(f0, f0p, lam, tail, tail_slope, n_grid: int = 10_000,
                    tol: float = 1e-12) -> list[str]:
    """Grid checks of the admissibility constraints; returns violations.

    tol absorbs evaluation noise: closed-form warpings use 1e-12, the
    table-backed compact-coupling f0 uses a looser value.
    """
    bad: list[str] = []
    # dense points near the blend onset: -f0' can spike just past v = 1
    xs = np.unique(np.concatenate([np.linspace(-2.0, lam + 10.0, n_grid),
                                   np.linspace(0.5, min(4.0, lam), 2000)]))
    f = f0(xs)
    fp = f0p(xs)
    if np.any(np.abs(f[xs <= 0.0] - 8.0) > tol):
        bad.append("plateau: f0 != 8 on (-inf, 0]")
    if np.any(f[xs < 1.0] <= 7.0):
        bad.append("pre-blend: f0 <= 7 somewhere on (-inf, 1)")
    if np.any(np.diff(f) > tol):
        bad.append("monotonicity: f0 increasing somewhere")
    on = xs >= 1.0
    if np.any(-fp[on] > _SLOPE_CAP + tol):
        bad.append("slope cap: -f0' > 1/8 on [1, inf)")
    if np.any(-fp[on] <= 0.0):
        bad.append("slope positivity: -f0' <= 0 on [1, inf)")
    mfp = -fp[on]
    if np.any(np.diff(mfp) > tol):
        bad.append("slope monotonicity: -f0' increasing on [1, inf)")
    tl = xs >= lam
    if np.any(np.abs(f[tl] - tail(xs[tl])) > max(tol, 1e-10)):
        bad.append("tail: f0 deviates from the exact tail on [Lambda, inf)")
    if np.any(np.abs(-fp[tl] - tail_slope(xs[tl])) > max(tol, 1e-10)):
        bad.append("tail slope: -f0' deviates from the exact tail slope")
    return bad


def make_warping(kind: str, vbar: float = 0.0, *, delta: float = 0.5,
                 alpha: float = 2.0 * math.pi, c3: float = 1.0,
                 lam: float = 5.0, verify: bool = True) -> WarpingSpec:
    """Construct an admissible warping; fails naming the violated constraint.

    The blend of -f0' on (0, Lambda) is a quintic-smoothstep profile: rise
    0 -> m1 on [0,1], plateau, then a smoothstep dive to the exact tail
    slope, with m1 and the dive window solved so that f0 meets the tail
    value at Lambda exactly.
    """
    if kind == "const":
        return WarpingSpec(kind="const", vbar=vbar)
    if kind == "compact":
        raise TargetConstructionError("use build_compact_coupling for the compact kind")
    if kind not in ("poly", "exp"):
        raise TargetConstructionError(f"unknown warping kind {kind!r}")
    if kind == "poly" and not (0.0 < delta < 1.0):
        raise TargetConstructionError(f"poly warping needs delta in (0,1), got {delta}")
    if c3 <= 0.0 or lam <= 1.0 or vbar < 0.0 or (kind == "exp" and alpha <= 0.0):
        raise TargetConstructionError("warping parameters out of range")

    probe = WarpingSpec(kind=kind, vbar=vbar, delta=delta, alpha=alpha, c3=c3, lam=lam)
    f_lam = float(probe.tail(lam))
    m_lam = float(probe.tail_slope(lam))
    if f_lam > 7.0:
        raise TargetConstructionError(
            f"infeasible (tail value): f0(Lambda) = {f_lam:.4f} > 7"
        )
    if m_lam > _SLOPE_CAP:
        raise TargetConstructionError(
            f"infeasible (slope cap): tail slope at Lambda = {m_lam:.4f} > 1/8"
        )
    d_total = 8.0 - f_lam

    # solve m1 for a sequence of dive mass fractions J, largest first
    m1 = None
    for j in np.linspace(0.996, 0.01, 800):
        cand = (d_total - (lam - 1.0) * m_lam * (1.0 - j)) / (0.5 + (lam - 1.0) * j)
        if m_lam + 1e-9 < cand <= _SLOPE_CAP * (1.0 - 1e-9):
            m1, j_sol = float(cand), float(j)
            break
    if m1 is None:
        raise TargetConstructionError(
            "infeasible (slope cap): no blend with -f0' <= 1/8 reaches the tail value "
            f"(need average slope {d_total / max(lam - 1.0, 1e-9):.4f} over [1, Lambda])"
        )
    w = min(0.992, 2.0 * min(j_sol, 1.0 - j_sol))
    ya, yb = j_sol - w / 2.0, j_sol + w / 2.0

    spec = WarpingSpec(kind=kind, vbar=vbar, delta=delta, alpha=alpha, c3=c3,
                       lam=lam, m1=m1, ya=ya, yb=yb, m_lam=m_lam)
    if verify:
        bad = _verify_warping(spec.f0, spec.f0_prime, lam, spec.tail, spec.tail_slope)
        if bad:
            raise TargetConstructionError("warping verification failed: " + "; ".join(bad))
    return spec


# ---------------------------------------------------------------------------
# compact-target coupling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompactCoupling:
    """Profiles (k, h) of the compact coupling F with a totally geodesic slice.

    k: 7 on (-inf,0], prescribed derivative plateaus, 0 on [Lambda,inf).
    h(v) = sqrt(2) int_0^v e^{2 pi (t - Lambda)} |k'(t)| dt.
    F(x,y) = h(x+y-vbar) e^{-2 pi (x+y-vbar-Lambda)} (sin 2 pi (x - 1/8) + sqrt 2)
             + k(x+y-vbar) + 1.
    """

    c4: float
    lam: float
    vbar: float = 0.0
    _h_grid: np.ndarray = field(default=None, repr=False, compare=False)
    _h_vals: np.ndarray = field(default=None, repr=False, compare=False)
    # hw(v) := e^{-2 pi (v - Lambda)} h(v), the stable trailing average
    _hw_vals: np.ndarray = field(default=None, repr=False, compare=False)

    # -- k profile ------------------------------------------------------------
    def k_prime(self, v):
        """k'(v) <= 0, piecewise prescribed."""
        v = np.asarray(v, dtype=float)
        amp_hi = math.exp(math.pi / 2.0) * self.c4
        amp_lo = self.c4 / 4.0
        out = np.zeros_like(v)
        seg = (v > 0.0) & (v < 0.5)
        out[seg] = -amp_hi * _smoothstep(v[seg] / 0.5)
        seg = (v >= 0.5) & (v <= 0.75)
        out[seg] = -amp_hi
        seg = (v > 0.75) & (v < 1.0)
        out[seg] = -(amp_hi + (amp_lo - amp_hi) * _smoothstep((v[seg] - 0.75) / 0.25))
        seg = (v >= 1.0) & (v <= self.lam - 1.0)
        out[seg] = -amp_lo
        seg = (v > self.lam - 1.0) & (v < self.lam)
        out[seg] = -amp_lo * (1.0 - _smoothstep(v[seg] - (self.lam - 1.0)))
        return out

    def _k_prime_integral(self, v):
        """int_0^v |k'|; closed form via smoothstep integrals."""
        v = np.asarray(v, dtype=float)
        amp_hi = math.exp(math.pi / 2.0) * self.c4
        amp_lo = self.c4 / 4.0
        out = np.zeros_like(v)

        def seg_int(x):  # scalar x >= 0
            acc = 0.0
            # [0, 0.5] rise
            t = min(x, 0.5)
            acc += amp_hi * 0.5 * _smoothstep_int(t / 0.5)
            if x <= 0.5:
                return acc
            # [0.5, 0.75] plateau
            t = min(x, 0.75) - 0.5
            acc += amp_hi * t
            if x <= 0.75:
                return acc
            # [0.75, 1] fall
            t = min(x, 1.0) - 0.75
            z = t / 0.25
            acc += amp_hi * t + (amp_lo - amp_hi) * 0.25 * _smoothstep_int(z)
            if x <= 1.0:
                return acc
            # [1, Lam-1] plateau
            t = min(x, self.lam - 1.0) - 1.0
            acc += amp_lo * t
            if x <= self.lam - 1.0:
                return acc
            # [Lam-1, Lam] fall to zero
            t = min(x, self.lam) - (self.lam - 1.0)
            acc += amp_lo * (t - _smoothstep_int(t))
            return acc

        flat = out.ravel()
        vf = v.ravel()
        for i in range(vf.size):
            flat[i] = seg_int(max(float(vf[i]), 0.0))
        return out

    def k(self, v):
        return 7.0 - self._k_prime_integral(v)

    # -- h profile ------------------------------------------------------------
    def h(self, v):
        v = np.asarray(v, dtype=float)
        return np.interp(v, self._h_grid, self._h_vals, left=0.0,
                         right=float(self._h_vals[-1]))

    def h_prime(self, v):
        """Defining derivative sqrt(2) e^{2 pi (v - Lambda)} |k'(v)| (exact)."""
        v = np.asarray(v, dtype=float)
        return math.sqrt(2.0) * np.exp(np.minimum(2.0 * math.pi * (v - self.lam), 700.0)) \
            * np.abs(self.k_prime(v))

    def h_weighted(self, v):
        """e^{-2 pi (v - Lambda)} h(v) = sqrt2 int_0^v e^{-2 pi (v-t)} |k'| dt.

        Evaluated from a recursively built table; the naive product of the
        two factors overflows for v far below Lambda.
        """
        v = np.asarray(v, dtype=float)
        out = np.interp(v, self._h_grid, self._hw_vals, left=0.0, right=0.0)
        tail = v > self.lam
        if np.any(tail):
            expo = np.exp(-2.0 * math.pi * np.maximum(v - self.lam, 0.0))
            out = np.where(tail, self._hw_vals[-1] * expo, out)
        return out

    # -- coupling and the derived warping -------------------------------------
    def F(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        v = x + y - self.vbar
        return (self.h_weighted(v) * (np.sin(2.0 * math.pi * (x - 0.125)) + math.sqrt(2.0))
                + self.k(v) + 1.0)

    def tot_geod_residual(self, v):
        """k'(v) + e^{-2 pi (v - Lambda)} (sqrt2/2) h'(v); zero by construction.

        The weighted derivative e^{-2 pi (v - Lambda)} h'(v) is evaluated in
        product form, sqrt(2) |k'(v)|, since the separate exponential factors
        overflow for v far below Lambda.
        """
        kp = self.k_prime(v)
        return kp + (math.sqrt(2.0) / 2.0) * (math.sqrt(2.0) * np.abs(kp))

    def F_x_at_zero(self, v):
        """dF/dx restricted to the slice {x = 0}, by the chain rule.

        Vanishing of this derivative is the totally-geodesic condition; the
        trig factors at x = 0 contribute 2 pi hw (cos(-pi/4) - (sin(-pi/4)
        + sqrt 2)) which cancels exactly, leaving the tot-geod residual.
        """
        v = np.asarray(v, dtype=float)
        kp = self.k_prime(v)
        hw = self.h_weighted(v)
        trig = math.cos(-math.pi / 4.0) - (math.sin(-math.pi / 4.0) + math.sqrt(2.0))
        return (math.sqrt(2.0) / 2.0) * (math.sqrt(2.0) * np.abs(kp)) + kp \
            + 2.0 * math.pi * hw * trig

    def f0(self, x):
        x = np.asarray(x, dtype=float)
        return (math.sqrt(2.0) / 2.0) * self.h_weighted(x) + self.k(x) + 1.0

    def f0_prime(self, x):
        """-sqrt(2) pi e^{-2 pi (x-Lambda)} h(x), via the tot-geod identity."""
        x = np.asarray(x, dtype=float)
        return -math.sqrt(2.0) * math.pi * self.h_weighted(x)

    def as_warping(self, vbar: float | None = None) -> WarpingSpec:
        vb = self.vbar if vbar is None else vbar
        c3 = float(math.sqrt(2.0) / 2.0 * self._h_vals[-1])
        spec = WarpingSpec(kind="compact", vbar=vb, alpha=2.0 * math.pi,
                           c3=c3, lam=self.lam, _coupling=self)
        # route f0 through the coupling
        object.__setattr__(spec, "_coupling", self)
        return spec


def _solve_compact_lambda(c4: float) -> float:
    """Lambda with int_0^Lambda |k'| = 7 for the prescribed k' profile."""
    amp_hi = math.exp(math.pi / 2.0) * c4
    amp_lo = c4 / 4.0
    # fixed mass below v = 1: rise (amp_hi/4) + plateau (amp_hi/4) + fall
    fixed = amp_hi * 0.25 + amp_hi * 0.25 + (amp_hi * 0.25 + (amp_lo - amp_hi) * 0.125)
    # plateau [1, Lam-1]: amp_lo (Lam - 2); final fall: amp_lo * (1 - 1/2)
    drop_left = 7.0 - fixed - amp_lo * 0.5
    if drop_left <= 0.0:
        raise TargetConstructionError("infeasible c4: k reaches 0 before the plateau")
    return 2.0 + drop_left / amp_lo


def build_compact_coupling(c4: float, vbar: float = 0.0,
                           n_h_grid: int = 200_001) -> CompactCoupling:
    """Construct and certify the compact coupling for amplitude c4."""
    if c4 <= 0.0:
        raise TargetConstructionError("c4 must be positive")
    lam = _solve_compact_lambda(c4)
    coup = CompactCoupling(c4=c4, lam=lam, vbar=vbar)

    grid = np.linspace(0.0, lam, n_h_grid)
    dv = grid[1] - grid[0]
    abskp = np.abs(coup.k_prime(grid))
    # h itself: only the last few e-foldings below Lambda contribute
    integrand = math.sqrt(2.0) * np.exp(np.maximum(2.0 * math.pi * (grid - lam), -700.0)) * abskp
    hv = np.concatenate([[0.0], np.cumsum((integrand[1:] + integrand[:-1]) * 0.5 * np.diff(grid))])
    # weighted table hw(v) = e^{-2 pi (v - Lambda)} h(v) via the stable recursion
    # hw_{i+1} = e^{-2 pi dv} hw_i + sqrt2 (dv/2)(|k'_{i+1}| + e^{-2 pi dv} |k'_i|)
    decay = math.exp(-2.0 * math.pi * dv)
    half = math.sqrt(2.0) * dv * 0.5
    from scipy.signal import lfilter
    forcing = half * (abskp[1:] + decay * abskp[:-1])
    hw = np.concatenate([[0.0], lfilter([1.0], [1.0, -decay], forcing)])
    object.__setattr__(coup, "_h_grid", grid)
    object.__setattr__(coup, "_h_vals", hv)
    object.__setattr__(coup, "_hw_vals", hw)

    # certification ---------------------------------------------------------
    vs = np.unique(np.concatenate([np.linspace(-1.0, lam + 5.0, 10_000),
                                   np.linspace(0.9, min(4.0, lam), 2000)]))
    res = np.abs(coup.tot_geod_residual(vs))
    if np.max(res) > 1e-10:
        raise TargetConstructionError("tot-geod residual exceeds 1e-10")
    if abs(float(coup.k(np.array([lam]))[0])) > 1e-10:
        raise TargetConstructionError("Lambda solve failed: k(Lambda) != 0")
    on = vs >= 1.0
    hp = coup.h_prime(vs[on])
    hh = coup.h(vs[on])
    if np.any(hp > 2.0 * math.pi * hh + 1e-12):
        raise TargetConstructionError("h' <= 2 pi h fails on [1, inf)")
    mfp = -coup.f0_prime(vs)
    if np.any(mfp[on] > _SLOPE_CAP + 1e-12):
        raise TargetConstructionError("infeasible c4: derived -f0' > 1/8 on [1, inf)")
    kp = coup.k_prime(vs)
    if np.any(-kp > math.exp(math.pi) * c4 + 1e-12):
        raise TargetConstructionError("-k' exceeds e^pi c4")
    bad = _verify_warping(coup.f0, coup.f0_prime, lam,
                          lambda x: 1.0 + (math.sqrt(2.0) / 2.0) * hv[-1]
                          * np.exp(-2.0 * math.pi * (np.asarray(x) - lam)),
                          lambda x: math.sqrt(2.0) * math.pi * hv[-1]
                          * np.exp(-2.0 * math.pi * (np.asarray(x) - lam)),
                          tol=1e-7)
    if bad:
        raise TargetConstructionError("derived f0 fails admissibility checks: " + "; ".join(bad))
    return coup


# ---------------------------------------------------------------------------
# assembled target
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetGeometry:
    """The warped product R x_f Ntilde with cached extremal radii."""

    bump: BumpMetric
    warping: WarpingSpec
    r_max: float
    r_min: float

    @classmethod
    def build(cls, c_n: float, warping: WarpingSpec, *, e0: float = 10.0 * math.pi,
              z0: float = 1.2, certify: bool = True) -> "TargetGeometry":
        if certify:
            eps = min(z0 - 1.0, 0.1)
            if eps <= 0.0:
                raise TargetConstructionError("z0 must exceed 1")
            lower = 4.0 * math.pi * eps * c_n * math.exp(1.0 - 1.0 / (1.0 - 0.75**2)) * 0.25
            if not lower > e0:
                raise TargetConstructionError(
                    f"C_N too small for the area barrier: barrier {lower:.3f} <= E0 {e0:.3f}"
                )
        r_max, r_min = extremal_radii(c_n)
        return cls(bump=BumpMetric(c_n), warping=warping, r_max=r_max, r_min=r_min)

    # warping evaluators ------------------------------------------------------
    def f(self, v):
        if self.warping.kind == "compact" and self.warping._coupling is not None:
            c = self.warping._coupling
            return c.f0(np.asarray(v, dtype=float) - self.warping.vbar) \
                if np.ndim(v) else float(c.f0(np.array([v - self.warping.vbar]))[0])
        return self.warping.f(v)

    def f_prime(self, v):
        if self.warping.kind == "compact" and self.warping._coupling is not None:
            c = self.warping._coupling
            return c.f0_prime(np.asarray(v, dtype=float) - self.warping.vbar) \
                if np.ndim(v) else float(c.f0_prime(np.array([v - self.warping.vbar]))[0])
        return self.warping.f_prime(v)

    # bump evaluators -----------------------------------------------------------
    def P(self, r, z):
        """rho_Nt^2 at the image point (r e^{i theta}, z)."""
        return self.bump.factor(np.hypot(r, z))

    def P_grad(self, r, z):
        """(dP/dr, dP/dz) via the radial chain rule; zero at the origin."""
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        rad = np.hypot(r, z)
        dp = self.bump.factor_deriv(rad)
        with np.errstate(invalid="ignore", divide="ignore"):
            ur = np.where(rad > 0, r / np.where(rad > 0, rad, 1.0), 0.0)
            uz = np.where(rad > 0, z / np.where(rad > 0, rad, 1.0), 0.0)
        return dp * ur, dp * uz


def metric_coefficients(target: TargetGeometry, v, r, z):
    """(g_vv, g_rr, g_zz, g_thth) = (1, F P, F P, F P r^2)."""
    if np.any(np.asarray(r) < 0):
        raise ValueError("radius must be nonnegative")
    fp = target.f(v) * target.P(r, z)
    one = np.ones_like(np.asarray(fp, dtype=float))
    return one, fp, fp, fp * np.asarray(r, dtype=float) ** 2
