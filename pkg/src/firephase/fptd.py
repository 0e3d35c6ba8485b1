"""First-passage-time densities across the periodic threshold.

Two routes to the density of the firing time:

* a small-noise Gaussian approximation centered at the deterministic
  crossing, with temporal variance ``(eps * sigma_tau)^2`` where the slope
  gap at the crossing converts spatial into temporal spread;
* the renewal-style Volterra integral equation

      p(t) = b1(t|t0,x0) q(t|t0,x0) - int_t0^t b1(t|r,g(r)) q(t|r,g(r)) p(r) dr

  whose kernel is the product of a slope factor ``b1`` (from the pinned
  Gaussian bridge) and the free transition density ``q`` evaluated on the
  threshold.  Near the diagonal the kernel behaves like
  ``sqrt(u) * exp(-lambda u)`` in the lag ``u = t - r``, with
  ``lambda = margin^2 / (2 eps^2)`` a stiff rate the step rule does not
  resolve; plain trapezoid would lose both order and constant there.  The
  solver therefore uses product integration: the remaining smooth factor is
  taken piecewise linear and the root/exponential factor is integrated
  exactly into quadrature weights (incomplete-gamma moments on the first
  panels, plain root moments beyond), keeping second order with a small
  constant at unchanged O(M^2) cost.

The slope factor is stated for constant input; every solve first applies the
exact constant-input reduction of the model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from . import detmap
from .errors import DegenerateInterval, MassDeficit, NonTransversal, NumericalError
from .model import SifModel
from .periodic import Constant

SQRT_2PI = math.sqrt(2.0 * math.pi)
SQRT_PI = math.sqrt(math.pi)

DEFICIT_TARGET = 1e-6
DEFICIT_HARD = 1e-3
MAX_PERIODS = 50
STEP_MIN, STEP_MAX = 1e-5, 1e-3
# negative-lobe ringing in true-zero stretches sits near 1e-7..1e-6 for the
# sharpest densities regardless of step; the budget flags breakdowns only
CLAMP_BUDGET = 1e-5


@dataclass(frozen=True)
class GaussianFptd:
    """Normal approximation of the firing time for one start."""

    mean: float          # deterministic crossing time
    stdev: float         # eps * sigma_tau
    sigma_tau: float     # temporal spread per unit noise
    slope_gap: float     # m(t0, x0) at the crossing
    t0: float
    x0: float
    eps: float

    def density(self, t):
        t = np.asarray(t, dtype=float)
        if self.stdev == 0.0:
            raise ZeroDivisionError("degenerate (eps = 0) Gaussian approximation")
        z = (t - self.mean) / self.stdev
        return np.exp(-0.5 * z * z) / (SQRT_2PI * self.stdev)

    def standardized_density(self, u):
        """Density of (tau - mean)/eps at u, i.e. N(0, sigma_tau^2)."""
        u = np.asarray(u, dtype=float)
        z = u / self.sigma_tau
        return np.exp(-0.5 * z * z) / (SQRT_2PI * self.sigma_tau)


@dataclass
class FptdGrid:
    """Density of the firing time on a uniform grid starting at t0."""

    t0: float
    x0: float
    step: float
    density: np.ndarray
    cumulative: np.ndarray
    mass_deficit: float
    clamped_mass: float = 0.0

    @property
    def times(self):
        return self.t0 + self.step * np.arange(len(self.density))

    @property
    def horizon(self):
        return self.t0 + self.step * (len(self.density) - 1)

    def density_at(self, t):
        return np.interp(t, self.times, self.density, left=0.0, right=0.0)

    def cdf_at(self, t):
        return np.interp(t, self.times, self.cumulative, left=0.0,
                         right=float(self.cumulative[-1]))


@dataclass
class CircleDensity:
    """Line density wrapped onto the unit circle, stored as cell masses."""

    masses: np.ndarray

    @property
    def n(self):
        return len(self.masses)

    @property
    def density(self):
        return self.masses * self.n

    @property
    def integral(self):
        return float(self.masses.sum())

    @property
    def mode_cell(self):
        return int(np.argmax(self.masses))


def transition_density_q(model: SifModel, t, t0, x0):
    """Free transition density of the diffusion, evaluated on the threshold."""
    t = np.asarray(t, dtype=float)
    s2 = model.eps ** 2 * model.sigma2(t, t0)
    gap = model.threshold(t) - model.flow(t, t0, x0)
    return np.exp(-0.5 * gap * gap / s2) / (SQRT_2PI * np.sqrt(s2))


K_LAYER = 64
_LAYER_DECAY = 6.0


def _gamma32(x):
    """Lower incomplete gamma(3/2, x); series branch avoids cancellation."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-3
    xs = np.where(small, x, 0.0)
    series = (2.0 / 3.0) * xs ** 1.5 * (1.0 - 0.6 * xs + (3.0 / 14.0) * xs * xs)
    with np.errstate(invalid="ignore"):
        big = SQRT_PI / 2.0 * erf(np.sqrt(x)) - np.sqrt(x) * np.exp(-x)
    return np.where(small, series, big)


def _gamma52(x):
    x = np.asarray(x, dtype=float)
    small = x < 1e-3
    xs = np.where(small, x, 0.0)
    series = 0.4 * xs ** 2.5 * (1.0 - (5.0 / 7.0) * xs + (5.0 / 18.0) * xs * xs)
    big = 1.5 * _gamma32(x) - x ** 1.5 * np.exp(-x)
    return np.where(small, series, big)


def _layer_weights(z, h, npanels):
    """Product-integration node weights against ``sqrt(u) exp(-z u)``.

    Panels ``0..npanels-1`` in the lag u; returns weights for node lags
    ``0..npanels`` in the same ``h**1.5`` units as the plain root weights
    (the last entry is the left-edge contribution of the final panel only,
    for splicing onto plain weights beyond the layer).
    """
    edges = h * np.arange(npanels + 1)
    x = z * edges
    i0 = np.diff(_gamma32(x)) * z ** -1.5
    i1 = np.diff(_gamma52(x)) * z ** -2.5
    left = (i1 - edges[:-1] * i0) / h
    right = (edges[1:] * i0 - i1) / h
    wn = np.empty(npanels + 1)
    wn[0] = right[0]
    if npanels > 1:
        wn[1:npanels] = left[: npanels - 1] + right[1:]
    wn[npanels] = left[npanels - 1]
    return wn / h ** 1.5


def _coth(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 / np.where(x == 0, np.inf, x) + x / 3.0,
                    np.cosh(safe) / np.sinh(safe))


def slope_b1(model: SifModel, t, t0, x0):
    """Slope factor of the Durbin decomposition (constant input only).

    ``b1 = -g'(t) - gamma*xi(t) + I + psi'(t)*(g(t) - xi(t))`` with
    ``psi'(t) = gamma*coth(gamma*(t-t0))`` (or ``1/(t-t0)`` in the driftless
    case).  At the deterministic crossing this reduces to the slope gap m.
    """
    if not isinstance(model.input, Constant):
        raise ValueError("slope_b1 needs constant input; reduce the model first")
    t = np.asarray(t, dtype=float)
    dt = t - t0
    if np.any(dt < 1e-14):
        raise DegenerateInterval("slope term needs t - t0 >= 1e-14")
    I = model.input.value
    g = model.threshold
    xi = model.flow(t, t0, x0)
    if model.gamma > 0:
        psi1 = model.gamma * _coth(model.gamma * dt)
    else:
        psi1 = 1.0 / dt
    return -g.d1(t) - model.gamma * xi + I + psi1 * (g(t) - xi)


def boundary_b1(model: SifModel, t, r):
    """Threshold-to-threshold slope kernel ``b1(t | r, g(r))``.

    Expanded, cancellation-free form; vanishes like ``t - r`` on the
    diagonal.  The bracket ``gamma*u/sinh(gamma*u) - 1`` switches to its
    series below 1e-4 to dodge roundoff in the hyperbolic ratio.
    """
    if not isinstance(model.input, Constant):
        raise ValueError("boundary_b1 needs constant input; reduce the model first")
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    u = t - r
    g = model.threshold
    gt, gr = g(t), g(r)
    usafe = np.where(u == 0.0, 1.0, u)
    chord = (gt - gr) / usafe
    first = chord - g.d1(t)
    if model.gamma == 0.0:
        return np.where(u == 0.0, 0.0, first)
    x = model.gamma * u
    em = np.expm1(-x)                      # exp(-x) - 1, exact near 0
    ex = 1.0 + em
    sinh = np.where(x == 0.0, 1.0, -em * (1.0 + ex) / (2.0 * ex))
    bracket = np.where(
        np.abs(x) < 1e-4,
        -x * x / 6.0 + 7.0 * x ** 4 / 360.0,
        x / sinh - 1.0,
    )
    tanh_half = -em / (2.0 + em)           # tanh(x/2)
    I = model.input.value
    out = first + bracket * chord + tanh_half * (model.gamma * gt - I)
    return np.where(u == 0.0, 0.0, out)


def gaussian_approx(model: SifModel, t0: float, x0: float | None = None) -> GaussianFptd:
    """Gaussian firing-time law from the transversal-crossing limit."""
    if x0 is None:
        x0 = float(model.reset(t0))
    f = detmap.hit_time(model, t0, x0)
    m = float(model.slope_margin(f))
    if m <= 1e-10:
        raise NonTransversal(
            f"slope gap {m:.3e} at the crossing from t0={t0:.8g}"
        )
    sigma = math.sqrt(float(model.sigma2(f, t0)))
    sigma_tau = sigma / m
    return GaussianFptd(
        mean=float(f),
        stdev=model.eps * sigma_tau,
        sigma_tau=sigma_tau,
        slope_gap=m,
        t0=float(t0),
        x0=float(x0),
        eps=model.eps,
    )


def closed_form_bm(threshold: float, drift: float, t0: float, x0: float,
                   eps: float, t):
    """Exact passage density for driftful Brownian motion at a flat threshold."""
    t = np.asarray(t, dtype=float)
    dt = t - t0
    gap = threshold - x0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (
            gap
            / (SQRT_2PI * eps * dt ** 1.5)
            * np.exp(-((gap - drift * dt) ** 2) / (2.0 * eps ** 2 * dt))
        )
    return np.where(dt > 0, out, 0.0)


def default_step(model: SifModel, t0: float, x0: float | None = None,
                 sigma_tau: float | None = None) -> float:
    """eps*sigma_tau/20 clamped to [1e-5, 1e-3]; resolves the density peak."""
    if sigma_tau is not None:
        raw = model.eps * sigma_tau / 20.0
    else:
        try:
            ga = gaussian_approx(model, t0, x0)
            raw = ga.stdev / 20.0
        except NonTransversal:
            raw = STEP_MAX
    return float(min(max(raw, STEP_MIN), STEP_MAX))


def solve_volterra(
    model: SifModel,
    t0: float,
    x0: float | None = None,
    step: float | None = None,
    deficit_target: float = DEFICIT_TARGET,
    max_periods: int = MAX_PERIODS,
    hit_hint: float | None = None,
    sigma_tau_hint: float | None = None,
) -> FptdGrid:
    """Forward product-integration of the passage-time equation.

    The horizon grows in whole periods until the missing mass drops below
    ``deficit_target`` (raises only if the hard cap is hit with more than
    ``DEFICIT_HARD`` still missing).  ``hit_hint``/``sigma_tau_hint`` let a
    caller that already located the deterministic crossing (e.g. the matrix
    builder, once for all rows) skip the per-start search.
    """
    if model.eps <= 0:
        raise ValueError("Volterra solve needs eps > 0")
    if x0 is None:
        x0 = float(model.reset(t0))
    red = model.reduce_to_constant_input()
    if red is not model:
        x0 = float(x0 - model.input_shift()(t0))
    if step is None:
        step = default_step(red, t0, x0, sigma_tau=sigma_tau_hint)

    f = hit_hint if hit_hint is not None else detmap.hit_time(red, t0, x0)
    if sigma_tau_hint is not None:
        ga_pad = 8.0 * red.eps * sigma_tau_hint
    else:
        try:
            ga_pad = 8.0 * gaussian_approx(red, t0, x0).stdev
        except NonTransversal:
            ga_pad = 0.2
    periods = max(1, int(math.ceil(f - t0 + ga_pad)))

    I = red.input.value
    gamma = red.gamma
    g = red.threshold
    eps = red.eps
    ibar = I / gamma if gamma > 0 else 0.0

    p = np.zeros(1)
    m_done = 0
    prev_deficit = np.inf
    refines_left = 2
    while True:
        m_total = int(round(periods / step))
        tgrid = t0 + step * np.arange(m_total + 1)
        gvals = g(tgrid)
        g1vals = g.d1(tgrid)
        if m_done == 0:
            p = np.zeros(m_total + 1)
        else:
            p = np.concatenate([p, np.zeros(m_total - m_done)])

        # everything depending on the lag u = t_i - r_j alone is Toeplitz:
        # precompute it per lag instead of per (row, column) pair
        u = step * np.arange(1, m_total + 1)
        inv_u = 1.0 / u
        if gamma > 0:
            x = gamma * u
            em = np.expm1(-x)
            ex = 1.0 + em
            sinh = -em * (1.0 + ex) / (2.0 * ex)
            one_plus_bracket = 1.0 + np.where(
                x < 1e-4, -x * x / 6.0 + 7.0 * x ** 4 / 360.0, x / sinh - 1.0
            )
            tanh_half = -em / (2.0 + em)
            s2 = eps * eps * (-em) * (1.0 + ex) / (2.0 * gamma)
            gshift = gvals - ibar
        else:
            ex = np.ones_like(u)
            one_plus_bracket = np.ones_like(u)
            tanh_half = np.zeros_like(u)
            s2 = eps * eps * u
            gshift = gvals - 0.0
        # product-integration: K = S(r) * sqrt(t_i - r) with S smooth away
        # from the diagonal boundary layer; plain root moments give Toeplitz
        # node weights
        ell = np.arange(m_total, dtype=float)
        mom_a = (2.0 / 3.0) * ((ell + 1.0) ** 1.5 - ell ** 1.5)
        mom_b = (ell + 1.0) * mom_a - 0.4 * ((ell + 1.0) ** 2.5 - ell ** 2.5)
        w_node = np.empty(m_total)
        w_node[0] = mom_b[0]                       # diagonal node, lag 0
        if m_total > 1:
            w_node[1:] = (mom_a[:-1] - mom_b[:-1]) + mom_b[1:]
        wscale = step ** 1.5
        snorm = 1.0 / (SQRT_2PI * np.sqrt(s2) * np.sqrt(u))
        half_inv_s2 = 0.5 / s2
        # S on the diagonal: lim K/sqrt(u) = (gamma*(gamma*g - I) - g'')/2
        # divided by sqrt(2 pi) eps
        s_diag = (gamma * (gamma * gvals - I) - g.d2(tgrid)) / (
            2.0 * SQRT_2PI * eps
        )
        # stiff decay rate of the kernel off the diagonal; the layer weights
        # for every row come from one vectorized moment evaluation
        lam = (I - gamma * gvals - g1vals) ** 2 / (2.0 * eps * eps)
        layered = lam * step >= _LAYER_DECAY / (8.0 * K_LAYER)
        with np.errstate(divide="ignore", invalid="ignore"):
            npan_all = np.where(
                layered,
                np.clip(np.ceil(_LAYER_DECAY / (lam * step)), 4, K_LAYER), 0,
            ).astype(int)
            edges = step * np.arange(K_LAYER + 1)
            zc = np.where(layered, lam, 1.0)[:, None]
            xg = zc * edges[None, :]
            di0 = np.diff(_gamma32(xg), axis=1) * zc ** -1.5
            di1 = np.diff(_gamma52(xg), axis=1) * zc ** -2.5
        h32 = step ** 1.5
        w_left = (di1 - edges[None, :-1] * di0) / step / h32
        w_right = (edges[None, 1:] * di0 - di1) / step / h32

        first = slope_b1(red, tgrid[1:], t0, x0) * transition_density_q(
            red, tgrid[1:], t0, x0
        )
        drift0 = 0.0 if gamma > 0 else I
        if m_done == 0:
            jlo, jhi, pmax = 1, 0, 0.0
        for i in range(max(m_done + 1, 1), m_total + 1):
            acc = 0.0
            z = lam[i]
            c0 = w_right[i, 0] if layered[i] else w_node[0]
            j0 = jlo
            j1 = min(i - 1, jhi)
            if j1 >= j0:
                lo_lag, hi_lag = i - j1, i - j0
                rv = slice(hi_lag - 1, lo_lag - 2 if lo_lag >= 2 else None, -1)
                gj = gvals[j0:j1 + 1]
                chord = (gvals[i] - gj) * inv_u[rv]
                b1 = (
                    chord * one_plus_bracket[rv]
                    - g1vals[i]
                    + tanh_half[rv] * (gamma * gvals[i] - I)
                )
                if gamma > 0:
                    xi = ibar + ex[rv] * gshift[j0:j1 + 1]
                else:
                    xi = gj + drift0 * u[rv]
                gap = gvals[i] - xi
                expo = -gap * gap * half_inv_s2[rv]
                wrow = w_node[hi_lag : lo_lag - 1 : -1]
                if layered[i]:
                    npan = min(npan_all[i], i)
                    nn = j1 - max(j0, i - npan) + 1  # window nodes in the layer
                    if nn > 0:
                        # inside the layer the exp(-z u) decay moves into the
                        # weights; the integrand keeps the smooth remainder
                        top = min(hi_lag, npan)      # largest in-layer lag
                        expo[-nn:] += z * u[
                            top - 1 : lo_lag - 2 if lo_lag >= 2 else None : -1
                        ]
                        wrow = wrow.copy()
                        k1 = min(npan - 1, hi_lag) - lo_lag + 1
                        if k1 > 0:
                            wrow[-k1:] = (
                                w_left[i, lo_lag - 1 : lo_lag + k1 - 1]
                                + w_right[i, lo_lag : lo_lag + k1]
                            )[::-1]
                        if lo_lag <= npan <= hi_lag:
                            wrow[-(npan - lo_lag + 1)] = w_left[
                                i, npan - 1
                            ] + mom_b[npan] * math.exp(-z * u[npan - 1])
                s_vals = b1 * snorm[rv] * np.exp(expo)
                acc = h32 * np.dot(wrow, s_vals * p[j0:j1 + 1])
            p[i] = (first[i - 1] - acc) / (1.0 + h32 * c0 * s_diag[i])
            api = abs(p[i])
            if api > pmax:
                pmax = api
            if api > 1e-14 * pmax:
                jhi = i
            while jlo < i and abs(p[jlo]) <= 1e-14 * pmax:
                jlo += 1

        m_done = m_total
        cum = np.concatenate([[0.0], np.cumsum(0.5 * step * (p[1:] + p[:-1]))])
        deficit = 1.0 - cum[-1]
        ringing = -float(np.trapezoid(np.minimum(p, 0.0), dx=step))
        if abs(deficit) < deficit_target and ringing <= CLAMP_BUDGET / 10.0:
            break
        if (
            abs(deficit) < deficit_target
            or periods >= max_periods
            or deficit > 0.9 * prev_deficit
            or deficit < 0
        ):
            # horizon cap or quadrature floor: a finer step is the only way
            # to shave the remaining bias or the negative-lobe ringing
            if refines_left > 0 and step / 2.0 >= STEP_MIN:
                refines_left -= 1
                step /= 2.0
                m_done = 0
                prev_deficit = np.inf
                continue
            if deficit > DEFICIT_HARD:
                raise MassDeficit(deficit, periods)
            break
        prev_deficit = deficit
        periods += 1

    neg = p < 0
    clamped = -float(np.trapezoid(np.where(neg, p, 0.0), dx=step))
    if clamped > CLAMP_BUDGET:
        raise NumericalError(
            f"clamped negative density mass {clamped:.3e} exceeds budget"
        )
    if neg.any():
        p = np.where(neg, 0.0, p)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * step * (p[1:] + p[:-1]))])
        deficit = 1.0 - cum[-1]
    return FptdGrid(
        t0=float(t0),
        x0=float(x0),
        step=float(step),
        density=p,
        cumulative=cum,
        mass_deficit=float(deficit),
        clamped_mass=clamped,
    )


def wrap_density(grid: FptdGrid, n: int = 256) -> CircleDensity:
    """Sum the line density over integer translates onto n circle cells.

    Cell masses come from cumulative differences, so the total mass equals
    the line cumulative exactly (up to summation roundoff).
    """
    t0 = grid.t0
    t1 = float(grid.times[-1])
    edges = np.arange(math.ceil(t0 * n), math.floor(t1 * n) + 1) / n
    edges = np.concatenate([[t0], edges, [t1]])
    cdf = grid.cdf_at(edges)
    seg_mass = np.diff(cdf)
    seg_cell = (np.floor(edges[:-1] * n + 1e-9) % n).astype(int)
    masses = np.zeros(n)
    np.add.at(masses, seg_cell, seg_mass)
    return CircleDensity(masses=masses)
