"""Deterministic firing map: crossings, orbits, discontinuities, predictions.

The noise-free trajectory started at phase ``t0`` from the reset level either
crosses the threshold transversally (the generic case), or touches it
tangentially and crosses later.  The first contact time defines the firing
map ``f``; the first strict crossing defines ``f*``.  Phase-locked orbits of
``f mod 1`` and their multipliers determine the small-noise limit of the
phase-chain spectrum; this module locates them and emits that prediction.

Numerical strategy: a fixed-step march brackets sign changes of the gap
``flow - threshold`` (step 1/512, which out-resolves every threshold family
this package accepts), interior near-touch maxima are screened by a quadratic
estimate and resolved by bisecting the gap derivative, and all orbit hunting
runs on a cached 4096-point lifted grid with final Newton polish against the
exact map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    AtDiscontinuity,
    ConditionError,
    NoCrossing,
    PredictionInvalid,
)
from .model import SifModel

MARCH = 1.0 / 512
HORIZON_PERIODS = 50
TANGENCY_TOL = 1e-10
GRID_N = 4096

# Interior maxima of the gap are investigated only when a quadratic estimate
# puts them within this distance of the threshold; real dips sit far below.
_NEAR_TOUCH = 1e-3

_DISC_MIN_GAP = 1e-6


def circle_dist(a, b):
    """Distance on the circle of circumference 1."""
    d = np.mod(np.asarray(a) - b + 0.5, 1.0) - 0.5
    return np.abs(d)


# ---------------------------------------------------------------------------
# first-contact machinery
# ---------------------------------------------------------------------------


def _bisect_gap_root(model, t0, x0, lo, hi, iters=50):
    """Vectorized bisection for flow(t) = g(t) with a sign-change bracket."""
    g = model.threshold
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        e = model.flow(mid, t0, x0) - g(mid)
        neg = e < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    root = 0.5 * (lo + hi)
    # one guarded Newton step sharpens the residual where the slope allows
    e = model.flow(root, t0, x0) - g(root)
    de = model.flow_dt(root, t0, x0) - g.d1(root)
    ok = np.abs(de) > 1e-12
    step = np.where(ok, e / np.where(ok, de, 1.0), 0.0)
    return np.clip(root - step, lo, hi)


def _bisect_gap_max(model, t0, x0, lo, hi, iters=46):
    """Locate the interior maximum of flow - g given a derivative bracket."""
    g = model.threshold
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        de = model.flow_dt(mid, t0, x0) - g.d1(mid)
        pos = de > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    tm = 0.5 * (lo + hi)
    return tm, model.flow(tm, t0, x0) - g(tm)


def _first_contacts(model, t0, x0, need_star=True, horizon=HORIZON_PERIODS):
    """First contact and first strict crossing for a batch of starts.

    Returns ``(hit, star, touched)``.  ``hit`` is the first time the
    trajectory meets the threshold (tangency counts); ``star`` is the first
    strict up-crossing.  They differ only at grazing starts.  With
    ``need_star=False`` grazing starts stop at the touch and ``star`` is NaN
    for them.
    """
    t0 = np.atleast_1d(np.asarray(t0, dtype=float))
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), t0.shape).copy()
    n = t0.size
    g = model.threshold

    hit = np.full(n, np.nan)
    star = np.full(n, np.nan)
    touched = np.zeros(n, dtype=bool)

    a = t0.copy()
    e_a = x0 - g(t0)
    if np.any(e_a >= 0):
        raise ValueError("start level must be strictly below the threshold")
    de_a = model.flow_dt(t0, t0, x0) - g.d1(t0)
    active = np.ones(n, dtype=bool)

    # crossing brackets are collected and refined in one vectorized pass
    br_idx, br_lo, br_hi = [], [], []

    max_steps = int(math.ceil(horizon / MARCH))
    for _ in range(max_steps):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        b = a[idx] + MARCH
        xi_b = model.flow(b, t0[idx], x0[idx])
        e_b = xi_b - g(b)
        de_b = -model.gamma * xi_b + model.input(b) - g.d1(b)

        crossed = e_b >= 0
        if crossed.any():
            sub = idx[crossed]
            br_idx.append(sub)
            br_lo.append(a[sub])
            br_hi.append(b[crossed])
            active[sub] = False

        interior = (~crossed) & (de_a[idx] > 0) & (de_b <= 0)
        if interior.any():
            # quadratic screen: skip maxima that are clearly below threshold
            sub = idx[interior]
            da = de_a[sub]
            db = de_b[interior]
            delta = MARCH * da / np.maximum(da - db, 1e-300)
            est = e_a[sub] + 0.5 * da * delta
            est = np.maximum(est, e_b[interior])
            look = est > -_NEAR_TOUCH
            if look.any():
                sub = sub[look]
                tm, v = _bisect_gap_max(
                    model, t0[sub], x0[sub], a[sub], a[sub] + MARCH
                )
                crossing = v > 0
                if crossing.any():
                    cs = sub[crossing]
                    br_idx.append(cs)
                    br_lo.append(a[cs])
                    br_hi.append(tm[crossing])
                    active[cs] = False
                touch = (~crossing) & (v >= -TANGENCY_TOL)
                if touch.any():
                    ts = sub[touch]
                    fresh = ~touched[ts]
                    hit[ts[fresh]] = tm[touch][fresh]
                    touched[ts] = True
                    if not need_star:
                        active[ts] = False

        still = active[idx]
        a[idx[still]] = b[still]
        e_a[idx[still]] = e_b[still]
        de_a[idx[still]] = de_b[still]

    if active.any():
        bad = np.nonzero(active)[0]
        raise NoCrossing(
            f"no threshold crossing within {horizon} periods for "
            f"{bad.size} start(s), first at t0={t0[bad[0]]:.6g}"
        )

    if br_idx:
        sub = np.concatenate(br_idx)
        root = _bisect_gap_root(
            model, t0[sub], x0[sub], np.concatenate(br_lo), np.concatenate(br_hi)
        )
        star[sub] = root
        fresh = ~touched[sub]
        hit[sub[fresh]] = root[fresh]
    return hit, star, touched


def _hit_near(model, t0, x0, est, half=2e-3):
    """Refine a first-contact time from a trusted estimate (vectorized).

    Used only where a marched grid already localized the crossing; expands
    the bracket a few times if needed and falls back to a full march.
    """
    t0 = np.atleast_1d(np.asarray(t0, dtype=float))
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), t0.shape)
    est = np.atleast_1d(np.asarray(est, dtype=float))
    g = model.threshold
    lo = np.maximum(est - half, t0)
    hi = est + half
    for _ in range(4):
        bad_lo = (model.flow(lo, t0, x0) - g(lo)) >= 0
        lo = np.where(bad_lo, np.maximum(lo - half, t0), lo)
        bad_hi = (model.flow(hi, t0, x0) - g(hi)) < 0
        hi = np.where(bad_hi, hi + half, hi)
        if not (bad_lo.any() or bad_hi.any()):
            break
    else:
        h, _, _ = _first_contacts(model, t0, x0, need_star=False)
        return h
    return _bisect_gap_root(model, t0, x0, lo, hi)


# ---------------------------------------------------------------------------
# public single-start operations
# ---------------------------------------------------------------------------


def hit_time(model: SifModel, t0: float, x0: float | None = None) -> float:
    """First time the noise-free trajectory meets the threshold."""
    if x0 is None:
        x0 = float(model.reset(t0))
    h, _, _ = _first_contacts(model, t0, x0, need_star=False)
    return float(h[0])


def crossing_time(model: SifModel, t0: float, x0: float | None = None) -> float:
    """First strict up-crossing; differs from ``hit_time`` only when grazing."""
    if x0 is None:
        x0 = float(model.reset(t0))
    _, s, _ = _first_contacts(model, t0, x0, need_star=True)
    return float(s[0])


def _fprime(model, t0, f_t0):
    """Closed-form map derivative via implicit differentiation of the
    crossing identity flow(f(t0) | t0, h(t0)) = g(f(t0))."""
    h = model.reset
    m = model.slope_margin(f_t0)
    num = model.input(t0) - model.gamma * h(t0) - h.d1(t0)
    return np.exp(-model.gamma * (f_t0 - t0)) * num / m


def map_derivative(model: SifModel, t0: float, disc_phases=()) -> float:
    """Derivative of the firing map at a non-degenerate start phase."""
    for d in disc_phases:
        if circle_dist(t0, d) < 1e-6:
            raise AtDiscontinuity(f"t0={t0:.8g} is within 1e-6 of a discontinuity")
    f = hit_time(model, t0)
    if model.slope_margin(f) <= 1e-8:
        raise AtDiscontinuity(
            f"slope gap vanishes at the crossing from t0={t0:.8g}"
        )
    return float(_fprime(model, t0, f))


# ---------------------------------------------------------------------------
# report types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrbitRecord:
    phases: tuple          # iteration order, starting at the smallest phase
    period: int
    winding: int
    multiplier: float
    stable: bool

    def to_json(self):
        return {
            "phases": list(self.phases),
            "period": self.period,
            "winding": self.winding,
            "multiplier": self.multiplier,
            "stable": self.stable,
        }


@dataclass(frozen=True)
class DiscontinuityRecord:
    phase: float           # start phase t0 in [0, 1)
    f_at: float            # lifted first contact from t0 (the tangency)
    f_star_at: float       # lifted first strict crossing from t0
    kind: str              # "i" (f* = f) or "ii" (f* > f)

    @property
    def f_phase(self):
        return self.f_at % 1.0

    @property
    def f_star_phase(self):
        return self.f_star_at % 1.0

    def to_json(self):
        return {
            "phase": self.phase,
            "f": self.f_at,
            "f_star": self.f_star_at,
            "kind": self.kind,
        }


@dataclass
class ReturnMapReport:
    orbits: list
    discontinuities: list
    image_set: tuple        # E = f(D) union f*(D), as phases
    ell: int | None         # smallest l with the l-th preimage of D empty
    d1: bool
    d2: bool
    d3: bool
    cond_a: bool
    cond_a_value: float
    cond_b: bool
    cond_b_value: float
    notes: str = ""

    @property
    def stable_orbits(self):
        return [o for o in self.orbits if o.stable]

    @property
    def unstable_orbits(self):
        return [o for o in self.orbits if not o.stable and abs(o.multiplier) > 1]

    def to_json(self):
        return {
            "orbits": [o.to_json() for o in self.orbits],
            "discontinuities": [d.to_json() for d in self.discontinuities],
            "image_set": list(self.image_set),
            "ell": self.ell,
            "conditions": {
                "A": self.cond_a,
                "A_value": self.cond_a_value,
                "B": self.cond_b,
                "B_value": self.cond_b_value,
                "D1": self.d1,
                "D2": self.d2,
                "D3": self.d3,
            },
            "notes": self.notes,
        }


@dataclass(frozen=True)
class SpectrumEntry:
    value: complex
    orbit: int              # index into the report's orbit list
    power: int              # n in c^n (or the reciprocal family)
    root: int               # which of the period-many roots


@dataclass(frozen=True)
class LimitSpectrum:
    entries: tuple
    r_min: float

    @property
    def values(self):
        return np.array([e.value for e in self.entries])


# ---------------------------------------------------------------------------
# the return map
# ---------------------------------------------------------------------------


class ReturnMap:
    """Cached analysis of the firing map for one model."""

    def __init__(self, model: SifModel, grid_n: int = GRID_N):
        self.model = model
        self.grid_n = grid_n
        ok, val = model.mean_threshold_gap()
        if not ok:
            raise ConditionError(
                f"trajectories need not reach the threshold (margin {val:.3e})"
            )

    @cached_property
    def theta(self):
        return np.arange(self.grid_n + 1) / self.grid_n

    @cached_property
    def lift(self):
        """Lifted first-contact times from (theta, reset(theta))."""
        x0 = self.model.reset(self.theta)
        h, _, _ = _first_contacts(self.model, self.theta, x0, need_star=False)
        return h

    @cached_property
    def _jump_cells(self):
        d = np.diff(self.lift)
        slopes = d * self.grid_n
        lip = np.percentile(slopes, 90)
        return np.nonzero(d > max(10.0 * lip / self.grid_n, 1e-4))[0]

    def forward(self, phi):
        """Interpolated lifted map on [0, 1) plus integer equivariance."""
        phi = np.asarray(phi, dtype=float)
        base = np.floor(phi)
        return np.interp(phi - base, self.theta, self.lift) + base

    def forward_mod(self, phi):
        return np.mod(self.forward(np.mod(phi, 1.0)), 1.0)

    @cached_property
    def _monotone(self):
        return bool(np.all(np.diff(self.lift) > 0))

    def invert(self, y):
        """All preimages of the circle point y under the mod-1 map."""
        jump = set(self._jump_cells.tolist())
        y = float(y) % 1.0
        out = []
        lo = self.lift[0]
        # candidate lifts of y that the grid range can contain
        for n in range(int(math.floor(lo - y)), int(math.ceil(self.lift[-1] - y)) + 1):
            target = y + n
            if not (self.lift[0] <= target <= self.lift[-1]):
                continue
            if self._monotone:
                cells = [int(np.searchsorted(self.lift, target) - 1)]
            else:
                f0, f1 = self.lift[:-1], self.lift[1:]
                cells = np.nonzero(
                    ((f0 <= target) & (target <= f1))
                    | ((f1 <= target) & (target <= f0))
                )[0].tolist()
            for c in cells:
                if c < 0 or c >= self.grid_n or c in jump:
                    continue
                a, b = self.lift[c], self.lift[c + 1]
                if a == b:
                    continue
                th = self.theta[c] + (target - a) / (b - a) / self.grid_n
                out.append(th % 1.0)
        # merge duplicates from adjacent cells
        out.sort()
        merged = []
        for th in out:
            if not merged or circle_dist(th, merged[-1]) > 1e-9:
                merged.append(th)
        return merged

    # -- discontinuities ----------------------------------------------------

    @cached_property
    def discontinuities(self):
        model = self.model
        out = []
        cells = self._jump_cells
        if cells.size == 0:
            return out
        # merge consecutive flagged cells into clusters around one jump
        groups = np.split(cells, np.nonzero(np.diff(cells) > 1)[0] + 1)
        for grp in groups:
            j0, j1 = grp[0], grp[-1] + 1
            lo, hi = self.theta[j0], self.theta[j1]
            fl, fr = self.lift[j0], self.lift[j1]
            mu = 0.5 * (fl + fr)
            for _ in range(44):
                mid = 0.5 * (lo + hi)
                if self._crosses_before(mid, fl, mu):
                    lo = mid
                else:
                    hi = mid
            t0 = 0.5 * (lo + hi)
            x0 = float(model.reset(t0))
            # the touch is the well-conditioned local max of the gap near fl
            tm, _ = _bisect_gap_max(
                model,
                np.array([t0]),
                np.array([x0]),
                np.array([max(fl - 0.06, t0 + 1e-9)]),
                np.array([fl + 0.06]),
            )
            f_at = float(tm[0])
            # first crossing past the touch: march from the right endpoint
            _, s, _ = _first_contacts(model, hi, float(model.reset(hi)))
            f_star = float(s[0])
            kind = "ii" if f_star - f_at > _DISC_MIN_GAP else "i"
            if kind == "ii":
                tt = np.linspace(f_at, f_star, 66)[1:-1]
                gap = model.flow(tt, t0, x0) - model.threshold(tt)
                if not np.all(gap < 0):
                    kind = "i"
            out.append(DiscontinuityRecord(t0 % 1.0, f_at, f_star, kind))
        return out

    def _crosses_before(self, t0, f_left, mu):
        """Does the trajectory from t0 cross the threshold before time mu?

        Only a window around the left-branch contact needs scanning: the
        marched grid already certifies the gap is negative elsewhere.
        """
        model = self.model
        x0 = float(model.reset(t0))
        lo = max(f_left - 0.06, t0 + 1e-12)
        hi = min(f_left + 0.06, mu)
        tt = np.linspace(lo, hi, 256)
        gap = model.flow(tt, t0, x0) - model.threshold(tt)
        j = int(np.argmax(gap))
        if gap[j] > 0:
            return True
        a = tt[max(j - 1, 0)]
        b = tt[min(j + 1, len(tt) - 1)]
        tm, v = _bisect_gap_max(
            model, np.array([t0]), np.array([x0]), np.array([a]), np.array([b])
        )
        return bool(v[0] > 0)

    @property
    def disc_phases(self):
        return [d.phase for d in self.discontinuities]

    # -- orbits ---------------------------------------------------------------

    def _exact_step(self, phi):
        """One exact application of the lifted map, vectorized."""
        est = self.forward(phi)
        return _hit_near(self.model, phi, self.model.reset(phi), est)

    def _polish_orbit(self, phi, kappa):
        """Newton on f^kappa(theta) - theta - n using the exact map."""
        phi = float(phi) % 1.0
        winding = None
        for _ in range(12):
            pts = [phi]
            dprod = 1.0
            t = phi
            for _ in range(kappa):
                tn = float(self._exact_step(np.array([t]))[0])
                dprod *= float(_fprime(self.model, t, tn))
                t = tn
                pts.append(t)
            if winding is None:
                winding = int(round(t - phi))
            resid = t - phi - winding
            if abs(dprod - 1.0) < 1e-9:
                break  # neutral orbit: accept the grid estimate
            step = resid / (dprod - 1.0)
            phi = (phi - step) % 1.0
            if abs(step) < 1e-13:
                break
        return phi, winding, dprod, pts[:-1], abs(resid)

    def find_orbits(self, max_period=8, seeds=256, max_iter=2000, tol=1e-9):
        """Stable orbits by forward iteration, unstable ones by inverse
        iteration, both on the grid map, then polished against the exact map."""
        cands = self._iterate_candidates(
            self.forward_mod, max_period, seeds, max_iter, tol
        )
        if self._monotone:
            inv = self._grid_inverse_fn()
            cands += self._iterate_candidates(inv, max_period, seeds, max_iter, tol)

        # collapse the seed cloud to one representative per orbit before the
        # (comparatively expensive) exact-map polish
        reps = []
        seen = set()
        for phi, kappa in cands:
            kappa = self._minimal_period(phi, kappa)
            pts = [phi]
            for _ in range(kappa - 1):
                pts.append(float(self.forward_mod(pts[-1])))
            key = (kappa, tuple(sorted(np.round(np.mod(pts, 1.0), 4) % 1.0)))
            if key in seen:
                continue
            seen.add(key)
            reps.append((phi, kappa))

        records = {}
        for phi, kappa in reps:
            phi_p, winding, mult, pts, resid = self._polish_orbit(phi, kappa)
            if resid > 1e-8:
                continue
            key = tuple(sorted(np.round(np.mod(pts, 1.0), 6)))
            if key in records:
                continue
            start = int(np.argmin(np.mod(pts, 1.0)))
            ordered = tuple(float(p % 1.0) for p in pts[start:] + pts[:start])
            records[key] = OrbitRecord(
                phases=ordered,
                period=kappa,
                winding=winding,
                multiplier=float(mult),
                stable=abs(mult) < 1.0,
            )
        return sorted(records.values(), key=lambda o: (o.period, o.phases))

    def _iterate_candidates(self, step_fn, max_period, seeds, max_iter, tol):
        phi = (np.arange(seeds) + 0.5) / seeds
        alive = np.ones(seeds, dtype=bool)
        done = np.zeros(seeds, dtype=bool)
        hist = np.full((max_period, seeds), np.nan)
        found = []
        for k in range(max_iter):
            phi = step_fn(phi)
            bad = ~np.isfinite(phi)
            if bad.any():
                alive &= ~bad
                phi = np.where(bad, 0.0, phi)
            for kappa in range(1, max_period + 1):
                if k < kappa:
                    break
                ref = hist[(k - kappa) % max_period]
                match = alive & ~done & (circle_dist(phi, ref) < tol)
                if match.any():
                    for i in np.nonzero(match)[0]:
                        found.append((float(phi[i]), kappa))
                    done |= match
            hist[k % max_period] = phi
            if not (alive & ~done).any():
                break
        return found

    def _grid_inverse_fn(self):
        jump = np.zeros(self.grid_n, dtype=bool)
        jump[self._jump_cells] = True
        lift = self.lift
        theta = self.theta
        n0 = lift[0]

        def inv(phi):
            phi = np.asarray(phi, dtype=float)
            target = phi + np.ceil(n0 - phi)
            target = np.where(target > lift[-1], target - 1.0, target)
            cell = np.clip(np.searchsorted(lift, target) - 1, 0, self.grid_n - 1)
            dead = jump[cell]
            a = lift[cell]
            b = lift[np.minimum(cell + 1, self.grid_n)]
            th = theta[cell] + (target - a) / np.maximum(b - a, 1e-300) / self.grid_n
            return np.where(dead, np.nan, np.mod(th, 1.0))

        return inv

    def _minimal_period(self, phi, kappa):
        for d in range(1, kappa):
            if kappa % d == 0:
                t = phi
                for _ in range(d):
                    t = float(self.forward_mod(t))
                if circle_dist(t, phi) < 1e-6:
                    return d
        return kappa

    # -- conditions (D1)-(D3) -------------------------------------------------

    def check_d_conditions(self, orbits, ell_cap=8, seeds=512, max_iter=5000):
        """Flags for the discontinuous-case spectrum theorem."""
        discs = self.discontinuities
        d_phases = [d.phase for d in discs]
        stable = [o for o in orbits if o.stable]
        notes = []

        def away_from_d(o):
            return not d_phases or all(
                min(circle_dist(p, d) for d in d_phases) > 1e-6 for p in o.phases
            )

        d1_orbits = [o for o in stable if away_from_d(o)]
        d1 = bool(d1_orbits)

        # D2: every seed must settle on one and the same stable orbit
        d2 = False
        principal = None
        if d1_orbits:
            phi = (np.arange(seeds) + 0.5) / seeds
            targets = [np.array(o.phases) for o in d1_orbits]
            owner = np.full(seeds, -1)
            for _ in range(max_iter):
                phi = self.forward_mod(phi)
                pending = owner < 0
                if not pending.any():
                    break
                for i, pts in enumerate(targets):
                    dmin = circle_dist(phi[:, None], pts[None, :]).min(axis=1)
                    hit_mask = pending & (dmin < 1e-6)
                    owner[hit_mask] = i
                    pending &= ~hit_mask
            if (owner >= 0).all() and np.unique(owner).size == 1:
                d2 = True
                principal = d1_orbits[int(owner[0])]
            elif (owner >= 0).all():
                notes.append("seeds split between several stable orbits")
            else:
                notes.append(f"{int((owner < 0).sum())} seeds did not settle")

        # D3: some preimage of D is empty and E stays off D on the way
        image_set = []
        for d in discs:
            for p in (d.f_phase, d.f_star_phase):
                if not image_set or min(circle_dist(p, q) for q in image_set) > 1e-7:
                    image_set.append(p)
        ell = None
        d3 = True
        if discs:
            current = list(d_phases)
            for level in range(1, ell_cap + 1):
                nxt = []
                for y in current:
                    nxt.extend(self.invert(y))
                if not nxt:
                    ell = level
                    break
                current = nxt
            d3 = ell is not None
            if not d3:
                notes.append(f"no empty preimage of D up to level {ell_cap}")
            else:
                pts = np.array(image_set)
                for i in range(ell):
                    if d_phases and np.min(
                        circle_dist(pts[:, None], np.array(d_phases)[None, :])
                    ) < 1e-6:
                        d3 = False
                        notes.append("forward images of E meet D")
                        break
                    pts = self.forward_mod(pts)
        else:
            ell = 0

        return d1, d2, d3, ell, tuple(image_set), principal, "; ".join(notes)

    def map_derivative(self, t0):
        for d in self.disc_phases:
            if circle_dist(t0, d) < 1e-6:
                raise AtDiscontinuity(
                    f"t0={t0:.8g} is within 1e-6 of a discontinuity"
                )
        return map_derivative(self.model, t0)


# ---------------------------------------------------------------------------
# module-level analysis entry points
# ---------------------------------------------------------------------------


def find_orbits(model: SifModel, max_period: int = 8):
    return ReturnMap(model).find_orbits(max_period=max_period)


def find_discontinuities(model: SifModel):
    return ReturnMap(model).discontinuities


def check_D_conditions(report: ReturnMapReport, model: SifModel, ell_cap: int = 8):
    rm = ReturnMap(model)
    d1, d2, d3, ell, image, _, notes = rm.check_d_conditions(
        report.orbits, ell_cap=ell_cap
    )
    report.d1, report.d2, report.d3, report.ell = d1, d2, d3, ell
    report.image_set = image
    report.notes = notes
    return d1, d2, d3


def analyze(model: SifModel, max_period: int = 8, ell_cap: int = 8) -> ReturnMapReport:
    """Full deterministic-map report: conditions, orbits, discontinuities."""
    cond_a, a_val = model.mean_threshold_gap()
    if not cond_a:
        raise ConditionError(
            f"mean flow never exceeds the threshold (margin {a_val:.3e})"
        )
    cond_b, b_val, _ = model.check_transversality()
    rm = ReturnMap(model)
    orbits = rm.find_orbits(max_period=max_period)
    d1, d2, d3, ell, image, _, notes = rm.check_d_conditions(orbits, ell_cap=ell_cap)
    return ReturnMapReport(
        orbits=orbits,
        discontinuities=rm.discontinuities,
        image_set=image,
        ell=ell,
        d1=d1,
        d2=d2,
        d3=d3,
        cond_a=cond_a,
        cond_a_value=a_val,
        cond_b=cond_b,
        cond_b_value=b_val,
        notes=notes,
    )


def predict_spectrum(
    report: ReturnMapReport, r_min: float = 0.02, max_power: int = 200
) -> LimitSpectrum:
    """Predicted small-noise eigenvalues of the phase transition operator.

    Stable orbits contribute every period-th root of c^n; unstable orbits
    (continuous maps only) contribute the roots of |c|^(-1) c^(-n).  Entries
    stop below the modulus floor ``r_min``.
    """
    stable = report.stable_orbits
    if not stable:
        raise PredictionInvalid("no stable periodic orbit located")
    if report.discontinuities:
        if not (report.d1 and report.d2 and report.d3):
            raise PredictionInvalid(
                "discontinuous map without verified (D1)-(D3): "
                f"D1={report.d1} D2={report.d2} D3={report.d3}"
            )
        families = [(report.orbits.index(o), o, False) for o in stable]
    else:
        if not report.cond_a:
            raise PredictionInvalid("condition (A) fails")
        families = [(report.orbits.index(o), o, False) for o in stable]
        families += [
            (report.orbits.index(o), o, True) for o in report.unstable_orbits
        ]

    entries = []
    for oi, orb, reciprocal in families:
        c = orb.multiplier
        kappa = orb.period
        for n in range(max_power + 1):
            if reciprocal:
                base = abs(c) ** (-1.0) * (1.0 / c) ** n
            else:
                base = c ** n
            rho = abs(base) ** (1.0 / kappa)
            if rho < r_min:
                break
            ang0 = math.atan2(0.0, base)  # 0 or pi
            for r in range(kappa):
                ang = (ang0 + 2.0 * math.pi * r) / kappa
                entries.append(
                    SpectrumEntry(
                        value=complex(rho * math.cos(ang), rho * math.sin(ang)),
                        orbit=oi,
                        power=n,
                        root=r,
                    )
                )
            if base == 0.0:
                break

    # drop duplicates (e.g. +-1 arising from several families)
    uniq = {}
    for e in entries:
        key = (round(e.value.real, 12), round(e.value.imag, 12))
        uniq.setdefault(key, e)
    ordered = sorted(
        uniq.values(),
        key=lambda e: (-abs(e.value), math.atan2(e.value.imag, e.value.real) % (2 * math.pi)),
    )
    return LimitSpectrum(entries=tuple(ordered), r_min=r_min)
