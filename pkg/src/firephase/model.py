"""The oscillator model: leaky drift, periodic input, threshold and reset.

The membrane state follows ``dX = (-gamma*X + I(t)) dt + eps dW`` between
firings, fires on contact with the threshold ``g(t)`` and restarts from the
reset level ``h(t)``.  All three forcing functions have period 1.  The class
is immutable; every derived quantity is a pure function of the field values,
so instances are safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import periodic
from .errors import ConditionError, ConfigError
from .periodic import Constant, PeriodicFn

CONDITION_GRID = 1001
_VALIDATE_GRID = 2048

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_max(fn, lo, hi, iters=60):
    """Golden-section refinement of a maximum bracketed by [lo, hi]."""
    a, b = float(lo), float(hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def _refined_extremum(fn, sign=1.0, n=CONDITION_GRID):
    """Grid scan plus golden-section polish of max(sign*fn) over one period."""
    t = np.linspace(0.0, 1.0, n)
    v = sign * np.asarray(fn(t), dtype=float)
    j = int(np.argmax(v))
    lo, hi = t[max(j - 1, 0)], t[min(j + 1, n - 1)]
    x, fx = golden_max(lambda s: sign * fn(s), lo, hi)
    if v[j] > fx:
        return t[j], sign * v[j]
    return x, sign * fx


@dataclass(frozen=True)
class ConditionReport:
    """Structural conditions on the noise-free crossings.

    ``cond_a`` -- trajectories from below always reach the threshold;
    ``cond_b`` -- every crossing is transversal;
    ``cond_b_prime`` -- transversal except at finitely many start phases
    (the tangency set, filled in by the map analysis).
    """

    cond_a: bool
    cond_a_value: float
    cond_b: bool
    cond_b_value: float
    cond_b_prime: bool | None = None
    tangencies: tuple = ()
    notes: str = ""


@dataclass(frozen=True)
class SifModel:
    gamma: float
    eps: float
    input: PeriodicFn
    threshold: PeriodicFn
    reset: PeriodicFn

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigError("leak rate gamma must be >= 0")
        if self.eps < 0:
            raise ConfigError("noise intensity eps must be >= 0")
        t = np.linspace(0.0, 1.0, _VALIDATE_GRID, endpoint=False)
        gap = self.threshold(t) - self.reset(t)
        if not np.all(gap > 0):
            raise ConditionError(
                f"reset must stay strictly below threshold (min gap {gap.min():.3e})"
            )

    # -- deterministic flow -------------------------------------------------

    @cached_property
    def _mean_flow(self) -> PeriodicFn:
        # periodic solution of xi' = -gamma*xi + I(t); only for gamma > 0
        return periodic.lowpass(self.input, self.gamma)

    @cached_property
    def _input_anti(self) -> PeriodicFn:
        return periodic.harmonic_antiderivative(self.input)

    def flow(self, t, t0, x0):
        """Noise-free solution through (t0, x0), evaluated at t (broadcasts)."""
        t = np.asarray(t, dtype=float)
        if self.gamma > 0:
            xb = self._mean_flow
            val = xb(t) + np.exp(-self.gamma * (t - t0)) * (x0 - xb(t0))
            return np.where(t == t0, x0, val)  # exact at the anchor
        a0 = self.input.mean()
        anti = self._input_anti
        return x0 + a0 * (t - t0) + anti(t) - anti(t0)

    def flow_dt(self, t, t0, x0):
        """Time derivative of the noise-free solution."""
        return -self.gamma * self.flow(t, t0, x0) + self.input(t)

    def mean_flow(self, t):
        """Long-run periodic trajectory (gamma > 0 only)."""
        if self.gamma <= 0:
            raise ValueError("mean flow requires gamma > 0")
        return self._mean_flow(np.asarray(t, dtype=float))

    def sigma2(self, t, t0):
        """Accumulated noise variance factor between t0 and t (eps factored out)."""
        dt = np.asarray(t, dtype=float) - t0
        if self.gamma > 0:
            return -np.expm1(-2.0 * self.gamma * dt) / (2.0 * self.gamma)
        return dt

    # -- conditions ----------------------------------------------------------

    def mean_threshold_gap(self):
        """Max of (mean flow - threshold), or the mean input when gamma = 0.

        Positive means every start below the threshold eventually fires.
        """
        if self.gamma == 0:
            v = self.input.mean()
            return bool(v > 0), float(v)
        g = self.threshold
        _, v = _refined_extremum(lambda s: self._mean_flow(s) - g(s))
        return bool(v > 0), float(v)

    def slope_margin(self, t):
        """-gamma*g(t) + I(t) - g'(t); positive everywhere means transversality."""
        t = np.asarray(t, dtype=float)
        g = self.threshold
        return -self.gamma * g(t) + self.input(t) - g.d1(t)

    def check_transversality(self):
        """Grid minimum of the slope margin, cross-checked against the
        closed form available for constant input and sinusoidal threshold."""
        _, neg = _refined_extremum(lambda s: -self.slope_margin(s))
        vmin = -neg
        ok = bool(vmin > 0)
        closed = self._transversality_closed_form()
        if closed is not None and abs(closed) > 1e-9 and (closed > 0) != ok:
            raise AssertionError(
                f"transversality routes disagree: grid min {vmin:.6g}, "
                f"closed-form margin {closed:.6g}"
            )
        return ok, float(vmin), closed

    def _transversality_closed_form(self):
        # I - gamma*a > |b|*sqrt(gamma^2 + 4*pi^2) for g = a + b*sin(2*pi*t + p)
        if not isinstance(self.input, Constant):
            return None
        a0, coeffs = self.threshold.harmonics()
        if len(coeffs) > 1:
            return None
        amp = float(np.hypot(*coeffs[0])) if len(coeffs) else 0.0
        bound = amp * np.hypot(self.gamma, periodic.TWO_PI)
        return float(self.input.value - self.gamma * a0 - bound)

    # -- constant-input reduction ---------------------------------------------

    def input_shift(self, target: float | None = None) -> PeriodicFn:
        """The drift correction k with k' = -gamma*k + (I(t) - target).

        Subtracting k from state, threshold and reset leaves the firing law
        unchanged while making the input constant.  For gamma > 0 the periodic
        solution is used; for gamma = 0 a periodic k exists only when the
        target equals the mean input, and is anchored at k(0) = 0.
        """
        mean = self.input.mean()
        if target is None:
            target = mean
        if self.gamma > 0:
            return periodic.lowpass(self.input.shifted(-target), self.gamma)
        if abs(target - mean) > 1e-12 * max(1.0, abs(mean)):
            raise ValueError(
                "gamma = 0 reduction needs target equal to the mean input; "
                "anything else leaves a secular drift no periodic threshold "
                "can express"
            )
        anti = self._input_anti
        return anti.shifted(-float(anti(0.0)))

    def reduce_to_constant_input(self, target: float | None = None) -> "SifModel":
        """Equivalent model with constant input (same firing-time law)."""
        if isinstance(self.input, Constant) and (
            target is None or target == self.input.value
        ):
            return self
        if target is None:
            target = self.input.mean()
        k = self.input_shift(target)
        return replace(
            self,
            input=Constant(float(target)),
            threshold=self.threshold - k,
            reset=self.reset - k,
        )

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "gamma": float(self.gamma),
            "eps": float(self.eps),
            "input": self.input.to_json(),
            "threshold": self.threshold.to_json(),
            "reset": self.reset.to_json(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def model_from_json(doc: dict) -> SifModel:
    try:
        return SifModel(
            gamma=float(doc["gamma"]),
            eps=float(doc["eps"]),
            input=periodic.fn_from_json(doc["input"]),
            threshold=periodic.fn_from_json(doc["threshold"]),
            reset=periodic.fn_from_json(doc["reset"]),
        )
    except KeyError as exc:
        raise ConfigError(f"model document missing field {exc}") from exc


def model_loads(text: str) -> SifModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model JSON at line {exc.lineno}, col {exc.colno}: {exc.msg}") from exc
    return model_from_json(doc)
