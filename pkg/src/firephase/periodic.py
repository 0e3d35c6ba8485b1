"""Period-1 forcing functions: constants, sinusoids and finite Fourier series.

Everything in the model (input, threshold, reset) is one of these.  All
variants expose the value and its first two derivatives, convert to a common
cosine/sine harmonic representation, and support the two linear-filter
operations the flow solver needs in closed form:

* ``lowpass(f, gamma)`` -- the unique period-1 solution of
  ``y' = -gamma*y + f(t)`` for ``gamma > 0``;
* ``harmonic_antiderivative(f)`` -- the period-1 antiderivative of the
  zero-mean part of ``f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * math.pi

# Closed-form flow integrals stay cheap only while the harmonic count is
# small; refuse silly series instead of silently degrading.
MAX_HARMONICS = 64

_TRIM = 1e-15


class PeriodicFn:
    """A real function with period 1 on the line."""

    def __call__(self, t):
        raise NotImplementedError

    def d1(self, t):
        raise NotImplementedError

    def d2(self, t):
        raise NotImplementedError

    def harmonics(self) -> tuple[float, np.ndarray]:
        """Return ``(a0, coeffs)`` with ``coeffs[m-1] = (cos_m, sin_m)``."""
        raise NotImplementedError

    def mean(self) -> float:
        return self.harmonics()[0]

    def __sub__(self, other):
        a0, ca = self.harmonics()
        b0, cb = other.harmonics()
        m = max(len(ca), len(cb))
        out = np.zeros((m, 2))
        out[: len(ca)] += ca
        out[: len(cb)] -= cb
        return from_harmonics(a0 - b0, out)

    def shifted(self, delta: float):
        """This function plus a constant."""
        a0, c = self.harmonics()
        return from_harmonics(a0 + delta, c)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(PeriodicFn):
    value: float

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.value)

    def d1(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    d2 = d1

    def harmonics(self):
        return float(self.value), np.zeros((0, 2))

    def to_json(self):
        return {"type": "constant", "value": float(self.value)}


@dataclass(frozen=True)
class Sinusoid(PeriodicFn):
    """``offset + amplitude * sin(2*pi*t + phase)``."""

    offset: float
    amplitude: float
    phase: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.offset + self.amplitude * np.sin(TWO_PI * t + self.phase)

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        return TWO_PI * self.amplitude * np.cos(TWO_PI * t + self.phase)

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        return -(TWO_PI ** 2) * self.amplitude * np.sin(TWO_PI * t + self.phase)

    def harmonics(self):
        # a*sin(x + p) = a*sin(p)*cos(x) + a*cos(p)*sin(x)
        c = self.amplitude * math.sin(self.phase)
        s = self.amplitude * math.cos(self.phase)
        return float(self.offset), np.array([[c, s]])

    def to_json(self):
        return {
            "type": "sinusoid",
            "offset": float(self.offset),
            "amplitude": float(self.amplitude),
            "phase": float(self.phase),
        }


@dataclass(frozen=True)
class FiniteFourier(PeriodicFn):
    """``a0 + sum_m cos_m*cos(2*pi*m*t) + sin_m*sin(2*pi*m*t)``."""

    a0: float
    coeffs: tuple  # ((cos_1, sin_1), (cos_2, sin_2), ...)

    def __post_init__(self):
        if len(self.coeffs) > MAX_HARMONICS:
            raise ConfigError(
                f"finite Fourier series capped at {MAX_HARMONICS} harmonics"
            )

    def _basis(self, t):
        t = np.asarray(t, dtype=float)
        m = np.arange(1, len(self.coeffs) + 1)
        ang = TWO_PI * np.multiply.outer(t, m)
        return m, np.cos(ang), np.sin(ang)

    def __call__(self, t):
        c = np.asarray(self.coeffs, dtype=float)
        m, cos, sin = self._basis(t)
        return self.a0 + cos @ c[:, 0] + sin @ c[:, 1]

    def d1(self, t):
        c = np.asarray(self.coeffs, dtype=float)
        m, cos, sin = self._basis(t)
        w = TWO_PI * m
        return cos @ (w * c[:, 1]) - sin @ (w * c[:, 0])

    def d2(self, t):
        c = np.asarray(self.coeffs, dtype=float)
        m, cos, sin = self._basis(t)
        w2 = (TWO_PI * m) ** 2
        return -(cos @ (w2 * c[:, 0])) - sin @ (w2 * c[:, 1])

    def harmonics(self):
        return float(self.a0), np.asarray(self.coeffs, dtype=float).reshape(-1, 2)

    def to_json(self):
        return {
            "type": "fourier",
            "a0": float(self.a0),
            "harmonics": [[float(c), float(s)] for c, s in self.coeffs],
        }


def from_harmonics(a0: float, coeffs) -> PeriodicFn:
    """Build the simplest variant representing the given harmonic data."""
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1, 2)
    scale = max(1.0, abs(a0), float(np.abs(coeffs).max()) if coeffs.size else 0.0)
    keep = np.abs(coeffs).max(axis=1) > _TRIM * scale if coeffs.size else np.array([], bool)
    last = int(np.nonzero(keep)[0][-1]) + 1 if keep.any() else 0
    coeffs = coeffs[:last]
    if last == 0:
        return Constant(float(a0))
    if last == 1:
        c, s = coeffs[0]
        return Sinusoid(float(a0), float(math.hypot(c, s)), float(math.atan2(c, s)))
    return FiniteFourier(float(a0), tuple(map(tuple, coeffs)))


def lowpass(f: PeriodicFn, gamma: float) -> PeriodicFn:
    """Periodic solution of ``y' = -gamma*y + f(t)`` (requires gamma > 0).

    Per harmonic ``z*exp(2*pi*i*m*t)`` the response is ``z/(gamma + 2*pi*i*m)``.
    """
    if gamma <= 0:
        raise ValueError("lowpass requires gamma > 0")
    a0, coeffs = f.harmonics()
    out = np.zeros_like(coeffs)
    for i, (c, s) in enumerate(coeffs):
        z = complex(c, -s) / complex(gamma, TWO_PI * (i + 1))
        out[i] = (z.real, -z.imag)
    return from_harmonics(a0 / gamma, out)


def harmonic_antiderivative(f: PeriodicFn) -> PeriodicFn:
    """Period-1 antiderivative of ``f - mean(f)`` (zero constant term)."""
    _, coeffs = f.harmonics()
    out = np.zeros_like(coeffs)
    for i, (c, s) in enumerate(coeffs):
        w = TWO_PI * (i + 1)
        out[i] = (-s / w, c / w)
    return from_harmonics(0.0, out)


def fn_from_json(doc: dict) -> PeriodicFn:
    try:
        kind = doc["type"]
        if kind == "constant":
            return Constant(float(doc["value"]))
        if kind == "sinusoid":
            return Sinusoid(
                float(doc["offset"]),
                float(doc["amplitude"]),
                float(doc.get("phase", 0.0)),
            )
        if kind == "fourier":
            return FiniteFourier(
                float(doc["a0"]),
                tuple((float(c), float(s)) for c, s in doc["harmonics"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad periodic-function document: {exc}") from exc
    raise ConfigError(f"unknown periodic-function type {kind!r}")
