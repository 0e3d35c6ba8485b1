"""Dense real nonsymmetric eigenvalue solver.

Balancing (radix-2 diagonal similarity), Householder reduction to upper
Hessenberg form, then Francis implicit double-shift QR with deflation.
Eigenvalues only: the spectral analysis never needs vectors, which halves
the work and the storage.  Complex eigenvalues come out of trailing 2x2
blocks in exactly conjugate pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence

DEFLATION_U = 1e-14
MAX_N = 1024
SWEEP_CAP_PER_N = 30
EXCEPTIONAL_EVERY = 10


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray      # complex, length n
    iterations: int         # total QR sweeps
    converged: bool


def _validated(a) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"need a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    if m.shape[0] > MAX_N:
        raise ValueError(f"dense solver capped at n={MAX_N}")
    return m


def balance(a):
    """Diagonal similarity (powers of 2) equalizing row/column 1-norms.

    Returns the balanced matrix and the scale vector; eigenvalues are
    untouched because the transform is an exact similarity.
    """
    A = _validated(a)
    n = A.shape[0]
    scale = np.ones(n)
    radix = 2.0
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.abs(A[:, i]).sum() - abs(A[i, i])
            r = np.abs(A[i, :]).sum() - abs(A[i, i])
            if c == 0.0 or r == 0.0:
                continue
            f = 1.0
            s = c + r
            while c < r / radix:
                f *= radix
                c *= radix * radix
            while c > r * radix:
                f /= radix
                c /= radix * radix
            if (c + r) / f < 0.95 * s:
                done = False
                scale[i] *= f
                A[i, :] /= f
                A[:, i] *= f
    return A, scale


def hessenberg(a):
    """Householder reduction to upper Hessenberg form (similarity)."""
    H = _validated(a)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k]
        norm = np.sqrt(np.dot(x, x))
        if norm == 0.0 or np.all(x[1:] == 0.0):
            continue
        alpha = -np.copysign(norm, x[0]) if x[0] != 0 else -norm
        v = x.copy()
        v[0] -= alpha
        beta = 2.0 / np.dot(v, v)
        H[k + 1:, k:] -= beta * np.outer(v, v @ H[k + 1:, k:])
        H[:, k + 1:] -= beta * np.outer(H[:, k + 1:] @ v, v)
        H[k + 1, k] = alpha
        H[k + 2:, k] = 0.0
    return H


def _eig2(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]], conjugate pair when complex."""
    p = 0.5 * (a + d)
    z = 0.25 * (a - d) ** 2 + b * c
    if z >= 0.0:
        sq = np.sqrt(z)
        l1 = p + sq if p >= 0 else p - sq
        det = a * d - b * c
        l2 = det / l1 if l1 != 0.0 else 0.0
        return complex(l1), complex(l2)
    sq = np.sqrt(-z)
    return complex(p, sq), complex(p, -sq)


def eigenvalues(a, sweep_cap_per_n: int = SWEEP_CAP_PER_N) -> Spectrum:
    """Full complex spectrum of a real square matrix."""
    A = _validated(a)
    n = A.shape[0]
    if n == 0:
        return Spectrum(np.zeros(0, dtype=complex), 0, True)
    H, _ = balance(A)
    H = hessenberg(H)

    vals = np.zeros(n, dtype=complex)
    sweeps = 0
    cap = sweep_cap_per_n * n
    en = n - 1
    stall = 0
    while en >= 0:
        # deflation scan for the active block ending at row en
        l = en
        while l > 0:
            s = abs(H[l - 1, l - 1]) + abs(H[l, l])
            if s == 0.0:
                s = 1.0
            if abs(H[l, l - 1]) <= DEFLATION_U * s:
                H[l, l - 1] = 0.0
                break
            l -= 1
        if l == en:
            vals[en] = H[en, en]
            en -= 1
            stall = 0
            continue
        if l == en - 1:
            vals[en - 1], vals[en] = _eig2(
                H[en - 1, en - 1], H[en - 1, en], H[en, en - 1], H[en, en]
            )
            en -= 2
            stall = 0
            continue

        sweeps += 1
        stall += 1
        if sweeps > cap:
            raise NoConvergence(
                f"QR stalled after {sweeps} sweeps with {en + 1} values left",
                partial=vals[en + 1:].copy(),
            )
        if stall % EXCEPTIONAL_EVERY == 0:
            # ad-hoc equal shifts to break cycling
            s_exc = abs(H[en, en - 1])
            if en - 2 >= l:
                s_exc += abs(H[en - 1, en - 2])
            sigma = H[en, en] + 0.75 * s_exc
            shift_sum = 2.0 * sigma
            shift_prod = sigma * sigma
        else:
            x = H[en, en]
            y = H[en - 1, en - 1]
            w = H[en, en - 1] * H[en - 1, en]
            shift_sum = x + y
            shift_prod = x * y - w

        # first column of (H - s1)(H - s2) on the active block
        p = H[l, l] * (H[l, l] - shift_sum) + H[l, l + 1] * H[l + 1, l] + shift_prod
        q = H[l + 1, l] * (H[l, l] + H[l + 1, l + 1] - shift_sum)
        r = H[l + 1, l] * H[l + 2, l + 1]

        for k in range(l, en):
            if k > l:
                p = H[k, k - 1]
                q = H[k + 1, k - 1]
                r = H[k + 2, k - 1] if k + 2 <= en else 0.0
            three = k + 2 <= en
            v = np.array([p, q, r] if three else [p, q])
            amax = np.abs(v).max()
            if amax == 0.0:
                continue
            v = v / amax
            norm = np.sqrt(np.dot(v, v))
            alpha = -np.copysign(norm, v[0]) if v[0] != 0 else -norm
            v[0] -= alpha
            vv = np.dot(v, v)
            if vv == 0.0:
                continue
            beta = 2.0 / vv
            rows = slice(k, k + 3 if three else k + 2)
            H[rows, k:en + 1] -= beta * np.outer(v, v @ H[rows, k:en + 1])
            top = min(en, k + 3)
            H[l:top + 1, rows] -= beta * np.outer(H[l:top + 1, rows] @ v, v)
            if k > l:
                H[k, k - 1] = alpha * amax
                H[k + 1, k - 1] = 0.0
                if three:
                    H[k + 2, k - 1] = 0.0

    return Spectrum(vals, sweeps, True)


def lu_det(a) -> float:
    """Determinant via LU with partial pivoting (for spectrum identities)."""
    A = _validated(a)
    n = A.shape[0]
    sign = 1.0
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if A[p, k] == 0.0:
            return 0.0
        if p != k:
            A[[k, p]] = A[[p, k]]
            sign = -sign
        A[k + 1:, k] /= A[k, k]
        A[k + 1:, k + 1:] -= np.outer(A[k + 1:, k], A[k, k + 1:])
    return float(sign * np.prod(np.diag(A)))
