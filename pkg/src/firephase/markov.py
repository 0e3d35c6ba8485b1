"""Discretized transition operator of the firing-phase chain.

Row i holds the distribution of the next firing phase given the previous
firing happened at the cell midpoint ``theta_i = (i + 1/2)/n``: the passage
density from ``(theta_i, reset(theta_i))`` is solved, wrapped onto the
circle, and integrated over cells via cumulative differences (exact mass
bookkeeping, no midpoint sampling).  Rows are independent solves, so the
build is data-parallel; assembly order is fixed by row index either way.
"""

from __future__ import annotations

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import eigen, fptd
from .detmap import _first_contacts
from .errors import NoConvergence
from .model import SifModel

ROW_DEFICIT_TOL = 1e-6

# rows are cell-integrated and renormalized, so 10 points per density
# sigma is enough; the solver still refines any row that misses the
# mass-deficit target
ROW_STEP_DIVISOR = 10.0


@dataclass
class TransitionMatrix:
    n: int
    entries: np.ndarray            # row-stochastic after normalization
    row_mass_deficits: np.ndarray  # 1 - sum(row) before normalization

    @property
    def grid_points(self):
        return (np.arange(self.n) + 0.5) / self.n


@dataclass
class SpectrumReport:
    computed: np.ndarray       # complex, modulus-descending
    predicted: np.ndarray      # complex, modulus-descending
    pairs: list                # (computed, predicted, residual) per prediction
    eps: float
    n: int

    def residual_for(self, target: complex) -> float:
        """Residual of the prediction nearest to ``target``."""
        k = int(np.argmin(np.abs(self.predicted - target)))
        return float(self.pairs[k][2])

    def to_json(self):
        return {
            "eps": self.eps,
            "n": self.n,
            "computed": [[z.real, z.imag] for z in self.computed],
            "predicted": [[z.real, z.imag] for z in self.predicted],
            "pairs": [
                {
                    "computed": [c.real, c.imag],
                    "predicted": [p.real, p.imag],
                    "residual": r,
                }
                for c, p, r in self.pairs
            ],
        }


def _row(job):
    model, theta, n, step, hit, sigma_tau = job
    grid = fptd.solve_volterra(
        model,
        float(theta),
        step=step,
        hit_hint=hit,
        sigma_tau_hint=sigma_tau,
    )
    masses = fptd.wrap_density(grid, n).masses
    return masses, grid.mass_deficit


def build_matrix(
    model: SifModel,
    n: int,
    step: float | None = None,
    threads: int = 1,
) -> TransitionMatrix:
    """Row-stochastic discretization of the phase transition operator.

    Rows are independent solves; with ``threads > 1`` they run in worker
    processes (the per-row work is many small array ops, which starve under
    the GIL).  Assembly order is by row index either way, so the result is
    identical no matter how rows are scheduled.
    """
    mids = (np.arange(n) + 0.5) / n
    # one vectorized march locates every row's deterministic crossing; the
    # per-row solves reuse it for their step and horizon choices
    hits, _, _ = _first_contacts(model, mids, model.reset(mids), need_star=False)
    margins = np.asarray(model.slope_margin(hits))
    sigmas = np.sqrt(np.asarray(model.sigma2(hits, mids)))
    sigma_taus = [
        float(s / m) if m > 1e-10 else None for s, m in zip(sigmas, margins)
    ]
    if step is None:
        steps = [
            None if st is None
            else float(min(max(model.eps * st / ROW_STEP_DIVISOR, fptd.STEP_MIN),
                           fptd.STEP_MAX))
            for st in sigma_taus
        ]
    else:
        steps = [step] * n
    jobs = [
        (model, mids[i], n, steps[i], float(hits[i]), sigma_taus[i])
        for i in range(n)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_row, jobs, chunksize=max(1, n // (4 * threads))))
    else:
        rows = [_row(j) for j in jobs]
    entries = np.array([r[0] for r in rows])
    deficits = np.array([r[1] for r in rows])
    entries /= entries.sum(axis=1, keepdims=True)
    return TransitionMatrix(n=n, entries=entries, row_mass_deficits=deficits)


def stationary(tm: TransitionMatrix, tol: float = 1e-12, cap: int = 100000):
    """Stationary distribution by left power iteration from uniform."""
    pi = np.full(tm.n, 1.0 / tm.n)
    for _ in range(cap):
        nxt = pi @ tm.entries
        nxt /= nxt.sum()
        if 0.5 * np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    raise NoConvergence(f"power iteration not within {tol} after {cap} steps")


def _modulus_descending(values: np.ndarray) -> np.ndarray:
    order = np.lexsort(
        (np.angle(values) % (2.0 * np.pi), -values.real, -np.abs(values))
    )
    return values[order]


def spectrum(tm: TransitionMatrix, predicted, eps: float = float("nan")) -> SpectrumReport:
    """Eigenvalues of the matrix matched greedily against the prediction."""
    if hasattr(predicted, "values"):
        pred = np.asarray(predicted.values, dtype=complex)
    else:
        pred = np.asarray(predicted, dtype=complex)
    spec = eigen.eigenvalues(tm.entries)
    computed = _modulus_descending(spec.values)
    pred = _modulus_descending(pred)

    k = min(len(pred), len(computed))
    pool = computed[:k].tolist()
    pairs = []
    for target in pred:
        if not pool:
            pairs.append((complex("nan"), target, float("nan")))
            continue
        j = int(np.argmin(np.abs(np.array(pool) - target)))
        got = pool.pop(j)
        pairs.append((got, target, float(abs(got - target))))
    return SpectrumReport(
        computed=computed, predicted=pred, pairs=pairs, eps=eps, n=tm.n
    )


def save_matrix(tm: TransitionMatrix, path):
    """Binary dump: 8-byte little-endian size header, then row-major f64."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", tm.n))
        fh.write(tm.entries.astype("<f8").tobytes())


def load_matrix(path) -> TransitionMatrix:
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise ValueError(f"matrix file has {data.size} values, expected {n * n}")
    entries = data.reshape(n, n).astype(float)
    return TransitionMatrix(
        n=int(n), entries=entries, row_mass_deficits=np.zeros(int(n))
    )
