"""Command-line front end.

Subcommands: analyze-map, fptd, spectrum, predict, mc, sweep, example, eig.
Every run drops its artifacts plus a manifest.json into the output directory;
identical config and seed reproduce byte-identical CSV files.  Exit codes:
0 ok, 2 config error, 3 numerical failure, 4 condition-check failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, detmap, eigen, fptd, markov, mc
from .errors import ConditionError, ConfigError, NumericalError
from .model import SifModel, model_loads
from .presets import get_preset


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _np_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _write_json(path: Path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_np_default)
        fh.write("\n")


class Run:
    """Output directory plus the manifest bookkeeping for one invocation."""

    def __init__(self, args, command):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.args = args
        self.outputs = []
        self.t0 = time.perf_counter()

    def path(self, name):
        self.outputs.append(name)
        return self.out / name

    def finish(self, config_doc):
        blob = json.dumps(config_doc, sort_keys=True).encode()
        manifest = {
            "command": self.command,
            "config_sha256": hashlib.sha256(blob).hexdigest(),
            "seed": self.args.seed,
            "versions": {
                "firephase": __version__,
                "numpy": np.__version__,
                "python": sys.version.split()[0],
            },
            "wall_time_s": round(time.perf_counter() - self.t0, 6),
            "outputs": self.outputs,
        }
        _write_json(self.out / "manifest.json", manifest)


def _load_model(args) -> SifModel:
    if args.example is not None:
        preset = get_preset(args.example)
        return preset.model(eps=args.eps if args.eps is not None else 0.05)
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from exc
        model = model_loads(text)
        if args.eps is not None:
            from dataclasses import replace

            model = replace(model, eps=args.eps)
        return model
    raise ConfigError("need --example N or --config PATH")


def cmd_example(args):
    preset = get_preset(args.number)
    doc = {
        "id": preset.id,
        "model": preset.model(eps=args.eps if args.eps is not None else 0.05).to_json(),
        "expected": {
            "stable_phases": list(preset.stable_phases),
            "stable_multiplier": preset.stable_multiplier,
            "unstable_phases": list(preset.unstable_phases),
            "unstable_multiplier": preset.unstable_multiplier,
            "discontinuities": list(preset.disc_phases),
            "image_set": list(preset.image_phases),
            "ell": preset.ell,
            "spectrum_head_moduli": list(preset.spectrum_head),
        },
    }
    print(json.dumps(doc, indent=2))
    return 0


def cmd_analyze_map(args):
    model = _load_model(args)
    run = Run(args, "analyze-map")
    report = detmap.analyze(model, max_period=args.max_period)
    rm = detmap.ReturnMap(model)
    kappa = report.stable_orbits[0].period if report.stable_orbits else 1
    theta = np.arange(args.grid) / args.grid
    f1 = rm.forward(theta)
    fk = theta.copy()
    for _ in range(kappa):
        fk = rm.forward(fk)
    with np.errstate(divide="ignore", invalid="ignore"):
        fprime = detmap._fprime(model, theta, f1)
    rows = zip(theta.tolist(), np.mod(f1, 1.0).tolist(),
               np.mod(fk, 1.0).tolist(), np.asarray(fprime).tolist())
    _write_csv(run.path("map.csv"), ["theta", "f", f"f_{kappa}", "fprime"], rows)
    _write_json(run.path("report.json"), report.to_json())
    run.finish(model.to_json())
    for o in report.orbits:
        kind = "stable" if o.stable else "unstable"
        print(f"{kind} period-{o.period} orbit at "
              + ", ".join(f"{p:.4f}" for p in o.phases)
              + f"  multiplier {o.multiplier:.4f}")
    for d in report.discontinuities:
        print(f"discontinuity at {d.phase:.4f}: f={d.f_phase:.4f} "
              f"f*={d.f_star_phase:.4f} ({d.kind})")
    return 0


def cmd_predict(args):
    model = _load_model(args)
    run = Run(args, "predict")
    report = detmap.analyze(model, max_period=args.max_period)
    spec = detmap.predict_spectrum(report, r_min=args.rmin)
    rows = [
        (e.value.real, e.value.imag, abs(e.value), e.orbit, e.power, e.root)
        for e in spec.entries
    ]
    _write_csv(run.path("predicted.csv"),
               ["re", "im", "modulus", "orbit", "power", "root"], rows)
    run.finish(model.to_json())
    head = ", ".join(f"{abs(e.value):.4f}" for e in spec.entries[:8])
    print(f"{len(spec.entries)} predicted eigenvalues above r={args.rmin}: {head} ...")
    return 0


def cmd_fptd(args):
    model = _load_model(args)
    run = Run(args, "fptd")
    grid = fptd.solve_volterra(model, args.theta0, args.x0, step=args.step)
    try:
        ga = fptd.gaussian_approx(model, args.theta0, args.x0)
        gauss = ga.density(grid.times)
        mean, stdev = ga.mean, ga.stdev
    except NumericalError:
        gauss = np.full_like(grid.density, float("nan"))
        mean = stdev = float("nan")
    rows = zip(grid.times.tolist(), grid.density.tolist(),
               grid.cumulative.tolist(), np.asarray(gauss).tolist())
    _write_csv(run.path("fptd.csv"),
               ["t", "density", "cumulative", "gaussian_density"], rows)
    _write_json(run.path("fptd.json"), {
        "mean": mean,
        "stdev": stdev,
        "massDeficit": grid.mass_deficit,
        "step": grid.step,
    })
    run.finish({"model": model.to_json(), "theta0": args.theta0, "x0": args.x0,
                "step": args.step})
    print(f"density on [{grid.t0:.4g}, {grid.horizon:.4g}] step {grid.step:.2e}; "
          f"mass deficit {grid.mass_deficit:.2e}")
    return 0


def cmd_spectrum(args):
    model = _load_model(args)
    run = Run(args, "spectrum")
    report = detmap.analyze(model, max_period=args.max_period)
    pred = detmap.predict_spectrum(report, r_min=args.rmin)
    tm = markov.build_matrix(model, args.grid, threads=args.threads)
    sr = markov.spectrum(tm, pred, eps=model.eps)
    if args.dump_matrix:
        markov.save_matrix(tm, run.path("matrix.bin"))
    rows = []
    paired = {}
    for c, pp, r in sr.pairs:
        if c == c:  # skip NaN placeholders from an exhausted pool
            paired[(round(c.real, 15), round(c.imag, 15))] = (pp, r)
    for lam in sr.computed:
        key = (round(lam.real, 15), round(lam.imag, 15))
        if key in paired:
            pp, r = paired.pop(key)
            rows.append((lam.real, lam.imag, abs(lam), pp.real, pp.imag, r))
        else:
            nan = float("nan")
            rows.append((lam.real, lam.imag, abs(lam), nan, nan, nan))
    _write_csv(run.path("eigenvalues.csv"),
               ["re", "im", "modulus", "matched_prediction_re",
                "matched_prediction_im", "residual"], rows)
    _write_json(run.path("spectrum.json"), sr.to_json())
    run.finish({"model": model.to_json(), "grid": args.grid, "rmin": args.rmin})
    lam2 = sr.computed[1] if len(sr.computed) > 1 else float("nan")
    print(f"n={args.grid} eps={model.eps}: lambda_1={sr.computed[0].real:.8f}, "
          f"lambda_2={lam2:.6f}")
    return 0


def cmd_mc(args):
    model = _load_model(args)
    run = Run(args, "mc")
    cfg = mc.SimConfig(dt=args.dt, trials=args.trials, seed=args.seed,
                       bridge_correction=not args.no_bridge)
    sample = mc.simulate_hit(model, args.theta0, args.x0, cfg)
    grid = fptd.solve_volterra(model, args.theta0, args.x0)
    ks = mc.ks_statistic(sample.times, grid.cdf_at)
    if args.samples_csv:
        _write_csv(run.path("samples.csv"), ["t"],
                   ((t,) for t in sample.times.tolist()))
    _write_json(run.path("mc.json"), {
        "mean": sample.mean,
        "stdev": sample.stdev,
        "skewness": sample.skewness,
        "ks_vs_volterra": ks,
    })
    run.finish({"model": model.to_json(), "theta0": args.theta0,
                "trials": args.trials, "dt": args.dt, "seed": args.seed})
    print(f"{args.trials} trials: mean {sample.mean:.6f} stdev {sample.stdev:.6f} "
          f"KS vs integral-equation CDF {ks:.4f}")
    return 0


def _parse_range(spec):
    try:
        lo, hi, num = spec.split(":")
        lo, hi, num = float(lo), float(hi), int(num)
    except ValueError as exc:
        raise ConfigError(f"range must be lo:hi:count, got {spec!r}") from exc
    if num < 1:
        raise ConfigError("range count must be >= 1")
    return np.linspace(lo, hi, num)


def cmd_sweep(args):
    from concurrent.futures import ThreadPoolExecutor
    from .periodic import Constant, Sinusoid

    run = Run(args, "sweep")
    drives = _parse_range(args.i_range)
    depths = _parse_range(args.k_range)
    cells = [(i, k) for i in drives for k in depths]

    def locked(cell):
        drive, depth = cell
        model = SifModel(gamma=args.gamma, eps=0.0, input=Constant(drive),
                         threshold=Sinusoid(1.0, depth), reset=Constant(0.0))
        try:
            orbits = detmap.find_orbits(model, max_period=args.max_period)
        except (NumericalError, ConditionError):
            return None
        stable = [o for o in orbits if o.stable]
        if not stable:
            return None
        best = min(stable, key=lambda o: o.period)
        return best.period, best.multiplier

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(locked, cells))
    else:
        results = [locked(c) for c in cells]
    rows = []
    for (drive, depth), res in zip(cells, results):
        if res is None:
            rows.append((drive, depth, "unlocked", float("nan")))
        else:
            rows.append((drive, depth, res[0], res[1]))
    _write_csv(run.path("sweep.csv"), ["I", "k", "kappa", "multiplier"], rows)
    run.finish({"i_range": args.i_range, "k_range": args.k_range,
                "gamma": args.gamma, "max_period": args.max_period})
    n_locked = sum(1 for r in rows if r[2] != "unlocked")
    print(f"{n_locked}/{len(rows)} cells phase-locked")
    return 0


def cmd_eig(args):
    try:
        tm = markov.load_matrix(args.matrix)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load matrix {args.matrix}: {exc}") from exc
    spec = eigen.eigenvalues(tm.entries)
    order = np.argsort(-np.abs(spec.values))
    rows = [(v.real, v.imag, abs(v)) for v in spec.values[order]]
    if args.out_csv:
        _write_csv(Path(args.out_csv), ["re", "im", "modulus"], rows)
    else:
        print("re,im,modulus")
        for r in rows:
            print(",".join(_fmt(v) for v in r))
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="firephase",
        description="firing maps, passage densities and spectra of noisy "
                    "integrate-and-fire oscillators",
    )
    p.add_argument("--config", help="model JSON document")
    p.add_argument("--example", type=int, help="built-in example preset 1-6")
    p.add_argument("--eps", type=float, default=None, help="noise intensity override")
    p.add_argument("--out", default="firephase_out", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (64-bit)")
    p.add_argument("--threads", type=int, default=1)
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("example", help="print a preset model and its reference values")
    s.add_argument("number", type=int)
    s.set_defaults(fn=cmd_example)

    s = sub.add_parser("analyze-map", help="orbits, discontinuities, conditions")
    s.add_argument("--grid", type=int, default=512)
    s.add_argument("--max-period", type=int, default=8)
    s.set_defaults(fn=cmd_analyze_map)

    s = sub.add_parser("predict", help="limiting eigenvalues from the map")
    s.add_argument("--rmin", type=float, default=0.02)
    s.add_argument("--max-period", type=int, default=8)
    s.set_defaults(fn=cmd_predict)

    s = sub.add_parser("fptd", help="first-passage density for one start")
    s.add_argument("--theta0", type=float, required=True)
    s.add_argument("--x0", type=float, default=None)
    s.add_argument("--step", type=float, default=None)
    s.set_defaults(fn=cmd_fptd)

    s = sub.add_parser("spectrum", help="discretized operator eigenvalues")
    s.add_argument("--grid", type=int, default=200)
    s.add_argument("--rmin", type=float, default=0.02)
    s.add_argument("--max-period", type=int, default=8)
    s.add_argument("--dump-matrix", action="store_true")
    s.set_defaults(fn=cmd_spectrum)

    s = sub.add_parser("mc", help="Monte Carlo firing-time sample")
    s.add_argument("--theta0", type=float, required=True)
    s.add_argument("--x0", type=float, default=None)
    s.add_argument("--trials", type=int, default=10000)
    s.add_argument("--dt", type=float, default=1e-4)
    s.add_argument("--no-bridge", action="store_true")
    s.add_argument("--samples-csv", action="store_true")
    s.set_defaults(fn=cmd_mc)

    s = sub.add_parser("sweep", help="phase-locking scan over drive and depth")
    s.add_argument("--i-range", required=True, help="lo:hi:count")
    s.add_argument("--k-range", required=True, help="lo:hi:count")
    s.add_argument("--gamma", type=float, default=1.0 / 12.8)
    s.add_argument("--max-period", type=int, default=8)
    s.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("eig", help="eigenvalues of a dumped binary matrix")
    s.add_argument("--matrix", required=True)
    s.add_argument("--out-csv", default=None)
    s.set_defaults(fn=cmd_eig)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ConditionError as exc:
        print(f"condition check failed: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
