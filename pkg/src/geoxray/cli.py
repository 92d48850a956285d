"""Command-line driver: forward | reconstruct | validate | sweep | constants | range-test."""
from __future__ import annotations

import argparse
import csv
import json
import pathlib
import subprocess
import sys

import numpy as np

from . import __version__, config as config_mod
from .boundary import ScatteringTables
from .connection import ZeroConnection, parse_connection
from .errors import (ConfigError, ConjugatePointError, DivergenceError, DomainError, IntegrationError,
                     TrappingError)
from .flow import TraceOptions, set_threads
from .grids import BoundaryField, FanBeamGrid, InteriorField, InteriorGrid, save_array
from .inversion import (FilterPlan, bound_for, fbp_I0, fbp_Iperp, krylov_solve, lambda_sweep, neumann_solve,
                        operator_norm_estimate, range_check, relative_error)
from .metrics import parse_metric
from .phantoms import Gaussian, ZeroPhantom, random_bumps
from .rng import SplitMix64
from .specs import parse_complex
from .surface import simplicity_constants
from .validation import run_groups
from .xray import forward_I0, forward_Iperp

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 2, 3, 4
SWEEP_HEADER = ["lambda_re", "lambda_im", "phantom", "fbp_rel_l2", "rel_l2", "rel_linf", "iterations", "converged"]


def version_string():
    """Package version plus ``git describe`` of the source tree when available."""
    try:
        here = pathlib.Path(__file__).resolve().parent
        desc = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here, capture_output=True,
                              text=True, timeout=5)
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# -- setup ---------------------------------------------------------------------------

class Setup:
    def __init__(self, cfg):
        self.cfg = cfg
        self.metric = parse_metric(cfg["metric"])
        R = self.metric.radius
        g = cfg["grids"]
        base = parse_connection(cfg["connection"], self.metric)
        scale = parse_complex(str(cfg["connection_scale"]))
        if isinstance(base, ZeroConnection) or scale == 0:
            self.A = ZeroConnection(base.n)
        else:
            self.A = base if scale == 1 else base.scaled(scale)
        self.n = self.A.n
        o = cfg["ode"]
        self.opts = TraceOptions(rtol=o["rtol"], atol=o["atol"], max_step=o["max_step"], tau_max=o["tau_max"],
                                 panels_per_unit=g["panels_per_unit"])
        self.fan = FanBeamGrid(g["n_beta"], g["n_omega"], R)
        self.interior = InteriorGrid(g["n_x"], R)
        self.phantom = make_phantom(cfg["phantom"], self.n, R)

    def plan(self, A=None, interior=None):
        g = self.cfg["grids"]
        return FilterPlan(self.metric, self.A if A is None else A, self.fan, interior or self.interior,
                          n_theta=g["n_theta"], opts=self.opts, w_theta=g["w_theta"],
                          w_panels_per_unit=g["w_panels_per_unit"])


def make_phantom(spec, n, radius):
    amps = [parse_complex(str(a)) for a in spec["amplitude"]]
    amps = (amps + [amps[-1]] * n)[:n]
    if spec["type"] == "zero":
        return ZeroPhantom(n)
    if spec["type"] == "gaussian":
        c = [float(v) * radius for v in spec["center"]]
        return Gaussian(c, spec["width"] * radius, amps)
    return random_bumps(spec["seed"], spec["count"], n, radius)


def _forward(setup, A=None):
    A = setup.A if A is None else A
    if setup.cfg["transform"] == "I0":
        return forward_I0(setup.metric, A, setup.phantom, setup.fan, setup.opts)
    return forward_Iperp(setup.metric, A, setup.phantom, setup.fan, setup.opts)


def _meta(cfg, **extra):
    return {"config": cfg, "version": version_string(), **extra}


def write_pgm(path, field: InteriorField):
    """8-bit P5 image of |first channel|, min-max normalised; rows run from +y down to -y."""
    img = np.abs(field.values[..., 0]).T[::-1]
    lo, hi = float(img.min()), float(img.max())
    scaled = np.zeros_like(img) if hi <= lo else (img - lo) / (hi - lo)
    data = np.round(255 * scaled).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def _write_json(path, obj):
    pathlib.Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serialisable: {type(o)}")


# -- commands -----------------------------------------------------------------------

def cmd_forward(cfg, out: pathlib.Path):
    s = Setup(cfg)
    d = _forward(s)
    save_array(out / "data.bin", d.plus(), _meta(cfg, grid=s.fan.spec(), layout="[beta, omega_inward, channel]",
                                                 transform=cfg["transform"]))
    return EXIT_OK


def _reconstruct(s: Setup, d: BoundaryField, plan: FilterPlan):
    which = "A" if s.cfg["transform"] == "I0" else "perp"
    r = fbp_I0(d, plan) if which == "A" else fbp_Iperp(d, plan)
    method = s.cfg["solver"]["method"]
    iterations = 0
    if method == "neumann":
        res = neumann_solve(r, plan, which, s.cfg["solver"]["max_iter"], s.cfg["solver"]["tol"])
        x, iterations = res.solution, res.terms
    elif method == "krylov":
        x, _, iterations = krylov_solve(r, plan, which, rtol=s.cfg["solver"]["tol"],
                                        maxiter=s.cfg["solver"]["max_iter"])
    else:
        x = r
    return r, x, iterations


def cmd_reconstruct(cfg, out: pathlib.Path):
    s = Setup(cfg)
    d = _forward(s)
    plan = s.plan()
    r, x, iterations = _reconstruct(s, d, plan)
    truth = InteriorField.from_function(s.interior, s.phantom)
    report = {"rel_l2": relative_error(s.metric, x, truth), "fbp_rel_l2": relative_error(s.metric, r, truth),
              "rel_linf": float(np.abs(x.masked() - truth.masked()).max() / max(np.abs(truth.masked()).max(), 1e-300)),
              "iterations": iterations}
    rep = simplicity_constants(s.metric, 32, 32, s.opts)
    ev = bound_for(s.metric, s.A, rep)
    report["bound"] = ev.bound
    report["norm_estimate"] = None
    if cfg["solver"]["norm_estimate"]:
        g = cfg["grids"]
        coarse = s.plan(interior=InteriorGrid(min(g["w_n_x"], g["n_x"]), s.metric.radius))
        report["norm_estimate"] = operator_norm_estimate(coarse, "A" if cfg["transform"] == "I0" else "perp",
                                                         iters=15, seed=cfg["seed"] or 1)
    save_array(out / "recon.bin", x.values, _meta(cfg, grid=s.interior.spec(), layout="[ix, iy, channel]"))
    write_pgm(out / "preview.pgm", x)
    _write_json(out / "report.json", _meta(cfg, **report))
    return EXIT_OK


def cmd_validate(cfg, out: pathlib.Path):
    s = Setup(cfg)
    results = run_groups(s.metric, s.A, cfg)
    ok = all(r["passed"] for r in results)
    _write_json(out / "report.json", _meta(cfg, groups=results, passed=ok))
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_sweep(cfg, out: pathlib.Path):
    s = Setup(cfg)
    direction = parse_complex(str(cfg["sweep"]["direction"]))
    lambdas = [parse_complex(str(v)) * direction for v in cfg["sweep"]["lambdas"]]
    base = parse_connection(cfg["connection"], s.metric)
    g = cfg["grids"]
    rows = lambda_sweep(s.metric, base, lambdas, [s.phantom], s.fan, s.interior, s.opts, g["w_theta"],
                        g["w_panels_per_unit"], cfg["solver"]["tol"])
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_HEADER, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()})
    _write_json(out / "sweep.json", _meta(cfg, rows=len(rows)))
    return EXIT_OK


def cmd_constants(cfg, out: pathlib.Path):
    s = Setup(cfg)
    rep = simplicity_constants(s.metric, 48, 48, s.opts)
    ev = bound_for(s.metric, s.A, rep)
    _write_json(out / "constants.json", _meta(cfg, simplicity=rep.as_dict(), bound=ev.as_dict()))
    return EXIT_OK


def random_boundary_field(fan: FanBeamGrid, n, seed, modes=3, amplitude=1.0, cutoff=0.5):
    """Smooth seeded data on the inward half: low trigonometric modes in the boundary point and the
    absolute direction angle, times exp(-(cutoff/mu)^2).  The factor vanishes to all orders at glancing,
    so the invariant extension of the result is smooth for every metric and connection."""
    rng = SplitMix64(seed)
    B, W = fan.plus_points()
    th = B + W
    vals = np.zeros((B.size, n), complex)
    for c in range(n):
        for p in range(-modes, modes + 1):
            for q in range(-modes, modes + 1):
                coef = amplitude * (rng.normal() + 1j * rng.normal()) / (1 + p * p + q * q)
                vals[:, c] += coef * np.exp(1j * (p * B + q * th))
    if cutoff > 0:
        vals *= np.exp(-(cutoff / np.cos(W)) ** 2)[:, None]
    return BoundaryField.from_plus(fan, vals)


def cmd_range_test(cfg, out: pathlib.Path):
    s = Setup(cfg)
    tables = ScatteringTables(s.metric, s.fan, s.A, s.opts)
    rt = cfg["range_test"]
    w = random_boundary_field(s.fan, s.n, cfg["seed"], rt["modes"], rt["amplitude"], rt["cutoff"])
    report = range_check(w, s.plan(), tables, cfg["solver"]["method"], cfg["solver"]["tol"], rt["trace_modes"])
    _write_json(out / "report.json", _meta(cfg, **report))
    return EXIT_OK


COMMANDS = {"forward": cmd_forward, "reconstruct": cmd_reconstruct, "validate": cmd_validate, "sweep": cmd_sweep,
            "constants": cmd_constants, "range-test": cmd_range_test}


def build_parser():
    p = argparse.ArgumentParser(prog="geoxray", description="Attenuated geodesic X-ray transforms on disks.")
    p.add_argument("--version", action="version", version=f"geoxray {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON configuration file (defaults are used for missing keys)")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--threads", type=int, help="worker threads (default: GEOXRAY_THREADS or 1)")
        sp.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        set_threads(args.threads)
        if args.config:
            cfg = config_mod.load(args.config, seed=args.seed, output=args.out)
        else:
            cfg = config_mod.resolve({}, seed=args.seed, output=args.out)
        out = pathlib.Path(cfg["output"])
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "config.json", _meta(cfg))
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrappingError, ConjugatePointError, DivergenceError, IntegrationError, DomainError) as exc:
        print(f"numerical contract violation: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
