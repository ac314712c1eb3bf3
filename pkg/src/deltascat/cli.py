"""Command-line front end.

Exit codes: 0 pass, 1 error, 2 quantitative window missed.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DeltaScatError
from .geometry import GammaDiscretization, geometry_from_config, load_geometry_config
from .layer import DEFAULT_QUAD_DEPTH, PotentialSpec
from .resonances import Box, Circle, beyn_solve, find_resonances, free_region_check
from .spectra import fit_decay_exponent, norm_sweep, parse_grid

EXIT_OK, EXIT_ERROR, EXIT_WINDOW = 0, 1, 2

WINDOWS = {
    "imaginary": (-1.1, -0.9),
    "points": (-1.1, -0.9),
    "convex": (-0.75, -0.60),
    "flat": (-0.60, -0.45),
}


@dataclass
class RunConfig:
    """Validated options of one CLI invocation."""

    command: str
    geom: Path | None = None
    potential: str | None = None
    lambdas: np.ndarray | None = None
    imaginary: bool = False
    out: Path | None = None
    threads: int = 1
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError("--threads must be at least 1")
        for k, v in self.tolerances.items():
            if not v > 0:
                raise ValueError(f"tolerance {k} must be positive")

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        tol = {k: getattr(args, k) for k in ("check_free_region", "radius", "A", "h")
               if getattr(args, k, None) is not None}
        geom = getattr(args, "geom", None)
        return cls(args.command, Path(geom) if geom else None, getattr(args, "potential", None),
                   None, getattr(args, "lam_imag", None) is not None, args.out, args.threads, tol)


# ---------------------------------------------------------------- parsing

def parse_complex_pair(text: str) -> complex:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 're,im', got {text!r}")
    return complex(float(parts[0]), float(parts[1]))


def parse_box(text: str) -> Box:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"expected 'x0,x1,y0,y1', got {text!r}")
    return Box(*parts)


def parse_window(text: str) -> tuple:
    lo, hi = (float(p) for p in text.split(","))
    if lo >= hi:
        raise argparse.ArgumentTypeError("window needs lo < hi")
    return lo, hi


def _load_numbers(path: str) -> np.ndarray:
    text = Path(path).read_text()
    dtype = complex if "j" in text else float
    delim = "," if "," in text else None
    lines = [ln for ln in text.splitlines() if ln.strip()]
    return np.loadtxt(lines, delimiter=delim, dtype=dtype, ndmin=1, comments="#")


def three_point_matrix() -> np.ndarray:
    return np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])


def parse_potential(spec: str, n: int) -> PotentialSpec:
    """``c`` (scalar), ``diag:FILE``, ``matrix:FILE`` or ``three-point``."""
    if spec == "three-point":
        m = three_point_matrix()
        pot = PotentialSpec.from_matrix(m)
    elif spec.startswith("diag:"):
        pot = PotentialSpec.from_samples(_load_numbers(spec[5:]))
    elif spec.startswith("matrix:"):
        m = _load_numbers(spec[7:])
        pot = PotentialSpec.from_matrix(np.atleast_2d(m))
    else:
        try:
            c = complex(spec.replace(" ", ""))
        except ValueError:
            raise ValueError(f"cannot parse potential {spec!r}") from None
        pot = PotentialSpec.constant(c.real if c.imag == 0 else c)
    pot.as_matrix(n)
    return pot


def default_window(gamma: GammaDiscretization, imaginary: bool) -> tuple:
    if imaginary:
        return WINDOWS["imaginary"]
    if gamma.dimension == 1:
        return WINDOWS["points"]
    return WINDOWS["convex"] if gamma.convex else WINDOWS["flat"]


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
    else:
        _atomic_write(args.out, text)


def _say(args, msg: str) -> None:
    # keep stdout a clean CSV stream when no --out is given
    stream = sys.stderr if getattr(args, "out", None) is None else sys.stdout
    print(msg, file=stream)


# --------------------------------------------------------------- commands

def cmd_norm_sweep(args) -> int:
    if (args.lam is None) == (args.lam_imag is None):
        raise ValueError("give exactly one of --lambda and --lambda-imag")
    cfg = load_geometry_config(args.geom)
    imaginary = args.lam_imag is not None
    grid = parse_grid(args.lam_imag if imaginary else args.lam)
    lams = 1j * grid if imaginary else grid.astype(complex)
    table = norm_sweep(cfg, lams, threads=args.threads, method=args.method,
                       quad_depth=args.quad_depth)
    if table.failed:
        raise DeltaScatError(f"row lambda={table.failed[0].lam} failed: {table.failed[0].error}")
    fit = fit_decay_exponent(table, axis="imag" if imaginary else "abs")
    window = args.window or default_window(geometry_from_config(cfg), imaginary)
    _emit(args, table.to_csv(timing=args.timing))
    ok = window[0] <= fit.alpha <= window[1]
    _say(args, f"alpha = {fit.alpha:.4f}  window [{window[0]}, {window[1]}]  "
               f"{'PASS' if ok else 'MISS'}")
    _say(args, f"log-corrected alpha = {fit.alpha_log:.4f}, log coefficient "
               f"{fit.log_coefficient:.3f}, log term flagged: {fit.log_correction_flag}")
    if not table.schur_dominates():
        _say(args, "Schur bound below the operator norm on some row")
        ok = False
    if args.plot:
        from .plotting import plot_sweep
        plot_sweep(table, fit, args.plot, axis="imag" if imaginary else "abs")
    return EXIT_OK if ok else EXIT_WINDOW


def cmd_resonances(args) -> int:
    cfg = load_geometry_config(args.geom)
    gamma = geometry_from_config(cfg)
    pot = parse_potential(args.potential, gamma.n)
    if args.box is not None:
        rset = find_resonances(gamma, pot, args.box, nodes_per_side=args.nodes)
    elif args.center is not None and args.radius is not None:
        rset = beyn_solve(gamma, pot, Circle(args.center, args.radius))
    else:
        raise ValueError("give --box, or --center with --radius")
    report = None
    if args.check_free_region is not None:
        report = free_region_check(rset, gamma.d_gamma, args.check_free_region, args.r_min)
    _emit(args, rset.to_csv())
    _say(args, f"{len(rset)} resonances, total multiplicity {rset.total_multiplicity}, "
               f"argument-principle count {rset.count_check}")
    ok = True
    if report is not None:
        ok = report.passed
        _say(args, f"free region: Im lam <= -{report.slope:.4f} log|Re lam| for |Re lam| >= "
                   f"{report.r_min:g}: {len(report.checked)} checked, "
                   f"{len(report.violations)} violations, threshold R = {report.threshold:g}  "
                   f"{'PASS' if ok else 'MISS'}")
    if args.plot:
        from .plotting import plot_resonances
        curve = None
        if report is not None and len(rset):
            xs = np.linspace(max(report.r_min, 1.0), max(abs(rset.lambdas.real).max(), 2.0), 200)
            curve = (xs, -report.slope * np.log(xs))
        plot_resonances(rset, args.plot, curve)
    return EXIT_OK if ok else EXIT_WINDOW


def _wave_verdict(res, c) -> tuple:
    tab = res.table
    name = res.preset.name
    last = tab.rows[-1]
    if name == "free":
        return last.l2_error < 1e-10, f"final error {last.l2_error:.3e} (target < 1e-10)"
    if name == "single-well" and c is not None and c < 0:
        rate = tab.growth_rate
        return abs(rate - 0.5 * abs(c)) < 0.05, f"growth rate {rate:.4f} (bound state mu = {-c / 2:g})"
    if name == "single-well":
        ratio = last.l2_error / tab.rows[0].l2_error
        ok = ratio < 0.3 and last.relative < 5e-2
        return ok, (f"error ratio t={last.t:g}/t={tab.rows[0].t:g}: {ratio:.3f} (target < 0.3), "
                    f"relative {last.relative:.2e}")
    return last.relative < 5e-2, f"relative error at t={last.t:g}: {last.relative:.3e} (target < 5e-2)"


def cmd_wave_demo(args) -> int:
    from .wave1d import preset, run_preset

    p = preset(args.preset, c=args.c, h=args.h, A=args.A)
    res = run_preset(p)
    out = Path(args.out) if args.out else Path(".")
    texts = {
        f"{p.name}_trajectory.csv": res.trajectory.to_csv(window=args.traj_window or 2 * p.chi_radius),
        f"{p.name}_comparison.csv": res.table.to_csv(),
        f"{p.name}_poles.csv": res.poles.to_csv(),
    }
    for name, text in texts.items():
        _atomic_write(out / name, text)
    ok, msg = _wave_verdict(res, p.V[0, 0] if p.name == "single-well" else None)
    print(f"preset {p.name}: {len(res.expansion.poles)} poles above -{p.A:g}; "
          f"decay rate {res.table.decay_rate:.4f}; growth rate {res.table.growth_rate:.4f}")
    print(f"{msg}  {'PASS' if ok else 'MISS'}")
    if args.plot:
        from .plotting import plot_wave
        plot_wave(res, args.plot)
    return EXIT_OK if ok else EXIT_WINDOW


# ------------------------------------------------------------------ main

class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1 so that 2 stays reserved for window misses."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


VALUE_FLAGS = ("--box", "--center", "--window", "--potential", "--c", "--A")


def _join_negative(argv):
    """Glue ``--box -20,20,-3,0`` into ``--box=-20,...`` so argparse does not read a flag."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in VALUE_FLAGS and i + 1 < len(argv) and re.match(r"-[\d.]", argv[i + 1]):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="deltascat",
                                 description="Layer potentials, resonances and waves for delta potentials on hypersurfaces.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ns = sub.add_parser("norm-sweep", help="operator norm of G(lambda) over a grid")
    ns.add_argument("--geom", required=True)
    ns.add_argument("--lambda", dest="lam", help="real grid A:B:dyadic or A:B:linear:N")
    ns.add_argument("--lambda-imag", dest="lam_imag", help="grid of sigma for lambda = i sigma")
    ns.add_argument("--window", type=parse_window, help="accepted exponent range lo,hi")
    ns.add_argument("--method", choices=("power", "svd"), default="power")
    ns.add_argument("--quad-depth", type=int, default=DEFAULT_QUAD_DEPTH)
    ns.add_argument("--timing", action="store_true", help="fill the seconds column")
    ns.set_defaults(func=cmd_norm_sweep)

    rs = sub.add_parser("resonances", help="locate resonances in a box or disc")
    rs.add_argument("--geom", required=True)
    rs.add_argument("--potential", required=True,
                    help="c | diag:FILE | matrix:FILE | three-point")
    rs.add_argument("--box", type=parse_box)
    rs.add_argument("--center", type=parse_complex_pair)
    rs.add_argument("--radius", type=float)
    rs.add_argument("--nodes", type=int, default=64, help="initial contour nodes per side")
    rs.add_argument("--check-free-region", type=float, metavar="EPS")
    rs.add_argument("--r-min", type=float, default=10.0)
    rs.set_defaults(func=cmd_resonances)

    wd = sub.add_parser("wave-demo", help="wave equation against the resonance expansion")
    wd.add_argument("preset", help="single-well | paper-three-point | free")
    wd.add_argument("--c", type=float, help="single-well strength")
    wd.add_argument("--A", type=float, help="expansion depth")
    wd.add_argument("--h", type=float, help="grid spacing")
    wd.add_argument("--traj-window", type=float, help="half-width of the trajectory CSV")
    wd.set_defaults(func=cmd_wave_demo)

    for p in (ns, rs, wd):
        p.add_argument("--out", type=Path, help="output file (directory for wave-demo)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--plot", type=Path, help="also render a figure to this file")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(_join_negative(list(sys.argv[1:] if argv is None else argv)))
    except SystemExit as exc:
        # --help, --version and usage errors
        return int(exc.code or 0)
    try:
        RunConfig.from_args(args)
        return args.func(args)
    except (DeltaScatError, ValueError, OSError, KeyError) as exc:
        print(f"deltascat {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
