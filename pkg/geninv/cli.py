"""
Command-line front end.

    geninv asymptotic --c 2 --spectrum 0.2:1,0.4:3,0.4:10
    geninv stieltjes --which minus --z-re 1 --z-im 0.1 --c 2 --spectrum identity
    geninv density --which plus --grid 0.01:3:300 --c 2 --spectrum figure1 --out d.csv
    geninv sweep --c-list 2,10 --p-grid 50:500:50 --reps 20 --out r.csv
    geninv figure1 --reps 5 --seed 42 --out r.csv
    geninv estimate --data Y.txt --spectrum identity
"""

import argparse
import logging
import math
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .config import load_config, resolve
from .errors import DataFileError, GeninvError, NumericalError, ValidationError
from .experiments import SUMMARY_HEADER, CellSummary, SweepConfig, figure1_preset, run_sweep
from .frobenius import (asymptotic_fro_minus, asymptotic_fro_plus, corollary_equivalents,
                        trace_limit_minus, trace_limit_plus)
from .logger import configure_logging, csv_text, write_csv
from .matrixlab import CovarianceModel, load_matrix, moore_penrose_inverse, spectral_stats
from .protocol import ExitCode, Noise, SolverDefaults, Transform
from .spectrum import SpectrumSpec, parse_spectrum
from .stieltjes import density_grid, m_underline_zero, solve_transform

logger = logging.getLogger(__name__)

Fields = List[Tuple[str, Any]]

GLOBAL_DEFAULTS = {"threads": 1, "format": "text"}

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "asymptotic": {"c": None, "spectrum": "identity"},
    "stieltjes": {"which": None, "z_re": None, "z_im": None, "c": None, "spectrum": "identity",
                  "tol": SolverDefaults.TOL, "max_iter": SolverDefaults.MAX_ITER},
    "density": {"which": None, "grid": None, "epsilon": SolverDefaults.DENSITY_EPSILON, "c": None,
                "spectrum": "identity", "include_atom": False, "out": None,
                "tol": SolverDefaults.TOL, "max_iter": SolverDefaults.MAX_ITER},
    "sweep": {"c_list": None, "p_grid": None, "reps": 100, "spectrum": "identity",
              "noise": "gaussian", "seed": 0, "out": None},
    "figure1": {"reps": 100, "seed": 0, "out": None, "noise": "gaussian"},
    "estimate": {"data": None, "n": None, "spectrum": None, "sigma_file": None},
}


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors become ValidationError (exit 1) instead of argparse's exit 2."""

    def error(self, message):
        raise ValidationError(message)


# ---------------------------------------------------------------------------
# Value parsing
# ---------------------------------------------------------------------------

def _require(settings: Dict[str, Any], name: str) -> Any:
    value = settings.get(name)
    if value is None:
        raise ValidationError(f"missing required setting --{name.replace('_', '-')}")
    return value


def _float(value: Any, name: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"--{name.replace('_', '-')}: not a number: {value!r}") from None
    if not math.isfinite(x):
        raise ValidationError(f"--{name.replace('_', '-')}: must be finite, got {value!r}")
    return x


def _int(value: Any, name: str, minimum: Optional[int] = None) -> int:
    try:
        i = int(value)
    except (TypeError, ValueError):
        raise ValidationError(f"--{name.replace('_', '-')}: not an integer: {value!r}") from None
    if isinstance(value, float) and value != i:
        raise ValidationError(f"--{name.replace('_', '-')}: not an integer: {value!r}")
    if minimum is not None and i < minimum:
        raise ValidationError(f"--{name.replace('_', '-')} must be >= {minimum}, got {i}")
    return i


def _transform(value: Any) -> Transform:
    try:
        return Transform(str(value).strip().lower())
    except ValueError:
        names = ", ".join(t.value for t in Transform)
        raise ValidationError(f"unknown transform '{value}' (expected one of: {names})") from None


def _spectrum(value: Any) -> SpectrumSpec:
    if isinstance(value, SpectrumSpec):
        return value
    return parse_spectrum(str(value))


def _noise(value: Any) -> Noise:
    return value if isinstance(value, Noise) else Noise.parse(str(value))


def parse_float_list(value: Any, name: str) -> List[float]:
    items = value if isinstance(value, (list, tuple)) else str(value).split(",")
    out = [_float(v, name) for v in items if str(v).strip()]
    if not out:
        raise ValidationError(f"--{name.replace('_', '-')} is empty")
    return out


def parse_p_grid(value: Any) -> List[int]:
    """`50,100,200` or an inclusive range `start:stop:step`."""
    if isinstance(value, (list, tuple)):
        return [_int(v, "p_grid", minimum=2) for v in value]
    text = str(value).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"--p-grid range must be start:stop:step, got '{text}'")
        start, stop, step = (_int(v, "p_grid") for v in parts)
        if step <= 0 or stop < start:
            raise ValidationError(f"--p-grid range '{text}' is empty")
        grid = list(range(start, stop + 1, step))
    else:
        grid = [_int(v, "p_grid") for v in text.split(",") if v.strip()]
    if not grid or min(grid) < 2:
        raise ValidationError(f"--p-grid needs dimensions >= 2, got '{text}'")
    return grid


def parse_grid(value: Any) -> np.ndarray:
    """`xmin:xmax:npts`, inclusive of both ends."""
    parts = str(value).split(":")
    if len(parts) != 3:
        raise ValidationError(f"--grid must be xmin:xmax:npts, got '{value}'")
    lo, hi = _float(parts[0], "grid"), _float(parts[1], "grid")
    npts = _int(parts[2], "grid", minimum=1)
    if not 0 < lo <= hi:
        raise ValidationError(f"--grid needs 0 < xmin <= xmax, got '{value}'")
    return np.linspace(lo, hi, npts)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _text_value(v: Any) -> str:
    if v is None:
        return "nan"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def emit(fields: Fields, fmt: str, out=None):
    """Labeled text lines (6 significant digits) or one CSV row at full precision."""
    out = out or sys.stdout
    if fmt == "csv":
        out.write(csv_text([k for k, _ in fields], [[v for _, v in fields]]))
        return
    width = max(len(k) for k, _ in fields)
    for k, v in fields:
        out.write(f"{k:<{width}}  {_text_value(v)}\n")


def emit_table(header: Sequence[str], rows: Sequence[Sequence], fmt: str, out=None):
    out = out or sys.stdout
    if fmt == "csv":
        out.write(csv_text(header, rows))
        return
    out.write(" ".join(f"{h:>12}" for h in header) + "\n")
    for row in rows:
        out.write(" ".join(f"{_text_value(v):>12}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_asymptotic(s: Dict[str, Any]) -> int:
    c = _float(_require(s, "c"), "c")
    H = _spectrum(s["spectrum"])
    fro_plus = asymptotic_fro_plus(c, H)
    fro_minus = asymptotic_fro_minus(c, H)
    emit([
        ("c", c),
        ("spectrum", H.to_text()),
        ("fro_plus", fro_plus),
        ("fro_minus", fro_minus),
        ("nfl", fro_minus / fro_plus - 1.0),
        ("m0", m_underline_zero(c, H)),
        ("trace_plus", trace_limit_plus(c, H)),
        ("trace_minus", trace_limit_minus(c, H)),
    ], s["format"])
    return ExitCode.OK


def cmd_stieltjes(s: Dict[str, Any]) -> int:
    which = _transform(_require(s, "which"))
    z = complex(_float(_require(s, "z_re"), "z_re"), _float(_require(s, "z_im"), "z_im"))
    c = _float(_require(s, "c"), "c")
    H = _spectrum(s["spectrum"])
    tol = _float(s["tol"], "tol")
    max_iter = _int(s["max_iter"], "max_iter", minimum=1)

    sol = solve_transform(which, z, c, H, tol=tol, max_iter=max_iter)
    emit([
        ("which", which.value),
        ("z_re", z.real),
        ("z_im", z.imag),
        ("m_re", sol.m.real),
        ("m_im", sol.m.imag),
        ("residual", sol.residual),
        ("iterations", sol.iterations),
    ], s["format"])
    return ExitCode.OK


def cmd_density(s: Dict[str, Any]) -> int:
    which = _transform(_require(s, "which"))
    xs = parse_grid(_require(s, "grid"))
    epsilon = _float(s["epsilon"], "epsilon")
    c = _float(_require(s, "c"), "c")
    H = _spectrum(s["spectrum"])
    tol = _float(s["tol"], "tol")
    max_iter = _int(s["max_iter"], "max_iter", minimum=1)

    points = density_grid(which, c, H, xs, epsilon=epsilon, include_atom=bool(s["include_atom"]),
                          tol=tol, max_iter=max_iter)
    rows = [(pt.x, pt.density) for pt in points]
    missing = sum(1 for pt in points if pt.density is None)
    if missing:
        logger.warning("%d of %d density points missing", missing, len(points))
    if s["out"]:
        write_csv(s["out"], ("x", "density"), rows)
    else:
        emit_table(("x", "density"), rows, s["format"])
    return ExitCode.OK


def _print_summaries(summaries: Sequence[CellSummary], fmt: str):
    rows = [(s.c_target, s.p, s.mean_nfl, s.sd_nfl, s.nfl_asym, s.n_ok, s.n_failed) for s in summaries]
    emit_table(SUMMARY_HEADER, rows, fmt)


def _sweep(config: SweepConfig, s: Dict[str, Any]) -> int:
    threads = _int(s["threads"], "threads", minimum=1)
    result = run_sweep(config, threads=threads)
    if result.n_failed:
        logger.warning("%d replication(s) failed and are missing from the results", result.n_failed)
    _print_summaries(result.summaries, s["format"])
    return ExitCode.OK


def cmd_sweep(s: Dict[str, Any]) -> int:
    config = SweepConfig(
        c_list=parse_float_list(_require(s, "c_list"), "c_list"),
        p_grid=parse_p_grid(_require(s, "p_grid")),
        replications=_int(s["reps"], "reps", minimum=1),
        spectrum=_spectrum(s["spectrum"]),
        noise=_noise(s["noise"]),
        master_seed=_int(s["seed"], "seed", minimum=0),
        output_path=s["out"],
    )
    return _sweep(config, s)


def cmd_figure1(s: Dict[str, Any]) -> int:
    config = figure1_preset(
        replications=_int(s["reps"], "reps", minimum=1),
        master_seed=_int(s["seed"], "seed", minimum=0),
        output_path=s["out"],
        noise=_noise(s["noise"]),
    )
    return _sweep(config, s)


def estimate_from_file(path, n_override: Optional[int] = None, spectrum: Optional[SpectrumSpec] = None,
                       sigma_file=None) -> Fields:
    """
    Data-only functionals of S+ for a p x n observation matrix Y read from
    `path`, with the limits for a given population spectrum and the finite-p
    plug-in equivalents for a given dense Sigma when supplied.
    """
    Y = load_matrix(path)
    p, columns = Y.shape
    n = columns if n_override is None else n_override
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if p <= n or p <= columns:
        raise ValidationError(f"estimate needs p > n (singular S), got p={p}, n={n}")

    # S = YY'/n, so S+ scales linearly in n
    S_plus = moore_penrose_inverse(Y) * (n / columns)
    stats = spectral_stats(S_plus)
    c_eff = p / n
    fields: Fields = [
        ("p", p),
        ("n", n),
        ("c_eff", c_eff),
        ("trace_plus", stats.trace / p),
        ("fro_plus", stats.frobenius_sq / p),
    ]
    if spectrum is not None:
        fields += [
            ("trace_plus_limit", trace_limit_plus(c_eff, spectrum)),
            ("fro_plus_limit", asymptotic_fro_plus(c_eff, spectrum)),
            ("fro_minus_limit", asymptotic_fro_minus(c_eff, spectrum)),
        ]
    if sigma_file is not None:
        model = CovarianceModel.from_matrix(load_matrix(sigma_file))
        if model.p != p:
            raise ValidationError(f"Sigma is {model.p} x {model.p} but the data have p = {p}")
        equiv = corollary_equivalents(model, c_eff)
        fields += [
            ("fro_plus_equiv", equiv.fro_plus_equiv),
            ("fro_minus_equiv", equiv.fro_minus_equiv),
            ("m0_equiv", equiv.m0),
        ]
    return fields


def cmd_estimate(s: Dict[str, Any]) -> int:
    path = _require(s, "data")
    n = None if s["n"] is None else _int(s["n"], "n", minimum=1)
    spectrum = None if s["spectrum"] is None else _spectrum(s["spectrum"])
    emit(estimate_from_file(path, n, spectrum, s["sigma_file"]), s["format"])
    return ExitCode.OK


COMMANDS = {
    "asymptotic": cmd_asymptotic,
    "stieltjes": cmd_stieltjes,
    "density": cmd_density,
    "sweep": cmd_sweep,
    "figure1": cmd_figure1,
    "estimate": cmd_estimate,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of flag values (flags override it)")
    common.add_argument("--threads", type=int, help="worker threads for sweeps (default 1)")
    common.add_argument("--format", choices=("text", "csv"), help="stdout format (default text)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")

    parser = ArgumentParser(
        prog="geninv",
        description="Generalized inverses of singular sample covariance matrices",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    which_help = "transform: " + ", ".join(t.value for t in Transform)

    p = sub.add_parser("asymptotic", parents=[common], help="limiting Frobenius norms and NFL")
    p.add_argument("--c", type=float, help="concentration p/n > 1")
    p.add_argument("--spectrum", help="weight:eigenvalue pairs or a preset (identity, figure1)")

    p = sub.add_parser("stieltjes", parents=[common], help="solve a Stieltjes transform at one z")
    p.add_argument("--which", help=which_help)
    p.add_argument("--z-re", type=float)
    p.add_argument("--z-im", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--spectrum")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)

    p = sub.add_parser("density", parents=[common], help="limiting density on a grid")
    p.add_argument("--which", help=which_help)
    p.add_argument("--grid", help="xmin:xmax:npts")
    p.add_argument("--epsilon", type=float, help="distance above the real axis (default 1e-3)")
    p.add_argument("--c", type=float)
    p.add_argument("--spectrum")
    p.add_argument("--include-atom", action="store_true", default=None,
                   help="keep the point mass at zero in the curve")
    p.add_argument("--out", help="CSV output path (stdout if omitted)")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)

    p = sub.add_parser("sweep", parents=[common], help="Monte-Carlo NFL sweep")
    p.add_argument("--c-list", help="comma-separated concentrations, e.g. 1.07,2,10")
    p.add_argument("--p-grid", help="list 50,100 or range 50:500:50")
    p.add_argument("--reps", type=int, help="replications per cell (default 100)")
    p.add_argument("--spectrum")
    p.add_argument("--noise", help="gaussian, rademacher or uniform")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--out", help="rows CSV; the summary goes next to it")

    p = sub.add_parser("figure1", parents=[common], help="the three-concentration NFL study")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--noise")

    p = sub.add_parser("estimate", parents=[common], help="S+ functionals of a data file")
    p.add_argument("--data", help="p x n observation matrix, whitespace separated")
    p.add_argument("--n", type=int, help="sample size used for S = YY'/n (default: columns)")
    p.add_argument("--spectrum", help="population spectrum for the limiting values")
    p.add_argument("--sigma-file", help="dense p x p Sigma for the plug-in equivalents")

    return parser


def _settings(args: argparse.Namespace) -> Dict[str, Any]:
    command = args.command
    config = load_config(args.config, section=command) if args.config else {}
    defaults = {**GLOBAL_DEFAULTS, **DEFAULTS[command]}
    flags = {k: v for k, v in vars(args).items() if k in defaults}
    settings = resolve(flags, config, defaults, defaults.keys())
    if settings["format"] not in ("text", "csv"):
        raise ValidationError(f"--format must be text or csv, got {settings['format']!r}")
    return settings


def _fail(code: ExitCode, kind: str, message: str) -> int:
    sys.stderr.write(f"error kind={kind} message={message}\n")
    return code


def parse_and_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.verbose)
        settings = _settings(args)
        logger.debug("%s settings: %s", args.command, settings)
        return int(COMMANDS[args.command](settings))
    except ValidationError as e:
        return _fail(ExitCode.VALIDATION, e.kind, str(e))
    except NumericalError as e:
        return _fail(ExitCode.NUMERICAL, e.kind, str(e))
    except DataFileError as e:
        return _fail(ExitCode.IO, e.kind, str(e))
    except OSError as e:
        return _fail(ExitCode.IO, "io", str(e))
    except GeninvError as e:
        return _fail(ExitCode.VALIDATION, e.kind, str(e))


def main():
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
