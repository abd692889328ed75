"""Command-line front-end: evaluations, sweeps, polarizabilities and the oracle.

Exit status: 0 success, 1 usage or configuration error, 2 numerical
non-convergence, 3 oracle bracketing failure.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .bounds import QuadratureSettings, force_bounds, matsubara_force_bounds
from .config import COMMANDS, SweepConfig, UsageError, load_config, merge, parse_values
from .errors import InputError, NumericalError
from .materials import (
    AXES, GOLD, DipoleSpec, Dispersionless, Drude, EllipsoidSpec, Tabulated,
    depolarization_factors, ellipsoid_polarizability,
)
from .oracle import REPORT_HEADER, run_trials

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_BRACKET = 0, 1, 2, 3

# keys that do not change the numbers and are left out of the metadata header
_VOLATILE = ("output", "svg", "workers")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cpbounds", description="Casimir-Polder force bounds for a dipole "
                "above a planar half-space domain.")
    p.add_argument("command", nargs="?", choices=COMMANDS, help="what to run")
    p.add_argument("--version", action="version", version=f"cpbounds {__version__}")
    p.add_argument("--config", help="key = value configuration file (flags override it)")

    groups = {}

    def opt(group, *names, switch=False, **kw):
        g = groups.setdefault(group, p.add_argument_group(group))
        if switch:
            kw.update(action="store_const", const=True)
        g.add_argument(*names, default=None, **kw)

    opt("material", "--material", choices=("const", "drude", "gold", "table"))
    opt("material", "--chi0", type=float, help="dispersionless susceptibility")
    opt("material", "--omega-p", dest="omega_p", type=float, help="Drude plasma frequency (rad/s)")
    opt("material", "--gamma", type=float, help="Drude damping (rad/s)")
    opt("material", "--table", help="two-column file: xi (rad/s), chi")
    opt("material", "--pec", switch=True,
        help="perfect conductor (half-space, or ellipsoid for polarizability)")
    opt("dipole", "--alpha-par", dest="alpha_par", type=float, help="in-plane polarizability (nm^3)")
    opt("dipole", "--alpha-perp", dest="alpha_perp", type=float, help="normal polarizability (nm^3)")
    opt("dipole", "--ratio", type=float, help="alpha_perp / alpha_par")
    opt("dipole", "--iso", switch=True, help="isotropic dipole (ratio 1)")
    opt("dipole", "--d", type=float, help="separation from the domain (nm), default 100")
    opt("dipole", "--axis", choices=("z", "x"), help="force component: normal z or lateral x")
    opt("sweeps", "--ratios", help="ratio grid, min:max:count[(log)] or comma list")
    opt("sweeps", "--chis", help="chi0 grid")
    opt("sweeps", "--distances", help="separation grid (nm)")
    opt("sweeps", "--temperature", type=float, help="temperature (K) for matsubara")
    opt("polarizability", "--axes", help="ellipsoid full axes a,b,c in nm (first along the normal)")
    opt("polarizability", "--semi", switch=True, help="interpret --axes as semi-axes")
    opt("polarizability", "--eps", type=float, help="static permittivity (default perfect conductor)")
    opt("oracle", "--trials", type=int, help="number of randomized trials")
    opt("oracle", "--seed", type=int, help="base seed")
    opt("output", "--tol", type=float, help="relative quadrature tolerance")
    opt("output", "--output", "-o", dest="output", help="output file (default stdout)")
    opt("output", "--svg", help="also render a log-log chart to this path")
    opt("output", "--workers", type=int, help="worker threads (capped by CP_BOUNDS_THREADS)")
    return p


def parse_args(argv) -> SweepConfig:
    ns = vars(build_parser().parse_args(argv))
    file_values = load_config(ns.pop("config")) if ns.get("config") else {}
    ns.pop("config", None)
    return merge(file_values, ns)


# ------------------------------------------------------------------ builders


def make_material(cfg: SweepConfig):
    kind = cfg.material
    if kind is None:
        if cfg.pec or cfg.chi0 is not None:
            kind = "const"
        elif cfg.table:
            kind = "table"
        elif cfg.omega_p is not None or cfg.gamma is not None:
            kind = "drude"
        else:
            kind = "gold"
    if kind == "const":
        if cfg.pec:
            return Dispersionless(math.inf)
        if cfg.chi0 is None:
            raise UsageError("material const needs --chi0 or --pec")
        return Dispersionless(cfg.chi0)
    if kind == "drude":
        if cfg.omega_p is None or cfg.gamma is None:
            raise UsageError("material drude needs --omega-p and --gamma")
        return Drude(cfg.omega_p, cfg.gamma)
    if kind == "table":
        if not cfg.table:
            raise UsageError("material table needs --table PATH")
        return Tabulated.from_file(cfg.table)
    return GOLD


def make_dipole(cfg: SweepConfig, ratio=None, d=None) -> DipoleSpec:
    a_par = 1.0 if cfg.alpha_par is None else cfg.alpha_par
    if ratio is not None:
        a_perp = ratio * a_par
    elif cfg.alpha_perp is not None:
        a_perp = cfg.alpha_perp
    elif cfg.ratio is not None:
        a_perp = cfg.ratio * a_par
    else:
        a_perp = a_par
    return DipoleSpec(a_par, a_perp, cfg.d if d is None else d, cfg.axis)


def worker_count(cfg: SweepConfig) -> int:
    n = cfg.workers or (os.cpu_count() or 1)
    cap = os.environ.get("CP_BOUNDS_THREADS")
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise UsageError(f"CP_BOUNDS_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def _map(fn, items, workers):
    # results come back in input order regardless of scheduling
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ------------------------------------------------------------------ output


def fmt(v) -> str:
    return f"{float(v):.17g}"


def metadata_lines(cfg: SweepConfig) -> list:
    lines = [f"# cpbounds {__version__}"]
    for key, value in cfg.as_dict().items():
        if key not in _VOLATILE:
            lines.append(f"# {key} = {value}")
    return lines


def force_columns(var: str, raw: bool) -> list:
    cols = [var, "F_minus", "F_planar", "F_plus"]
    if raw:
        cols += ["F_minus_N", "F_planar_N", "F_plus_N"]
    for b in AXES:
        cols += [f"minus_{b}", f"planar_{b}", f"plus_{b}"]
    return cols + ["quad_error"]


def force_row(value, res, raw: bool) -> list:
    row = [value, res.F_minus, res.F_planar, res.F_plus]
    if raw:
        row += [res.F_minus_N, res.F_planar_N, res.F_plus_N]
    for b in AXES:
        row += list(res.channels[b])
    return row + [res.error_estimate]


def write_csv(stream, meta: list, columns: list, rows: list) -> None:
    for line in meta:
        stream.write(line + "\n")
    stream.write(",".join(columns) + "\n")
    for row in rows:
        stream.write(",".join(fmt(v) for v in row) + "\n")


def render_svg(path, columns, rows, title="") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    data = np.array(rows, dtype=float)
    x = data[:, 0]
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in ("F_minus", "F_planar", "F_plus"):
        y = np.abs(data[:, columns.index(name)])
        ax.plot(x, y, label=f"|{name}|")
    ax.set_xscale("log" if np.all(x > 0) else "symlog")
    ax.set_yscale("log")
    ax.set_xlabel(columns[0])
    ax.set_ylabel("normalized force")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ------------------------------------------------------------------ commands


def _quad(cfg):
    return QuadratureSettings(rtol=cfg.tol)


def _force_table(cfg: SweepConfig):
    raw = cfg.alpha_par is not None or cfg.alpha_perp is not None
    quad = _quad(cfg)
    workers = worker_count(cfg)
    d = cfg.d
    if cfg.command == "bounds":
        var, values = "d_nm", [d]
        mat = make_material(cfg)
        results = [force_bounds(make_dipole(cfg), mat, quad)]
    elif cfg.command == "matsubara":
        if cfg.temperature is None:
            raise UsageError("matsubara needs --temperature")
        var, values = "temperature_K", [cfg.temperature]
        mat = make_material(cfg)
        results = [matsubara_force_bounds(make_dipole(cfg), mat, cfg.temperature, quad=quad)]
    elif cfg.command == "sweep-ratio":
        var, values = "ratio", list(parse_values(cfg.ratios))
        mat = make_material(cfg)
        results = _map(lambda r: force_bounds(make_dipole(cfg, ratio=r), mat, quad), values, workers)
    elif cfg.command == "sweep-chi":
        var, values = "chi0", list(parse_values(cfg.chis))
        dip = make_dipole(cfg)
        results = _map(lambda c: force_bounds(dip, Dispersionless(c), quad), values, workers)
    else:
        var, values = "d_nm", list(parse_values(cfg.distances))
        mat = make_material(cfg)
        results = _map(lambda dd: force_bounds(make_dipole(cfg, d=dd), mat, quad), values, workers)
    columns = force_columns(var, raw)
    rows = [force_row(v, r, raw) for v, r in zip(values, results)]
    return columns, rows


def _polarizability_table(cfg: SweepConfig):
    if not cfg.axes:
        raise UsageError("polarizability needs --axes a,b,c")
    try:
        axes = [float(v) for v in str(cfg.axes).split(",")]
    except ValueError:
        raise UsageError(f"bad --axes {cfg.axes!r}") from None
    if len(axes) != 3:
        raise UsageError("--axes takes exactly three values")
    semi = axes if cfg.semi else [a / 2 for a in axes]
    eps = None if cfg.pec or cfg.eps is None else cfg.eps
    spec = EllipsoidSpec(semi, eps)
    L = depolarization_factors(*spec.semi_axes)
    alpha = ellipsoid_polarizability(spec)
    columns = ["semi_a_nm", "semi_b_nm", "semi_c_nm", "L_a", "L_b", "L_c",
               "alpha_a_nm3", "alpha_b_nm3", "alpha_c_nm3", "ratio"]
    return columns, [list(spec.semi_axes) + list(L) + list(alpha) + [alpha[0] / alpha[1]]]


def _emit(cfg, text: str):
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(cfg: SweepConfig) -> int:
    """Execute one configured command; returns the exit status."""
    buf = io.StringIO()
    meta = metadata_lines(cfg)
    if cfg.command == "oracle":
        if cfg.svg:
            raise UsageError("--svg does not apply to oracle")
        records = run_trials(cfg.trials, cfg.seed, worker_count(cfg))
        for line in meta:
            buf.write(line + "\n")
        buf.write(REPORT_HEADER + "\n")
        for rec in records:
            buf.write(rec.line() + "\n")
        _emit(cfg, buf.getvalue())
        failed = sum(not r.passed for r in records)
        if failed:
            print(f"cpbounds: {failed} of {len(records)} oracle trials failed to bracket",
                  file=sys.stderr)
            return EXIT_BRACKET
        return EXIT_OK
    if cfg.command == "polarizability":
        if cfg.svg:
            raise UsageError("--svg does not apply to polarizability")
        columns, rows = _polarizability_table(cfg)
    else:
        columns, rows = _force_table(cfg)
    write_csv(buf, meta, columns, rows)
    _emit(cfg, buf.getvalue())
    if cfg.svg:
        render_svg(cfg.svg, columns, rows, title=cfg.command)
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run(parse_args(argv))
    except NumericalError as exc:
        print(f"cpbounds: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, InputError, OSError) as exc:
        print(f"cpbounds: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
