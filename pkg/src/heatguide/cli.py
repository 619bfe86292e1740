"""Command-line entry point: ``heatguide <command> --config run.json --out results/``.

Every command writes into a staging directory that is moved into place only
after the command succeeded; ``manifest.json`` (file names and sha256 sums) is
written last.  Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import shutil
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

from .config import COMMANDS, ConfigError, RunConfig, load_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _fmt(v) -> str:
    if isinstance(v, (int, str)) and not isinstance(v, bool):
        return str(v)
    return repr(float(v))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_grid_field(path: Path, points, values) -> None:
    """Real field on grid points: ``x1,x2,x3,value``."""
    import numpy as np

    write_csv(path, ["x1", "x2", "x3", "value"], (np.append(p, v) for p, v in zip(points, np.real(values))))


def _write_resolvent(path: Path, field) -> None:
    """Complex field snapshot: ``x1,x2,x3,re,im,lambda,provenance``."""
    import numpy as np

    vals = np.asarray(field.values, complex)
    write_csv(path, ["x1", "x2", "x3", "re_U", "im_U", "lambda", "provenance"],
              ([*p, v.real, v.imag, field.lam, field.provenance] for p, v in zip(field.points, vals)))


def _field_stats(values) -> dict:
    import numpy as np

    v = np.real(values)
    return {"min": float(v.min()), "max": float(v.max())}


def _center(solution, source) -> float:
    """Real part of the extended solution at the domain centre."""
    import numpy as np

    lo, hi = solution.grid.domain.bounds
    return float(np.real(solution.evaluate(0.5 * (lo + hi), source))[0])


# ---------------------------------------------------------------- builders

def _medium(p):
    from .particles import Box, MediumSpec

    h = complex(*p.impedance) if isinstance(p.impedance, list) else float(p.impedance)
    return MediumSpec(Box(tuple(p.domain["lo"]), tuple(p.domain["hi"])), float(p.density), h, float(p.kappa))


def _source(sc):
    from .core import BallSource

    return BallSource(tuple(sc.center), sc.radius, sc.amplitude, sc.profile)


def _target(spec):
    from .gelfand_levitan import SpectralTarget

    if spec == "default":
        return SpectralTarget.default()
    if spec == "baseline":
        return SpectralTarget.baseline(0)
    return SpectralTarget(tuple(spec["nus"]), tuple(spec["alphas"]))


def _potential(p, base: Path):
    from .gelfand_levitan import Potential1D, design_potential

    if getattr(p, "potential_csv", None):
        return None, Potential1D.from_csv(base / p.potential_csv)
    target = _target(p.target)
    _, _, Q = design_potential(target, p.design_grid)
    return target, Q


# ---------------------------------------------------------------- commands

def cmd_simulate_manybody(cfg: RunConfig, out: Path) -> dict:
    import numpy as np

    from .core import free_field
    from .manybody import ResolventField, interaction_ratio_diagnostic, solve_full_las, solve_reduced_las
    from .particles import generate_cloud

    p = cfg.params
    spec, src = _medium(p), _source(p.source)
    cloud = generate_cloud(spec, p.a, cfg.seed, c_S=p.c_S)
    (out / "cloud.json").write_text(cloud.to_json() + "\n")
    F = ResolventField(p.lam, cloud.centers, free_field(cloud.centers, p.lam, src), "free-field")
    _write_resolvent(out / "free_field.csv", F)
    summary = {"M": cloud.M, "d_min": cloud.d_min if np.isfinite(cloud.d_min) else None}
    if cloud.M <= p.full_cap:
        full = solve_full_las(cloud, p.lam, src, cap=p.full_cap)
        _write_resolvent(out / "field.csv", full)
        summary["full_condition"] = full.meta["cond"]
        summary["full_minus_free_sup"] = float(np.max(np.abs(full.values - F.values)))
    if p.reduced_b is not None:
        red = solve_reduced_las(cloud, spec, p.reduced_b, p.lam, src, own_cube=p.own_cube)
        _write_resolvent(out / "reduced_field.csv", red)
        summary["P"] = red.meta["partition"].P
    if cloud.M >= 2:
        summary["interaction_ratio_bound"] = interaction_ratio_diagnostic(cloud, p.lam).bound
    return summary


def cmd_homogenize(cfg: RunConfig, out: Path) -> dict:
    import numpy as np

    from .homogenize import ContinuumGrid, PotentialField, solve_resolvent_ie, stationary_average
    from .laplace import tauberian_limit

    p = cfg.params
    spec, src = _medium(p), _source(p.source)
    grid = ContinuumGrid(spec.domain, (p.grid,) * 3)
    q = PotentialField.from_medium(grid, spec, p.c_S)
    summary = {"cells": grid.n_cells, "resolvent": []}
    for k, lam in enumerate(p.lams):
        sol = solve_resolvent_ie(grid, q, lam, src)
        _write_resolvent(out / f"resolvent_{k}.csv", sol.field)
        summary["resolvent"].append({"lam": lam, "residual": sol.residual, "condition": sol.cond,
                                     **_field_stats(sol.values), "center_value": _center(sol, src)})
    if p.stationary or p.average_check:
        st = stationary_average(grid, q, src)
        _write_grid_field(out / "stationary.csv", grid.centers, st.values)
        summary["stationary"] = {"residual": st.residual, "condition": st.cond, "warnings": st.warnings,
                                 **_field_stats(st.values), "center_value": _center(st, src)}
        if p.average_check:
            lim = tauberian_limit(lambda lam: solve_resolvent_ie(grid, q, lam, src).values,
                                  lam0=p.lam0, variable="sqrt")
            diff = float(np.max(np.abs(lim.value - st.values)))
            summary["average_check"] = {"sup_difference": diff, "extrapolation_error": lim.error}
    return summary


def _closed_form_pairs():
    import numpy as np

    # name -> (transform, signal, long-time average)
    return {
        "constant": (lambda lam: 1.0 / lam, lambda t: np.ones_like(t), 1.0),
        "exp_decay": (lambda lam: 1.0 / (lam + 1.0), lambda t: np.exp(-t), 0.0),
        "one_minus_exp": (lambda lam: 1.0 / lam - 1.0 / (lam + 1.0), lambda t: 1.0 - np.exp(-t), 1.0),
    }


def cmd_tauberian(cfg: RunConfig, out: Path) -> dict:
    import numpy as np

    from .laplace import invert_real_axis, tauberian_limit

    p = cfg.params
    rows, summary = [], {}
    times = np.asarray(p.times, float)
    pairs = _closed_form_pairs()
    for name in p.pairs:
        transform, signal, average = pairs[name]
        lim = tauberian_limit(transform, lam0=p.lam0, levels=p.levels)
        u = invert_real_axis(transform, times, p.order)
        rows.append([name, lim.value, lim.error, average])
        write_csv(out / f"inversion_{name}.csv", ["t", "value", "exact"], zip(times, u, signal(times)))
        summary[name] = {"limit": lim.value, "limit_error": abs(lim.value - average),
                         "inversion_max_error": float(np.max(np.abs(u - signal(times))))}
    write_csv(out / "tauberian.csv", ["pair", "limit", "error_bar", "exact"], rows)
    return summary


def cmd_design_potential(cfg: RunConfig, out: Path) -> dict:
    import numpy as np

    from .gelfand_levitan import design_potential, write_descriptor

    p = cfg.params
    kernel, tk, Q = design_potential(_target(p.target), p.grid, p.method)
    Q.to_csv(out / "potential.csv")
    write_descriptor(out / "kernel.json", kernel)
    return {"rank": kernel.rank, "grid": p.grid, "method": p.method,
            "Q_sup": float(np.max(np.abs(Q.values))), "max_condition": float(np.max(tk.cond))}


def cmd_eigencheck(cfg: RunConfig, out: Path) -> dict:
    import numpy as np

    from .gelfand_levitan import SpectralTarget, radial_lift
    from .sturm_liouville import dirichlet_spectrum, normalization_asymptotics, radial_spectrum, write_eigen_table

    p = cfg.params
    target, Q = _potential(p, cfg.base_dir)
    pairs = dirichlet_spectrum(Q, p.count, p.grid_n)
    write_eigen_table(out / "dirichlet.csv", pairs)
    nus = np.array([e.eigenvalue for e in pairs])
    n, n2 = p.grid_n, 2 * p.grid_n
    # unextrapolated errors shrink ~4x per grid doubling for a second-order scheme
    ratio = [(e.raw[n] - e.eigenvalue) / (e.raw[n2] - e.eigenvalue) if e.raw[n2] != e.eigenvalue else None
             for e in pairs]
    summary = {"eigenvalues": nus.tolist(), "raw_error_ratio": ratio}
    ref = (target or SpectralTarget.default()).spectrum(p.count)
    dev = np.abs(nus - ref)
    summary["target"] = ref.tolist()
    summary["max_deviation"] = float(dev.max())
    summary["within_tolerance"] = bool(np.all(dev <= p.tolerance))
    if p.radial:
        rad = radial_spectrum(radial_lift(Q), p.count, p.grid_n)
        write_eigen_table(out / "radial.csv", rad)
        summary["radial_max_difference"] = float(max(abs(a.eigenvalue - b.eigenvalue) for a, b in zip(rad, pairs)))
    if p.asymptotics_j_max:
        tab = normalization_asymptotics(Q, p.asymptotics_j_max, "dirichlet", p.grid_n)
        write_csv(out / "asymptotics.csv", ["j", "alpha", "sqrt_lambda_minus_j"], tab.rows())
        summary["gap_constant"] = tab.gap_constant(5)
    return summary


def cmd_waveguide_demo(cfg: RunConfig, out: Path) -> dict:
    import numpy as np

    from .gelfand_levitan import radial_lift
    from .sturm_liouville import dirichlet_spectrum, radial_spectrum
    from .waveguide import (assemble_spectrum, confinement_metric, decay_slope, gaussian_bump, project,
                            residual_norm, signal_trace)

    p = cfg.params
    _, Q = _potential(p, cfg.base_dir)
    axial = dirichlet_spectrum(Q, p.axial_modes, p.grid_n)
    radial = radial_spectrum(radial_lift(Q), p.radial_modes, p.grid_n)
    spec = assemble_spectrum(radial, axial, p.modes)
    (out / "spectrum.json").write_text(spec.to_json() + "\n")
    f = gaussian_bump(p.bump["s0"], p.bump["sigma"], p.bump["amplitude"])
    modal = project(spec, f)
    t0, t1 = p.fit_window
    slope = decay_slope(spec, modal, t0, t1)
    t_fit = np.linspace(t0, t1, 41)
    write_csv(out / "decay.csv", ["t", "residual_norm"], zip(t_fit, residual_norm(spec, modal, t_fit)))
    conf = confinement_metric(spec)
    write_csv(out / "confinement.csv", ["rho", "abs_v1"], zip(conf.rho, conf.profile))
    probes = [(s, 0.0) for s in p.probe_s] + [(s, p.off_axis_fraction * spec.R) for s in p.probe_s]
    times = sorted(set(float(t) for t in p.times))
    trace = signal_trace(spec, f, probes, times, modal=modal)
    trace.to_csv(out / "trace.csv")
    n = len(p.probe_s)
    late = np.asarray(times) >= 1.0
    on, off = np.abs(trace.values[:n][:, late]), np.abs(trace.values[n:][:, late])
    return {
        "lambdas_head": spec.lambdas[:5].tolist(),
        "decay_slope": slope,
        "lambda_2": float(spec.lambdas[1]),
        "confinement_ratio": conf.ratio,
        "off_axis_below_on_axis": bool(np.all(off < on)) if late.any() else None,
        "f_norm": modal.f_norm,
    }


def cmd_convergence_study(cfg: RunConfig, out: Path) -> dict:
    from .studies import convergence_study

    p = cfg.params
    result = convergence_study(p.a_values, cfg.seed, lam=p.lam, source=_source(p.source), ie_grid=p.ie_grid,
                               own_cube=p.own_cube, probe_levels=p.probe_levels, full_cap=p.full_cap,
                               b_exponent=p.b_exponent)
    write_csv(out / "convergence.csv", result.header, result.rows())
    return result.summary()


COMMAND_FUNCS = {
    "simulate-manybody": cmd_simulate_manybody,
    "homogenize": cmd_homogenize,
    "tauberian": cmd_tauberian,
    "design-potential": cmd_design_potential,
    "eigencheck": cmd_eigencheck,
    "waveguide-demo": cmd_waveguide_demo,
    "convergence-study": cmd_convergence_study,
}


# ---------------------------------------------------------------- driver

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(cfg: RunConfig, out: Path) -> int:
    """Execute one command; returns the exit status."""
    import numpy as np

    from .core import DomainError, SolverError

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    try:
        summary = COMMAND_FUNCS[cfg.command](cfg, stage)
        write_json(stage / "summary.json", _jsonable(summary))
        write_json(stage / "config.json", _jsonable(cfg.to_dict()))
    except (DomainError, SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        shutil.rmtree(stage, ignore_errors=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    (out / "manifest.json").unlink(missing_ok=True)
    files = {}
    for item in sorted(stage.iterdir()):
        target = out / item.name
        os.replace(item, target)
        files[item.name] = _sha256(target)
    stage.rmdir()
    write_json(out / "manifest.json", {"command": cfg.command, "seed": cfg.seed, "files": files})
    return EXIT_OK


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable(asdict(obj))
    return obj


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatguide", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, default=None, help="JSON run configuration")
        sp.add_argument("--out", type=Path, required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")
        sp.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread count")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: threads: must be positive", file=sys.stderr)
            return EXIT_CONFIG
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    try:
        cfg = load_config(args.command, args.config, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg, args.out)
    except ValueError as exc:
        # invalid parameter combinations caught by the library before any numerics
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
