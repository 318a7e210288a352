"""Batch command-line front end.

Subcommands read an INI-style config, run one experiment, and write a CSV
table plus a JSON sidecar (parameters and derived scalars) into the output
directory.  Runs are deterministic: identical configs produce byte-identical
CSV output.

Config schema (sections and keys; all numeric unless noted):

    [model]    n, lattice (rows 'a b; c d' are basis vectors), A (rows),
               scale
    [grid]     x0, s_max, nodes
    [solver]   cutoff, tol, max_iter, torus_resolution, final_order
    [boundary] kind = constant | cosine, amplitude
    [spectrum] count
    [calabi]   a, b, t0, t_end, tol, psi0
    [bessel]   alpha_min, alpha_max, s_min, s_max, points
    [expand]   n, c, order
    [green]    lam_multiples ('1 2 10'), trials, nodes
    [ratefit]  s_lo, s_hi
    [lemma43]  c, k, eps, x_max

Exit codes: 0 ok, 2 invalid config, 3 numerical failure, 4 acceptance
failure in `report`.  The environment variable CUSPLAB_CSV_PRECISION
overrides the 17-significant-digit CSV formatting (debugging only).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import acceptance, analysis, bessel, modes, radial, spectrum
from .errors import ConfigError, CuspLabError
from .grid import RadialGrid
from .model import CuspModel


def _precision() -> int:
    raw = os.environ.get("CUSPLAB_CSV_PRECISION", "17")
    try:
        return max(1, min(17, int(raw)))
    except ValueError:
        return 17


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{_precision()}g}"
    if isinstance(value, complex):
        return f"{value.real:.{_precision()}g}{value.imag:+.{_precision()}g}j"
    return str(value)


def write_csv(path: Path, header: list, rows: list):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    return obj


def write_json(path: Path, payload: dict):
    with open(path, "w") as fh:
        json.dump(_jsonify(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_matrix(text: str) -> np.ndarray:
    rows = [r.strip() for r in text.split(";") if r.strip()]
    return np.array([[complex(v) if ("j" in v or "J" in v) else float(v) for v in r.split()] for r in rows])


def load_config(path: str) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    read = cfg.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found or unreadable")
    return cfg


def build_model(cfg: configparser.ConfigParser) -> CuspModel:
    try:
        sec = cfg["model"]
        n = sec.getint("n")
        lattice = np.real(_parse_matrix(sec.get("lattice"))).T  # rows are basis vectors
        A = _parse_matrix(sec.get("A"))
        scale = sec.getfloat("scale", fallback=1.0)
        return CuspModel(n=n, lattice=lattice, A=A, scale=scale)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid [model] section: {exc}") from exc


def build_grid(cfg: configparser.ConfigParser) -> RadialGrid:
    try:
        sec = cfg["grid"]
        return RadialGrid.make(sec.getfloat("x0"), sec.getfloat("s_max"), sec.getint("nodes"))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid [grid] section: {exc}") from exc


def _resolved(cfg: configparser.ConfigParser) -> dict:
    return {s: dict(cfg[s]) for s in cfg.sections()}


def _boundary_from_config(cfg, grid, n) -> dict:
    sec = cfg["boundary"] if cfg.has_section("boundary") else {}
    kind = sec.get("kind", "constant")
    amp = float(sec.get("amplitude", "0"))
    dims = 2 * (n - 1)
    zero = (0,) * dims
    if kind == "constant":
        return {zero: amp}
    if kind == "cosine":
        k = tuple([1] + [0] * (dims - 1))
        mk = tuple(-i for i in k)
        return {k: amp / 2.0, mk: amp / 2.0}
    raise ConfigError(f"unknown boundary kind {kind!r}")


# --- subcommand implementations ---


def cmd_spectrum(cfg, out_dir: Path) -> dict:
    model = build_model(cfg)
    count = cfg.getint("spectrum", "count", fallback=12)
    entries = spectrum.eigenvalues_up_to(model, count)
    rows = [[i, " ".join(str(k) for k in e.k), e.lam] for i, e in enumerate(entries)]
    write_csv(out_dir / "spectrum.csv", ["index", "mode", "lambda"], rows)
    lam1 = next(e.lam for e in entries if e.lam > 0)
    return {"lambda1": lam1, "count": count}


def cmd_geometry_check(cfg, out_dir: Path) -> dict:
    result = acceptance.criterion_a9()
    rows = [[k, v] for k, v in sorted(result.details.items())]
    write_csv(out_dir / "geometry-check.csv", ["check", "value"], rows)
    return {"passed": result.passed, **result.details}


def cmd_calabi(cfg, out_dir: Path) -> dict:
    sec = cfg["calabi"] if cfg.has_section("calabi") else {}
    n = cfg.getint("model", "n", fallback=2)
    a = float(sec.get("a", "0"))
    b = float(sec.get("b", "0"))
    t0 = float(sec.get("t0", "-1"))
    t_end = float(sec.get("t_end", "-50"))
    tol = float(sec.get("tol", "1e-12"))
    psi0 = float(sec.get("psi0", "0"))
    traj = radial.integrate_calabi(n, a, b, t0, t_end, tol, psi0)
    fi = traj.first_integral()
    rows = [[t, p, pp, f] for t, p, pp, f in zip(traj.t_nodes, traj.psi, traj.psi_prime, fi)]
    write_csv(out_dir / "calabi.csv", ["t", "psi", "psi_prime", "first_integral"], rows)
    payload = {
        "first_integral_drift": traj.first_integral_drift(),
        "ode_residual": traj.ode_residual(),
        "breakdown_t": traj.breakdown_t,
    }
    if b > 0:
        angle, empirical = radial.cone_angle(n, b)
        payload["cone_angle"] = angle
        payload["cone_angle_empirical"] = 2.0 * np.pi * empirical
    return payload


def cmd_bessel_sweep(cfg, out_dir: Path) -> dict:
    sec = cfg["bessel"] if cfg.has_section("bessel") else {}
    a_min = int(sec.get("alpha_min", "4"))
    a_max = int(sec.get("alpha_max", "8"))
    s_min = float(sec.get("s_min", "0.5"))
    s_max = float(sec.get("s_max", "500"))
    points = int(sec.get("points", "120"))
    s = np.geomspace(s_min, s_max, points)
    rows = []
    worst = 0.0
    for alpha in range(a_min, a_max + 1):
        iv = bessel.bessel_i_scaled(alpha, s)
        kv = bessel.bessel_k_scaled(alpha, s)
        r_abel, r_mode = bessel.wronskian_residuals(alpha, s)
        worst = max(worst, float(np.max(r_abel)), float(np.max(r_mode)))
        for i, sv in enumerate(s):
            rows.append([alpha, sv, iv.mantissa[i], kv.mantissa[i], r_abel[i], r_mode[i]])
    write_csv(
        out_dir / "bessel-sweep.csv",
        ["alpha", "s", "i_scaled", "k_scaled", "abel_residual", "mode_wronskian_residual"],
        rows,
    )
    return {"max_residual": worst}


def cmd_expand(cfg, out_dir: Path) -> dict:
    sec = cfg["expand"] if cfg.has_section("expand") else {}
    n = int(sec.get("n", "2"))
    c = float(sec.get("c", "1"))
    order = int(sec.get("order", "20"))
    series = radial.expand_formal(n, -(n + 1) * c, order)
    target = radial.tangent_cone_coefficients(n, c, order)
    rows = []
    worst = 0.0
    for k in range(1, order + 1):
        rel = abs(series.coeffs[k] - target[k]) / abs(target[k])
        worst = max(worst, rel)
        rows.append([k, series.coeffs[k], target[k], rel])
    write_csv(out_dir / "expand.csv", ["k", "coefficient", "closed_form", "rel_err"], rows)
    return {"max_rel_err": worst, "equation_residual": radial.series_equation_residual(series)}


def cmd_green_test(cfg, out_dir: Path) -> dict:
    result = acceptance.criterion_a4()
    rows = [[k, v] for k, v in sorted(result.details.items())]
    write_csv(out_dir / "green-test.csv", ["check", "value"], rows)
    return {"passed": result.passed, **result.details}


def cmd_solve(cfg, out_dir: Path) -> dict:
    model = build_model(cfg)
    grid = build_grid(cfg)
    sec = cfg["solver"] if cfg.has_section("solver") else {}
    boundary = _boundary_from_config(cfg, grid, model.n)
    u, state = modes.picard_solve(
        model,
        boundary,
        grid,
        torus_resolution=int(sec.get("torus_resolution", "16")),
        cutoff=float(sec.get("cutoff", "9")),
        tol=float(sec.get("tol", "1e-10")),
        max_iter=int(sec.get("max_iter", "40")),
        final_order=int(sec.get("final_order", "4")),
    )
    c_fit, c_rms = modes.extract_tangent_cone(u, model.n)
    mode1_key = tuple([1] + [0] * (2 * model.d - 1))
    prof1 = u.modes.get(mode1_key)
    rows = []
    u0 = u.radial_mean()
    for i, (xv, sv) in enumerate(zip(grid.x, grid.s)):
        row = [xv, sv, u0[i]]
        if prof1 is not None:
            row.append(2.0 * prof1[i].real)
        rows.append(row)
    header = ["x", "s", "u_mode0"] + (["u_mode1_cos"] if prof1 is not None else [])
    write_csv(out_dir / "solve.csv", header, rows)
    return {
        "iterations": state.iteration,
        "sup_change": state.sup_change,
        "contraction_history": state.contraction_history,
        "tangent_cone_c": c_fit,
        "tangent_cone_rms": c_rms,
        **state.diagnostics,
    }


def cmd_rate_fit(cfg, out_dir: Path) -> dict:
    model = build_model(cfg)
    grid = build_grid(cfg)
    sec = cfg["solver"] if cfg.has_section("solver") else {}
    boundary = _boundary_from_config(cfg, grid, model.n)
    u, state = modes.picard_solve(
        model,
        boundary,
        grid,
        torus_resolution=int(sec.get("torus_resolution", "16")),
        cutoff=float(sec.get("cutoff", "25")),
        tol=float(sec.get("tol", "1e-11")),
        max_iter=int(sec.get("max_iter", "40")),
        final_order=int(sec.get("final_order", "4")),
    )
    lam1 = state.diagnostics["lambda1"]
    rsec = cfg["ratefit"] if cfg.has_section("ratefit") else {}
    s_lo = float(rsec.get("s_lo", "40"))
    s_hi = float(rsec.get("s_hi", "200"))
    window = analysis.window_from_s(lam1, s_lo, s_hi)
    mode1_key = tuple([1] + [0] * (2 * model.d - 1))
    prof = np.abs(u.modes[mode1_key])
    fit = analysis.decay_fit(grid.x, prof, window, mode="free_delta")
    mask = (grid.x >= window[0]) & (grid.x <= window[1])
    env = fit.amplitude * grid.x[mask] ** fit.p * np.exp(-fit.delta / np.sqrt(grid.x[mask]))
    rows = [[xv, pv, ev] for xv, pv, ev in zip(grid.x[mask], prof[mask], env)]
    write_csv(out_dir / "rate-fit.csv", ["x", "remainder", "fitted_model"], rows)
    return {
        "delta": fit.delta,
        "delta_target": 2.0 * np.sqrt(lam1),
        "p": fit.p,
        "p_target": -model.n / 2.0 + 0.25,
        "amplitude": fit.amplitude,
        "rms": fit.rms,
        "residual_sup": state.diagnostics["residual_sup"],
    }


def cmd_lemma43(cfg, out_dir: Path) -> dict:
    sec = cfg["lemma43"] if cfg.has_section("lemma43") else {}
    c = float(sec.get("c", "2"))
    k = float(sec.get("k", "0"))
    eps = float(sec.get("eps", "1"))
    x_max = float(sec.get("x_max", "10"))
    report = analysis.lemma43_check(c, k, x_max, eps)
    xs = np.geomspace(1e-6, x_max, 60)
    r1 = analysis.ratio_lower(c, k, xs)
    rows = [[xv, rv] for xv, rv in zip(xs, r1)]
    write_csv(out_dir / "lemma43.csv", ["x", "r1"], rows)
    return {
        "sup_r1": report.sup_r1,
        "limit_r1": report.limit_r1,
        "sup_r2": report.sup_r2,
        "x0_admissible": report.x0_admissible,
        "passed": report.passed,
    }


def cmd_report(cfg, out_dir: Path) -> dict:
    results = acceptance.run_all()
    # no timings in the CSV: outputs must be byte-identical across reruns
    rows = [[r.name, r.passed] for r in results]
    write_csv(out_dir / "report.csv", ["criterion", "passed"], rows)
    payload = {
        "criteria": {
            r.name: {"passed": r.passed, "seconds": r.seconds, **r.details} for r in results
        },
        "all_passed": all(r.passed for r in results),
    }
    for r in results:
        print(r.line())
    return payload


COMMANDS = {
    "spectrum": cmd_spectrum,
    "geometry-check": cmd_geometry_check,
    "calabi": cmd_calabi,
    "bessel-sweep": cmd_bessel_sweep,
    "expand": cmd_expand,
    "green-test": cmd_green_test,
    "solve": cmd_solve,
    "rate-fit": cmd_rate_fit,
    "lemma43": cmd_lemma43,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cusplab", description="Cusp metric numerical laboratory")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", help="path to the INI config file")
    parser.add_argument("-o", "--out-dir", default=".", help="output directory")
    args = parser.parse_args(argv)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        cfg = load_config(args.config)
        payload = COMMANDS[args.command](cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CuspLabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    sidecar = {"command": args.command, "config": _resolved(cfg), "results": payload}
    write_json(out_dir / f"{args.command}.json", sidecar)
    if args.command == "report" and not payload["all_passed"]:
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
