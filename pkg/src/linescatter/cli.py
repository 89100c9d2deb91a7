"""Command-line front end.

Subcommands: j-table, smatrix, fidelity-scan, convergence, evolve, validate.
Flags override values from an optional TOML config file, which override the
built-in defaults (the parameter choices of the numerical study).  Errors
print a JSON envelope on stderr and exit with a stable code: 2 usage,
3 numerical domain, 4 convergence, 5 internal.
"""

from __future__ import annotations

import json
import math
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import LinescatterError, NonPositiveInfidelityError
from .evolution import EvolutionPlan, evolve, extract_scattering_overlap, prepare_state, time_oracle_overlap
from .gate import (
    QuadratureSpec,
    TwoQubitInput,
    WavepacketSpec,
    fidelity_scan,
    gate_fidelity,
    gate_overlap_detailed,
    infidelity_fit,
)
from .green import green_quadrature_limit, green_table
from .params import DEFAULT_K1, DEFAULT_K2, DEFAULT_U, InteractionConfig, MomentumPair, Statistics
from .scattering import (
    asymptotic_boson_phase,
    asymptotic_reflection_transmission,
    finite_kernel,
    s_matrix_element,
    shell_partner,
)
from .toeplitz import build_kernel

FMT = "%.17g"


def _fmt(x: float) -> str:
    return FMT % x


def _parse_grid(spec: str) -> list[float]:
    """Grid spec: comma-separated values or 'start:stop:count' (inclusive)."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise click.UsageError(f"grid spec must be 'start:stop:count', got {spec!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise click.UsageError("grid count must be >= 1")
        return list(np.linspace(start, stop, count))
    vals = [float(tok) for tok in spec.split(",") if tok.strip()]
    if not vals:
        raise click.UsageError("empty grid")
    return vals


def _parse_int_list(spec: str) -> list[int]:
    vals = [int(tok) for tok in spec.split(",") if tok.strip()]
    if not vals:
        raise click.UsageError("empty list")
    return vals


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _setting(flag, cfg: dict, key: str, default):
    """Precedence: explicit flag > config file > default."""
    if flag is not None:
        return flag
    if key in cfg:
        return cfg[key]
    return default


def _emit_error(exc: Exception) -> int:
    code = getattr(exc, "exit_code", 5)
    envelope = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    click.echo(json.dumps(envelope), err=True)
    return code


def _write_text(path: str | None, text: str):
    if path is None or path == "-":
        click.echo(text, nl=False)
    else:
        Path(path).write_text(text)


def _statistics(name: str) -> Statistics:
    try:
        return Statistics(name)
    except ValueError:
        raise click.UsageError(f"unknown statistics {name!r}")


@click.group()
@click.version_option(version=__version__)
def main():
    """Exact finite-region two-particle scattering on the line."""


@main.command("j-table")
@click.option("--E", "energy", type=float, default=None, help="Total energy in (-4, 4).")
@click.option("--nmax", type=int, default=None, help="Largest |n| tabulated.")
@click.option("--oracle", is_flag=True, help="Add quadrature-oracle columns and relative errors.")
@click.option("--tol", type=float, default=None, help="Oracle extrapolation stop tolerance.")
@click.option("--out", type=str, default=None, help="Output CSV path (default: stdout).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def cmd_j_table(energy, nmax, oracle, tol, out, config_path):
    """Tabulate the pair Green's-function coefficients G(E, n)."""
    cfg = _load_config(config_path)
    energy = float(_setting(energy, cfg, "E", math.sqrt(2.0)))
    nmax = int(_setting(nmax, cfg, "nmax", 20))
    tol = float(_setting(tol, cfg, "tol", 1e-7))
    try:
        table = green_table(energy, nmax)
        rows = ["E,n,re_j,im_j" + (",re_oracle,im_oracle,rel_err" if oracle else "")]
        oracle_vals = None
        if oracle:
            oracle_vals = green_quadrature_limit(energy, np.arange(0, nmax + 1), stop_tol=tol)
        for n in range(0, nmax + 1):
            val = table[n]
            row = ",".join([_fmt(energy), str(n), _fmt(val.real), _fmt(val.imag)])
            if oracle:
                ref = oracle_vals[n]
                rel = abs(val - ref) / max(abs(ref), 1e-300)
                row += "," + ",".join([_fmt(ref.real), _fmt(ref.imag), _fmt(rel)])
            rows.append(row)
        _write_text(out, "\n".join(rows) + "\n")
    except LinescatterError as exc:
        sys.exit(_emit_error(exc))


@main.command("smatrix")
@click.option("--p1", type=float, default=None, help="Incoming momentum 1.")
@click.option("--p2", type=float, default=None, help="Incoming momentum 2.")
@click.option("--k1", type=float, default=None, help="Outgoing momentum 1 (default: shell partner).")
@click.option("--k2", type=float, default=None, help="Outgoing momentum 2.")
@click.option("--U", "strength", type=float, default=None)
@click.option("--L", "half_width", type=int, default=None)
@click.option("--statistics", type=click.Choice([s.value for s in Statistics]), default=None)
@click.option("--out", type=str, default=None, help="Output JSON path (default: stdout).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def cmd_smatrix(p1, p2, k1, k2, strength, half_width, statistics, out, config_path):
    """One S-matrix element as (delta structure, smooth kernel)."""
    cfg = _load_config(config_path)
    p1 = float(_setting(p1, cfg, "p1", DEFAULT_K2))
    p2 = float(_setting(p2, cfg, "p2", DEFAULT_K1))
    strength = float(_setting(strength, cfg, "U", DEFAULT_U))
    half_width = int(_setting(half_width, cfg, "L", 5))
    statistics = _statistics(_setting(statistics, cfg, "statistics", Statistics.BOSON.value))
    try:
        in_pair = MomentumPair(p1, p2, statistics)
        if k1 is None and k2 is None:
            out_pair = in_pair
        else:
            k1 = float(k1 if k1 is not None else p1)
            k2 = float(k2 if k2 is not None else shell_partner(in_pair.energy(), k1))
            out_pair = MomentumPair(k1, k2, statistics)
        config = InteractionConfig(U=strength, L=half_width, statistics=statistics)
        elem = s_matrix_element(in_pair, out_pair, config)
        payload = {
            "delta_part": elem.delta_part.value,
            "kernel_re": elem.kernel.real,
            "kernel_im": elem.kernel.imag,
            "on_shell": elem.on_shell,
            "E_in": elem.energy_in,
            "E_out": elem.energy_out,
            "L": half_width,
            "U": strength,
            "b": statistics.b,
        }
        _write_text(out, json.dumps(payload, indent=2) + "\n")
    except LinescatterError as exc:
        sys.exit(_emit_error(exc))


def _scan_csv(reports) -> str:
    rows = ["L,sigma,re_f,im_f,f_at_minus_half_pi,phi_star,f_max,quad_tol,error"]
    for r in reports:
        rows.append(
            ",".join(
                [
                    str(r.L),
                    _fmt(r.sigma),
                    _fmt(r.f_complex.real),
                    _fmt(r.f_complex.imag),
                    _fmt(r.fidelity_at(-math.pi / 2.0)) if r.ok else "nan",
                    _fmt(r.phi_star),
                    _fmt(r.f_max),
                    _fmt(r.quad_error),
                    r.error.replace(",", ";"),
                ]
            )
        )
    return "\n".join(rows) + "\n"


def _plateau(reports, width: float = 0.05):
    """Widest sigma-window with F(-pi/2) spread < 0.02, if one exists."""
    pts = sorted((r.sigma, r.fidelity_at(-math.pi / 2.0)) for r in reports if r.ok)
    best = None
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            lo, hi = pts[i][0], pts[j][0]
            if hi - lo < width:
                continue
            vals = [f for s, f in pts if lo <= s <= hi]
            if max(vals) - min(vals) < 0.02:
                if best is None or hi - lo > best[1] - best[0]:
                    best = (lo, hi)
    return best


@main.command("fidelity-scan")
@click.option("--k1", type=float, default=None)
@click.option("--k2", type=float, default=None)
@click.option("--U", "strength", type=float, default=None)
@click.option("--L", "half_widths", type=str, default=None, help="Comma-separated L values.")
@click.option("--sigma", "sigma_grid", type=str, default=None,
              help="Sigma grid: comma list or start:stop:count.")
@click.option("--grid", "sigma_grid_alias", type=str, default=None, help="Alias for --sigma.")
@click.option("--tol", type=float, default=None, help="Quadrature tolerance on the overlap.")
@click.option("--threads", type=int, default=None)
@click.option("--statistics", type=click.Choice([s.value for s in Statistics]), default=None)
@click.option("--out", type=str, default=None, help="CSV output path (default: stdout).")
@click.option("--summary-out", type=str, default=None, help="JSON summary path.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def cmd_fidelity_scan(k1, k2, strength, half_widths, sigma_grid, sigma_grid_alias, tol,
                      threads, statistics, out, summary_out, config_path):
    """CPHASE fidelity over a (sigma, L) grid; emits CSV plus a JSON summary."""
    cfg = _load_config(config_path)
    k1 = float(_setting(k1, cfg, "k1", DEFAULT_K1))
    k2 = float(_setting(k2, cfg, "k2", DEFAULT_K2))
    strength = float(_setting(strength, cfg, "U", DEFAULT_U))
    half_widths = _parse_int_list(_setting(half_widths, cfg, "L", "5,10,20"))
    grid_spec = _setting(sigma_grid or sigma_grid_alias, cfg, "sigma", "0.05:0.3:11")
    sigmas = _parse_grid(grid_spec)
    tol = float(_setting(tol, cfg, "tol", 1e-6))
    threads = int(_setting(threads, cfg, "threads", 1))
    statistics = _statistics(_setting(statistics, cfg, "statistics", Statistics.BOSON.value))
    quad = QuadratureSpec(rel_tol=tol)
    try:
        reports = fidelity_scan(
            (k1, k2), strength, sigmas, half_widths, quad=quad,
            statistics=statistics, threads=threads,
        )
        _write_text(out, _scan_csv(reports))
        summary = {
            "U": strength, "k1": k1, "k2": k2,
            "L": half_widths, "sigma": sigmas,
            "points": len(reports),
            "failures": sum(0 if r.ok else 1 for r in reports),
            "plateau": {},
        }
        for L in half_widths:
            sub = [r for r in reports if r.L == L and r.ok]
            if sub:
                band = _plateau(sub)
                summary["plateau"][str(L)] = list(band) if band else None
                summary.setdefault("best_fidelity", {})[str(L)] = max(
                    r.fidelity_at(-math.pi / 2.0) for r in sub
                )
        if summary_out:
            _write_text(summary_out, json.dumps(summary, indent=2) + "\n")
    except LinescatterError as exc:
        sys.exit(_emit_error(exc))


@main.command("convergence")
@click.option("--L", "half_widths", type=str, default=None, help="Comma-separated L values.")
@click.option("--sigma", "sigma_grid", type=str, default=None)
@click.option("--k1", type=float, default=None)
@click.option("--k2", type=float, default=None)
@click.option("--U", "strength", type=float, default=None)
@click.option("--tol", type=float, default=None)
@click.option("--threads", type=int, default=None)
@click.option("--synthetic", type=str, default=None,
              help="Inject an exact power law 'a,beta' instead of computing.")
@click.option("--from-csv", "from_csv", type=click.Path(exists=True), default=None,
              help="Fit columns L,infidelity from an existing CSV instead of computing.")
@click.option("--out", type=str, default=None, help="CSV of (L, sigma_opt, infidelity).")
@click.option("--json-out", type=str, default=None, help="Fit JSON path (default: stdout).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def cmd_convergence(half_widths, sigma_grid, k1, k2, strength, tol, threads, synthetic,
                    from_csv, out, json_out, config_path):
    """Power-law fit of the minimum-over-sigma infidelity versus L."""
    cfg = _load_config(config_path)
    half_widths = _parse_int_list(_setting(half_widths, cfg, "L", "4,6,8,12,16,24,32"))
    try:
        if synthetic is not None:
            a, beta = (float(tok) for tok in synthetic.split(","))
            ls = half_widths
            infids = [a * L ** beta for L in ls]
            opt_sigma = [float("nan")] * len(ls)
        elif from_csv is not None:
            ls, infids, opt_sigma = [], [], []
            for line in Path(from_csv).read_text().splitlines():
                if not line or line.lower().startswith("l,"):
                    continue
                parts = line.split(",")
                ls.append(int(float(parts[0])))
                infids.append(float(parts[-1]))
                opt_sigma.append(float("nan"))
            if any(v <= 0 for v in infids):
                raise NonPositiveInfidelityError("input file contains non-positive infidelities")
        else:
            k1 = float(_setting(k1, cfg, "k1", DEFAULT_K1))
            k2 = float(_setting(k2, cfg, "k2", DEFAULT_K2))
            strength = float(_setting(strength, cfg, "U", DEFAULT_U))
            grid_spec = _setting(sigma_grid, cfg, "sigma", "0.04,0.06,0.09,0.12,0.16,0.2,0.24,0.28,0.32")
            sigmas = _parse_grid(grid_spec)
            tol = float(_setting(tol, cfg, "tol", 1e-6))
            threads = int(_setting(threads, cfg, "threads", 1))
            quad = QuadratureSpec(rel_tol=tol)
            reports = fidelity_scan((k1, k2), strength, sigmas, half_widths,
                                    quad=quad, threads=threads)
            ls, infids, opt_sigma = [], [], []
            for L in half_widths:
                sub = [r for r in reports if r.L == L and r.ok]
                if not sub:
                    continue
                best = min(sub, key=lambda r: 1.0 - r.fidelity_at(-math.pi / 2.0))
                ls.append(L)
                infids.append(1.0 - best.fidelity_at(-math.pi / 2.0))
                opt_sigma.append(best.sigma)
        fit = infidelity_fit(ls, infids)
        if out:
            rows = ["L,sigma_opt,infidelity"]
            for L, s, v in zip(ls, opt_sigma, infids):
                rows.append(f"{L},{_fmt(s)},{_fmt(v)}")
            _write_text(out, "\n".join(rows) + "\n")
        payload = {
            "a": fit.prefactor, "beta": fit.exponent,
            "residual": fit.residual, "points": fit.points,
        }
        _write_text(json_out, json.dumps(payload, indent=2) + "\n")
    except LinescatterError as exc:
        sys.exit(_emit_error(exc))


@main.command("evolve")
@click.option("--M", "n_sites", type=int, default=None, help="Truncated-line size.")
@click.option("--T", "total_time", type=float, default=None)
@click.option("--U", "strength", type=float, default=None)
@click.option("--L", "half_width", type=int, default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--k1", type=float, default=None)
@click.option("--k2", type=float, default=None)
@click.option("--x1", type=float, default=None, help="Launch offset of packet 1 (sites).")
@click.option("--x2", type=float, default=None, help="Launch offset of packet 2 (sites).")
@click.option("--statistics", type=click.Choice([s.value for s in Statistics]), default=None)
@click.option("--leak-tol", type=float, default=None)
@click.option("--out", "out_prefix", type=str, default=None,
              help="Prefix for snapshot dumps (.npy) and metadata (.json).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def cmd_evolve(n_sites, total_time, strength, half_width, sigma, k1, k2, x1, x2,
               statistics, leak_tol, out_prefix, config_path):
    """Evolve two launched wavepackets and extract the scattering overlap."""
    cfg = _load_config(config_path)
    n_sites = int(_setting(n_sites, cfg, "M", 256))
    strength = float(_setting(strength, cfg, "U", DEFAULT_U))
    half_width = int(_setting(half_width, cfg, "L", 5))
    sigma = float(_setting(sigma, cfg, "sigma", 0.1))
    k1 = float(_setting(k1, cfg, "k1", DEFAULT_K1))
    k2 = float(_setting(k2, cfg, "k2", DEFAULT_K2))
    statistics = _statistics(_setting(statistics, cfg, "statistics", Statistics.BOSON.value))
    leak_tol = float(_setting(leak_tol, cfg, "leak_tol", 1e-2))
    try:
        config = InteractionConfig(U=strength, L=half_width, statistics=statistics)
        wp1 = WavepacketSpec(k1, sigma)
        wp2 = WavepacketSpec(k2, sigma)
        if x1 is None and x2 is None and total_time is None:
            result = time_oracle_overlap(wp1, wp2, config, n_sites=n_sites, leak_tol=leak_tol)
            overlap, plan, offsets = result.overlap, result.plan, result.offsets
            initial = prepare_state(wp1, wp2, offsets, n_sites, statistics=statistics)
            final = evolve(initial, plan)
        else:
            v1, v2 = 2.0 * math.sin(k1), 2.0 * math.sin(k2)
            tstar = 0.42 * (n_sites // 2) / max(abs(v1), abs(v2))
            offsets = (
                float(x1) if x1 is not None else -v1 * tstar,
                float(x2) if x2 is not None else -v2 * tstar,
            )
            total_time = float(total_time) if total_time is not None else tstar + (half_width + 30.0) / min(abs(v1), abs(v2))
            plan = EvolutionPlan(total_time=total_time, config=config, leak_tol=leak_tol)
            initial = prepare_state(wp1, wp2, offsets, n_sites, statistics=statistics)
            final = evolve(initial, plan)
            overlap = extract_scattering_overlap(initial, final, plan)
        meta = {
            "M": n_sites, "T": plan.total_time, "U": strength, "L": half_width,
            "sigma": sigma, "centers": [k1, k2], "offsets": list(offsets),
            "statistics": statistics.value,
            "norm": final.norm(),
            "overlap_re": overlap.real, "overlap_im": overlap.imag,
            "fidelity_at_minus_half_pi": gate_fidelity(overlap, -math.pi / 2.0),
        }
        if out_prefix:
            np.save(f"{out_prefix}_final.npy", final.amplitudes)
            np.save(f"{out_prefix}_initial.npy", initial.amplitudes)
            Path(f"{out_prefix}_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
        click.echo(json.dumps(meta, indent=2))
    except LinescatterError as exc:
        sys.exit(_emit_error(exc))


@main.command("validate")
@click.option("--statistics", type=click.Choice([s.value for s in Statistics]), default=None)
@click.option("--M", "n_sites", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--tol", type=float, default=None, help="Oracle agreement tolerance.")
@click.option("--out", type=str, default=None, help="Report JSON path (default: stdout).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def cmd_validate(statistics, n_sites, seed, tol, out, config_path):
    """Cross-module property suite; exit 0 only if every check passes."""
    cfg = _load_config(config_path)
    statistics = _statistics(_setting(statistics, cfg, "statistics", Statistics.BOSON.value))
    n_sites = int(_setting(n_sites, cfg, "M", 256))
    seed = int(_setting(seed, cfg, "seed", 7))
    tol = float(_setting(tol, cfg, "tol", 0.05))
    checks = {}
    degraded = []
    ok = True

    def record(name, passed, detail):
        nonlocal ok
        checks[name] = {"passed": bool(passed), "detail": detail}
        ok = ok and bool(passed)

    try:
        # closed-form asymptotic phase
        phase = asymptotic_boson_phase(DEFAULT_K2, DEFAULT_K1, DEFAULT_U)
        record("asymptotic_phase", abs(phase + 1j) <= 1e-12, {"value": [phase.real, phase.imag]})

        # Green's-function oracle agreement at the scan energy
        table = green_table(math.sqrt(2.0), 3)
        oracle = green_quadrature_limit(math.sqrt(2.0), np.arange(0, 4))
        rels = [abs(table[n] - oracle[n]) / abs(oracle[n]) for n in range(4)]
        record("green_oracle", max(rels) <= 1e-6, {"max_rel_err": max(rels)})

        # solver residual on a random symmetric Toeplitz system
        rng = np.random.default_rng(seed)
        config = InteractionConfig(U=DEFAULT_U, L=6, statistics=statistics)
        kern = build_kernel(math.sqrt(2.0), config)
        rhs = rng.standard_normal(kern.size) + 1j * rng.standard_normal(kern.size)
        x = kern.solve(rhs)
        resid = float(np.linalg.norm(kern.matrix() @ x - rhs, np.inf) / np.linalg.norm(rhs, np.inf))
        record("solver_residual", resid <= 1e-10, {"residual": resid})

        # asymptotic unitarity on a momentum grid
        worst = 0.0
        for p1 in np.linspace(-3.0, 3.0, 10):
            for p2 in np.linspace(-3.0, 3.0, 10):
                r, t = (abs(v) ** 2 for v in
                        asymptotic_reflection_transmission(p1, p2, DEFAULT_U))
                worst = max(worst, abs(r + t - 1.0))
        record("asymptotic_unitarity", worst <= 1e-14, {"max_dev": worst})

        # interaction effects vanish identically for fermions
        if statistics is Statistics.FERMION:
            kern_val = finite_kernel(0.3, 0.1, math.sqrt(2.0), config)
            record("fermion_null", kern_val == 0.0, {"kernel": [kern_val.real, kern_val.imag]})

        # stationary overlap against the time-evolution oracle
        wp1 = WavepacketSpec(DEFAULT_K1, 0.1)
        wp2 = WavepacketSpec(DEFAULT_K2, 0.1)
        oracle_cfg = InteractionConfig(U=DEFAULT_U, L=5, statistics=statistics)
        try:
            result = time_oracle_overlap(wp1, wp2, oracle_cfg, n_sites=n_sites)
            static, _ = gate_overlap_detailed(TwoQubitInput(wp1, wp2), oracle_cfg)
            diff = abs(result.overlap - static)
            record("time_oracle", diff <= tol,
                   {"static": [static.real, static.imag],
                    "oracle": [result.overlap.real, result.overlap.imag],
                    "abs_diff": diff})
        except (LinescatterError,) as exc:
            if getattr(exc, "exit_code", 5) == 4:
                # small-M runs legitimately leak; degraded, not failed
                degraded.append({"check": "time_oracle", "reason": f"{type(exc).__name__}: {exc}"})
            else:
                raise

        report = {"passed": ok, "degraded": degraded, "checks": checks,
                  "statistics": statistics.value, "M": n_sites, "seed": seed}
        _write_text(out, json.dumps(report, indent=2) + "\n")
        if not ok:
            sys.exit(4)
    except LinescatterError as exc:
        sys.exit(_emit_error(exc))


if __name__ == "__main__":
    main()
