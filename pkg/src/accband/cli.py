"""Command-line driver.

Modes:
  zonal      solve the steady zonal profile; emit CSV + SVG, a method
             cross-check table when lam = 0, and a short spectrum report
  spectrum   leading eigenvalues of the homogeneous band problem
  evolve     time-step the band flow from the zonal state (optionally
             perturbed); emit diagnostics CSV + checkpoints
  stability  evolve a seeded perturbation and track both sides of the
             zonal-stability identity

Configuration comes from an INI-style file (sections [band], [grid],
[run]; '#' comments) and/or flags, flags winning. Unknown keys are hard
errors. Exit codes: 0 ok, 1 invalid configuration, 2 numerical failure,
3 I/O failure.
"""

import argparse
import math
import sys
import threading
from dataclasses import dataclass, replace

import numpy as np

from .errors import AccBandError, ConfigError, NumericalError, ParseError, ValidationError
from .geometry import BandConfig
from .grids import AnnulusGrid
from . import diagnostics, euler2d, svgplot, zonal
from .sturm_liouville import eigen_solve, zonal_homogeneous_problem

MODES = ("zonal", "evolve", "stability", "spectrum")
ZONAL_METHODS = ("fd", "closed_form", "picard", "sl_expansion")

_SCHEMA = {
    "band": {
        "theta1_deg": float, "theta2_deg": float, "psi1": float, "psi2": float,
        "omega": float, "lambda": float, "upsilon": float, "u_scale": float,
    },
    "grid": {"n_rho": int, "n_phi": int, "n_zonal": int},
    "run": {
        "mode": str, "dt": float, "t_end": float, "output_stride": int,
        "method": str, "amplitude": float, "wavenumber": int, "seed": int,
    },
}

_DEFAULTS = {
    "theta1_deg": -60.0, "theta2_deg": -50.0, "psi1": -5.0, "psi2": -25.0,
    "omega": 4650.0, "lambda": 0.0, "upsilon": 0.0, "u_scale": 0.1,
    "n_rho": 128, "n_phi": 128, "n_zonal": 2001,
    "mode": None, "dt": 0.0, "t_end": 1.0, "output_stride": 1,
    "method": "fd", "amplitude": 0.0, "wavenumber": 3, "seed": 0,
}


@dataclass
class RunSpec:
    mode: str
    config: BandConfig
    n_rho: int
    n_phi: int
    n_zonal: int
    dt: float
    t_end: float
    output_stride: int
    method: str
    amplitude: float
    wavenumber: int
    seed: int
    out_dir: str


def _parse_file(path):
    """Strict key = value reader with line numbers."""
    values = {}
    section = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip()
                if section not in _SCHEMA:
                    raise ParseError(f"unknown section [{section}]", line=lineno)
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", line=lineno)
            if section is None:
                raise ParseError("key outside of any section", line=lineno)
            key, _, text = line.partition("=")
            key = key.strip()
            text = text.strip()
            if key not in _SCHEMA[section]:
                raise ParseError(f"unknown key in [{section}]", line=lineno, key=key)
            try:
                values[key] = _SCHEMA[section][key](text)
            except ValueError:
                raise ParseError(f"cannot parse value {text!r}", line=lineno, key=key)
    return values


def parse_config(path=None, overrides=None, out_dir="accband_out") -> RunSpec:
    """Merge defaults, an optional config file, and flag overrides."""
    values = dict(_DEFAULTS)
    if path is not None:
        values.update(_parse_file(path))
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val

    if values["mode"] is None:
        raise ValidationError("mode is required (zonal, evolve, stability, spectrum)")
    if values["mode"] not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {values['mode']!r}")
    if values["method"] not in ZONAL_METHODS:
        raise ValidationError(f"method must be one of {ZONAL_METHODS}")
    if values["mode"] in ("evolve", "stability") and not values["dt"] > 0:
        raise ValidationError("dt must be positive for evolve/stability runs")
    if values["amplitude"] < 0:
        raise ValidationError("amplitude must be nonnegative")
    if values["output_stride"] < 1:
        raise ValidationError("output_stride must be at least 1")

    config = BandConfig(
        theta1=math.radians(values["theta1_deg"]),
        theta2=math.radians(values["theta2_deg"]),
        psi1=values["psi1"], psi2=values["psi2"], omega=values["omega"],
        lam=values["lambda"], upsilon=values["upsilon"],
        u_scale=values["u_scale"],
    )
    return RunSpec(
        mode=values["mode"], config=config,
        n_rho=values["n_rho"], n_phi=values["n_phi"], n_zonal=values["n_zonal"],
        dt=values["dt"], t_end=values["t_end"],
        output_stride=values["output_stride"], method=values["method"],
        amplitude=values["amplitude"], wavenumber=values["wavenumber"],
        seed=values["seed"], out_dir=str(out_dir),
    )


# ==================================================================
# Modes
# ==================================================================

def _solve_profile(spec, method=None):
    method = method or spec.method
    if method == "closed_form":
        return zonal.solve_closed_form_lambda0(spec.config, spec.n_zonal)
    if method == "picard":
        return zonal.solve_picard(spec.config, spec.n_zonal)
    if method == "sl_expansion":
        return zonal.solve_sl_expansion(spec.config)
    return zonal.solve_fd(spec.config, spec.n_zonal)


def _spectrum_report(spec, out, n_eigen=5):
    prob = zonal_homogeneous_problem(spec.config)
    spectrum = eigen_solve(prob, n_max=n_eigen, grid_size=2049)
    lam = spec.config.lam
    lines = ["index,eigenvalue,rel_distance_to_lambda"]
    for k, mu in enumerate(spectrum.eigenvalues, start=1):
        rel = abs(lam - mu) / max(abs(mu), 1.0)
        lines.append(f"{k},{float(mu)!r},{float(rel)!r}")
    near = [float(mu) for mu in spectrum.eigenvalues
            if abs(lam - mu) / max(abs(mu), 1.0) < 1e-6]
    if near:
        lines.append(f"# WARNING lambda={lam} is within rel 1e-6 of {near}")
    (out / "spectrum.csv").write_text("\n".join(lines) + "\n")
    return spectrum


def run_mode_zonal(spec, out):
    profile = _solve_profile(spec)
    zonal.write_profile_csv(profile, out / "profile.csv")
    svgplot.line_plot(
        out / "profile.svg",
        [math.degrees(t) for t in profile.thetas], profile.u_dimensional,
        xlabel="latitude [deg]", ylabel="zonal velocity [m/s]",
        title=f"zonal velocity (lambda={spec.config.lam:g}, "
              f"upsilon={spec.config.upsilon:g})",
    )
    _spectrum_report(spec, out)
    if spec.config.lam == 0.0:
        profiles = {m: _solve_profile(spec, m)
                    for m in ("closed_form", "fd", "picard")}
        lines = ["method_a,method_b,sup_difference"]
        names = sorted(profiles)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                pa, pb = profiles[a], profiles[b]
                diff = np.max(np.abs(
                    np.interp(pb.thetas, pa.thetas, pa.psi) - pb.psi
                ))
                lines.append(f"{a},{b},{float(diff)!r}")
        (out / "zonal_crosscheck.csv").write_text("\n".join(lines) + "\n")
    return 0


def run_mode_spectrum(spec, out):
    _spectrum_report(spec, out, n_eigen=10)
    return 0


def _initial_state(spec, grid):
    if spec.amplitude > 0:
        return euler2d.perturbed_zonal_state(
            spec.config, grid, spec.amplitude, spec.wavenumber, spec.seed
        )
    return euler2d.zonal_initial_state(spec.config, grid)


def _write_summary(out, records):
    import json

    (out / "summary.json").write_text(
        json.dumps(diagnostics.summary(records), indent=2, sort_keys=True) + "\n"
    )


def run_mode_evolve(spec, out):
    grid = AnnulusGrid.from_band(spec.config, spec.n_rho, spec.n_phi)
    state = _initial_state(spec, grid)
    reference = euler2d.zonal_initial_state(spec.config, grid)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    _, records = euler2d.run(
        spec.config, grid, state.zeta, state.lambda_circ,
        t_end=spec.t_end, dt=spec.dt, output_stride=spec.output_stride,
        csv_path=out / "diagnostics.csv", checkpoint_dir=str(ckpt_dir),
        reference=reference,
    )
    _write_summary(out, records)
    bound = euler2d.xi_bound(spec.config, state.zeta.values)
    breaches = []
    if any(rec.max_xi > bound + 1e-10 for rec in records):
        breaches.append("max|xi| exceeded the transport bound")
    circ0 = records[0].circ1
    if any(abs(rec.circ1 - circ0) > 1e-8 * max(1.0, abs(circ0)) for rec in records):
        breaches.append("inner-wall circulation drifted beyond 1e-8")
    if breaches:
        print("invariant breach: " + "; ".join(breaches), file=sys.stderr)
        return 2
    return 0


def run_mode_stability(spec, out):
    if spec.config.lam > 0:
        print(
            "warning: lambda > 0 gives no stability guarantee; "
            "the identity is still tracked",
            file=sys.stderr,
        )
    grid = AnnulusGrid.from_band(spec.config, spec.n_rho, spec.n_phi)
    reference = euler2d.zonal_initial_state(spec.config, grid)
    state = _initial_state(spec, grid)
    rhs = diagnostics.stability_lhs(state, reference)
    with open(out / "stability.csv", "w", newline="") as fh:
        fh.write("t,lhs,rhs,defect\n")

        def observer(s, rec):
            lhs = rec.stability_lhs
            fh.write(f"{float(s.t)!r},{float(lhs)!r},{float(rhs)!r},"
                     f"{float(lhs - rhs)!r}\n")
            fh.flush()

        _, records = euler2d.run(
            spec.config, grid, state.zeta, state.lambda_circ,
            t_end=spec.t_end, dt=spec.dt, output_stride=spec.output_stride,
            csv_path=out / "diagnostics.csv", reference=reference,
            observers=(observer,),
        )
    _write_summary(out, records)
    return 0


# ==================================================================
# Entry point
# ==================================================================

def read_csv(path):
    """Bundled reader for every CSV this tool emits (roundtrip checks).

    Returns (header, columns); numeric cells become floats, the rest stay
    strings. Comment lines starting with '#' are skipped.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh
                 if ln.strip() and not ln.lstrip().startswith("#")]
    header = lines[0].split(",")
    columns = {name: [] for name in header}
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(header):
            raise ParseError(f"row has {len(cells)} cells, header has {len(header)}")
        for name, cell in zip(header, cells):
            try:
                columns[name].append(float(cell))
            except ValueError:
                columns[name].append(cell)
    return header, columns


def build_arg_parser():
    parser = argparse.ArgumentParser(
        prog="accband",
        description="Zonal jets and barotropic dynamics on a spherical band",
    )
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--config", help="INI-style scenario file")
    parser.add_argument("--out", default="accband_out", help="output directory")
    parser.add_argument("--n-rho", type=int, dest="n_rho")
    parser.add_argument("--n-phi", type=int, dest="n_phi")
    parser.add_argument("--n-zonal", type=int, dest="n_zonal")
    parser.add_argument("--dt", type=float)
    parser.add_argument("--t-end", type=float, dest="t_end")
    parser.add_argument("--output-stride", type=int, dest="output_stride")
    parser.add_argument("--method", choices=ZONAL_METHODS)
    parser.add_argument("--lambda", type=float, dest="lambda_")
    parser.add_argument("--upsilon", type=float)
    parser.add_argument("--psi1", type=float)
    parser.add_argument("--psi2", type=float)
    parser.add_argument("--theta1-deg", type=float, dest="theta1_deg")
    parser.add_argument("--theta2-deg", type=float, dest="theta2_deg")
    parser.add_argument("--omega", type=float)
    parser.add_argument("--u-scale", type=float, dest="u_scale")
    parser.add_argument("--amplitude", type=float)
    parser.add_argument("--wavenumber", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--sweep", help="comma-separated lambda values to fan out")
    return parser


def _overrides_from_args(args):
    mapping = {
        "mode": args.mode, "n_rho": args.n_rho, "n_phi": args.n_phi,
        "n_zonal": args.n_zonal, "dt": args.dt, "t_end": args.t_end,
        "output_stride": args.output_stride, "method": args.method,
        "lambda": args.lambda_, "upsilon": args.upsilon,
        "psi1": args.psi1, "psi2": args.psi2,
        "theta1_deg": args.theta1_deg, "theta2_deg": args.theta2_deg,
        "omega": args.omega, "u_scale": args.u_scale,
        "amplitude": args.amplitude, "wavenumber": args.wavenumber,
        "seed": args.seed,
    }
    return mapping


def dispatch(spec: RunSpec) -> int:
    import pathlib

    out = pathlib.Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = {
        "zonal": run_mode_zonal,
        "spectrum": run_mode_spectrum,
        "evolve": run_mode_evolve,
        "stability": run_mode_stability,
    }[spec.mode]
    return runner(spec, out)


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        spec = parse_config(args.config, _overrides_from_args(args), args.out)
        if args.sweep:
            lams = [float(tok) for tok in args.sweep.split(",") if tok.strip()]
            if not lams:
                raise ValidationError("--sweep needs at least one lambda value")
            results = {}

            def worker(lam_value):
                sub = replace(
                    spec,
                    config=replace(spec.config, lam=lam_value),
                    out_dir=f"{spec.out_dir}/sweep_{lam_value:g}",
                )
                results[lam_value] = dispatch(sub)

            threads = [threading.Thread(target=worker, args=(v,)) for v in lams]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            return max(results.values(), default=0)
        return dispatch(spec)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 1
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    except AccBandError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
