"""Command-line entry point: ``cavmag <task> --config <file> [--out PATH] [--format csv|json] [--seed N]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(singularity, divergence, integrator breakdown), 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import eigen, estimation, lindblad, mechanisms, scattering
from .errors import (
    ConfigError,
    EigenSolverError,
    FitError,
    IntegratorError,
    ModelError,
    SingularEvaluationError,
    SpectrumFileError,
)
from .model import with_detuning
from .io import TASKS, RunSpec, Table, load_spectrum, parse_config, render_results

log = logging.getLogger("cavmag")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def run_spectrum(spec: RunSpec):
    model = spec.build_model()
    f = spec.f_grid.values()
    if spec.directional:
        s = scattering.smatrix_direction(model, f, spec.sigma)
    else:
        s = scattering.transmission_eq13(model, f)
    if spec.snr_db is None:
        return estimation.SpectrumData(f, scattering.to_db(s), np.angle(s))
    seed = 0 if spec.seed is None else spec.seed
    noisy, sigma_db = estimation.add_noise(s, spec.snr_db, seed)
    return estimation.SpectrumData(f, scattering.to_db(noisy), np.angle(noisy), sigma_db)


def run_map(spec: RunSpec):
    model = spec.build_model(delta_m=0.0)
    result = scattering.spectrum_map(model, spec.f_grid.values(), spec.delta_m_grid.values(), skip_singular=True)
    if result.skipped:
        log.warning("%d singular grid points stored as NaN", len(result.skipped))
    return result


def run_dispersion(spec: RunSpec):
    return eigen.dispersion_sweep(spec.build_model(delta_m=0.0), spec.delta_m_grid.values())


def run_eps(spec: RunSpec):
    model = spec.build_model(delta_m=0.0)
    grid = spec.delta_m_grid
    roots = eigen.find_exceptional_points(model, grid.start, grid.stop, num=grid.count)
    rows = []
    for x in roots:
        lam = eigen.two_mode_eigenvalues(with_detuning(model, x))
        mean = 0.5 * (lam[0] + lam[1])
        rows.append([x, mean.real, mean.imag])
    return Table(("delta_m_hz", "re_hz", "im_hz"), rows)


def run_oracle(spec: RunSpec):
    model = spec.build_model()
    opts = spec.oracle
    jump = lindblad.JumpOperatorSpec.from_model(model)
    n_max = opts.get("cutoff", 4)
    rho0 = lindblad.DensityMatrix.coherent(opts.get("amplitude_a", 0.05), opts.get("amplitude_b", 0.0), n_max)
    t_final = opts.get("periods", 3.0) * lindblad.characteristic_period(model)
    rep = lindblad.oracle_report(
        model, jump, rho0, t_final, dt=opts.get("dt"), n_samples=opts.get("samples", 200), frame=opts.get("frame")
    )
    rows = []
    for t, vm, ve, dev in zip(rep.times, rep.master, rep.effective, rep.deviation):
        rows.append([t, vm[0].real, vm[0].imag, vm[1].real, vm[1].imag, ve[0].real, ve[0].imag, ve[1].real, ve[1].imag, dev])
    cols = ("t_s", "a_master_re", "a_master_im", "b_master_re", "b_master_im",
            "a_eff_re", "a_eff_im", "b_eff_re", "b_eff_im", "deviation")
    log.info("oracle max deviation %.3g, trace drift %.3g", rep.max_deviation, rep.trajectory.max_trace_drift)
    return Table(cols, rows, {"max_deviation": rep.max_deviation, "dt_s": rep.dt})


def run_geff_map(spec: RunSpec):
    a = spec.aux
    gmap = mechanisms.aux_geff_map(a["g"], a["delta_grid"].values(), a["kappa_grid"].values(), a.get("window", 5.0))
    rows = []
    for k, kap in enumerate(gmap.kappa_aux):
        for l, d in enumerate(gmap.delta):
            v = gmap.values[k, l]
            rows.append([d, kap, v.real, v.imag])
    return Table(("delta_hz", "kappa_aux_hz", "re_hz", "im_hz"), rows)


def run_electrodynamic(spec: RunSpec):
    base = dict(spec.electrodynamic)
    if spec.delta_m_grid is not None:
        detunings = spec.delta_m_grid.values()
    else:
        detunings = np.array([base["f_m"] - base["f_c"]])
    rows = []
    for dm in detunings:
        p = mechanisms.ElectrodynamicParams(**dict(base, f_m=base["f_c"] + dm))
        g, phi = mechanisms.classify_effective_coupling(p)
        for k, r in enumerate(mechanisms.electrodynamic_roots(p)):
            rows.append([dm, k, r.real, r.imag, g, phi])
    return Table(("delta_m_hz", "root", "re_hz", "im_hz", "g_hz", "phi_rad"), rows)


def run_twotone(spec: RunSpec):
    t = spec.twotone
    rows = []
    for phi in t["phi_grid"].values():
        p = mechanisms.TwoToneParams(t["k"], t["delta"], float(phi))
        v = mechanisms.twotone_effective(p)
        rows.append([phi, v.real, v.imag, mechanisms.twotone_gap(p)])
    return Table(("phi_rad", "re_hz", "im_hz", "gap_hz"), rows)


def run_fit(spec: RunSpec):
    opts = spec.fit
    path = Path(opts["data"])
    if not path.is_absolute():
        path = Path(spec.base_dir) / path
    data = load_spectrum(path)
    par = opts["parameterization"]
    seed = None
    if "seed_params" in opts:
        seed = estimation.initial_guess(data, par)
        seed.update(opts["seed_params"])
    result = estimation.fit_spectrum(
        data,
        seed=seed,
        frozen=opts["frozen"],
        parameterization=par,
        multistart=opts.get("multistart", 5),
        rng=0 if spec.seed is None else spec.seed,
        use_phase=opts.get("use_phase", True),
    )
    log.info("fit %s after %d iterations, residual %.6g", result.status, result.n_iter, result.residual_norm)
    return result


RUNNERS = {
    "spectrum": run_spectrum,
    "map": run_map,
    "dispersion": run_dispersion,
    "eps": run_eps,
    "oracle": run_oracle,
    "geff-map": run_geff_map,
    "electrodynamic": run_electrodynamic,
    "twotone": run_twotone,
    "fit": run_fit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavmag", description="Coupled cavity-magnon calculations from JSON configs.")
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output file (default: config output.path, else stdout)")
    parser.add_argument("--format", choices=("csv", "json"), help="output format (default: config, else csv)")
    parser.add_argument("--seed", type=int, help="noise / multistart seed (overrides config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(spec: RunSpec) -> str:
    """Execute a parsed run and return the serialized output text."""
    result = RUNNERS[spec.task](spec)
    return render_results(result, spec.output_format, spec.db_offset)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        spec = parse_config(args.config, task=args.task)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            spec.seed = args.seed
        if args.format:
            spec.output_format = args.format
        text = run(spec)
        out = args.out
        if out is None and spec.output_path:
            # config-relative, like fit.data
            out = Path(spec.base_dir) / spec.output_path
        if out:
            with open(out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except (ConfigError, ModelError) as exc:
        print(f"cavmag: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularEvaluationError, FitError, EigenSolverError, IntegratorError, ArithmeticError) as exc:
        print(f"cavmag: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, SpectrumFileError) as exc:
        print(f"cavmag: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
