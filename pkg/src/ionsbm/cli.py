"""Command-line front end.

Every subcommand reads one TOML file (``--config``), writes CSV/text files
into ``--out-dir`` and exits with 0 on success, 2 for configuration errors,
3 for numerical failures and 4 when a size cap is exceeded.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, kernels
from .config import (
    TWO_PI, build_objects, grid_times, load_toml, set_path, validate,
)
from .errors import CapExceededError, ConfigError, IonSBMError, ParameterError
from .output import emit_csv, emit_text

SUBCOMMANDS = ("sd", "sd-fit", "corr", "corr-dist", "simulate", "nonmarkov", "ion-params", "chain",
               "chain-evolve")


def _hz(x):
    return np.asarray(x) / TWO_PI


# --------------------------------------------------------------------------- runners

def run_sd(cfg, obj, out, meta):
    from . import correlation, spectral

    s = cfg.values["sd"]
    omega = np.linspace(s["f_min"], s["f_max"], s["n_points"])
    target = obj["target"]
    cols = [("omega_hz", _hz(omega)), ("omega_rad_s", omega), ("j_eff", target(omega))]
    comp = obj.get("composite")
    if comp is not None and (s["hbar_beta_s"] is not None or s["nbar"] is not None):
        hb = s["hbar_beta_s"]
        if hb is None:
            ref = s["nbar_ref"] if s["nbar_ref"] is not None else comp.components[0].omega_m
            hb = correlation.nbar_to_hbar_beta(s["nbar"], ref)
        with np.errstate(invalid="ignore", divide="ignore"):
            cols += [("j_tilde", spectral.eval_regression_composite(comp, hb, omega)),
                     ("epsilon_j", spectral.relative_error_epsilon_j(comp, hb, omega))]
    return [emit_csv(cols, out / "sd.csv", meta)], []


def run_sd_fit(cfg, obj, out, meta):
    from . import spectral

    f = cfg.values["sd_fit"]
    target = obj["target"]
    grid = None
    if f["f_max"] is not None:
        grid = np.linspace(0.0, f["f_max"], f["n_points"])
    elif hasattr(target, "support_max"):
        grid = np.linspace(0.0, target.support_max(), f["n_points"])
    res = spectral.fit_spectral_density(target, f["n_components"], grid, n_restarts=f["n_restarts"],
                                        seed=f["seed"])
    comps = res.density.components
    files = [
        emit_csv([("index", list(range(len(comps)))),
                  ("lambda_hz", [_hz(c.lam) for c in comps]),
                  ("kappa_hz", [_hz(c.kappa) for c in comps]),
                  ("omega_m_hz", [_hz(c.omega_m) for c in comps])], out / "sd_fit.csv", meta),
        emit_csv([("iteration", list(range(len(res.history)))), ("objective", res.history)],
                 out / "sd_fit_history.csv", meta),
    ]
    summary = [("objective", res.residual), ("relative_objective", res.relative_residual),
               ("restart", res.restart)]
    for i, c in enumerate(comps):
        summary += [(f"component[{i}].lambda_hz", float(_hz(c.lam))), (f"component[{i}].kappa_hz", float(_hz(c.kappa))),
                    (f"component[{i}].omega_m_hz", float(_hz(c.omega_m)))]
    files.append(emit_text(summary, out / "sd_fit_summary.txt", meta))
    return files, summary


def run_corr(cfg, obj, out, meta):
    from . import correlation

    c = cfg.values["corr"]
    p = obj["bath"]
    t = np.linspace(c["t_min_s"], c["t_max_s"], c["n_points"])
    lo = correlation.l_ohmic(p, t)
    ll = correlation.l_lindblad(p, t)
    cols = [("t_s", t), ("l_ohmic_re", lo.real), ("l_ohmic_im", lo.imag),
            ("l_lindblad_re", ll.real), ("l_lindblad_im", ll.imag)]
    return [emit_csv(cols, out / "corr.csv", meta)], []


def run_corr_dist(cfg, obj, out, meta):
    from . import correlation

    c = cfg.values["corr_dist"]
    rows = {"kappa_hz": [], "nbar": [], "hbar_beta_s": [], "d_s": []}
    for kappa in c["kappa"]:
        for nbar in c["nbar"]:
            try:
                p = correlation.BathParams.from_nbar(c["omega_m"], kappa, nbar, 1.0, c["n_matsubara"])
            except ParameterError as exc:
                raise ConfigError(f"corr_dist: {exc}") from None
            rows["kappa_hz"].append(_hz(kappa))
            rows["nbar"].append(nbar)
            rows["hbar_beta_s"].append(p.hbar_beta)
            rows["d_s"].append(correlation.distance_d(p))
    return [emit_csv(rows, out / "corr_dist.csv", meta)], []


def _initial(cfg, system):
    sim = cfg.values.get("simulate") or {}
    tag = sim.get("initial", "up")
    if tag != "explicit":
        return tag
    re = np.array(sim["initial_matrix"], dtype=float)
    im = np.array(sim["initial_matrix_imag"], dtype=float) if sim.get("initial_matrix_imag") else 0.0
    rho = re + 1j * im
    if rho.shape not in ((2, 2), (system.dim, system.dim)):
        raise ConfigError(f"simulate.initial_matrix: shape {rho.shape} is neither 2x2 nor {system.dim}x{system.dim}")
    if not np.allclose(rho, rho.conj().T, atol=1e-12) or abs(np.trace(rho) - 1) > 1e-10:
        raise ConfigError("simulate.initial_matrix: must be Hermitian with unit trace")
    if np.linalg.eigvalsh(rho)[0] < -1e-10:
        raise ConfigError("simulate.initial_matrix: must be positive semidefinite")
    return rho


def run_simulate(cfg, obj, out, meta):
    from . import lindblad

    system = obj["system"]
    sim = cfg.values.get("simulate") or {}
    times = grid_times(cfg.values["grid"], cfg.values["spin"])
    rho0 = _initial(cfg, system)
    series = lindblad.sigma_z_trajectory(system, rho0, times, check=sim.get("check_invariants", True))
    cols = [("t_s", series.times), ("t_natural", series.t_natural), ("sigma_z", series.sigma_z),
            ("trace_err", series.trace_err), ("min_eig", series.min_eig)]
    files = [emit_csv(cols, out / "simulate.csv", meta)]
    summary = [("zero_crossings", series.zero_crossings())]
    if sim.get("truncation_audit"):
        summary.append(("truncation_audit_max_dev", lindblad.truncation_audit(system, rho0, times)))
    return files, summary


def run_nonmarkov(cfg, obj, out, meta):
    from . import nonmarkov

    system = obj["system"]
    nm = cfg.values.get("nonmarkov") or {}
    measures = nm.get("measures", ["rhp", "blp"])
    threshold = nm.get("threshold", nonmarkov.G_THRESHOLD)
    spin = cfg.values["spin"]
    files, summary = [], []
    if "rhp" in measures:
        times = grid_times(nm.get("rhp_grid") or cfg.values["grid"], spin)
        series = nonmarkov.reconstruct_maps(system, times)
        g = nonmarkov.g_series(series, threshold)
        files.append(emit_csv([("t_s", times[:-1]), ("g_per_s", g)], out / "nonmarkov_g.csv", meta))
        summary += [("N_RHP", nonmarkov.n_rhp(g)), ("rhp_positive_intervals", int(np.count_nonzero(g > 0)))]
    if "blp" in measures:
        times = grid_times(nm.get("blp_grid") or cfg.values["grid"], spin)
        res = nonmarkov.n_blp_lower_bound(system, times, nm.get("pairs"), threshold=threshold,
                                          method=nm.get("blp_method", "maps"))
        cols = [("t_s", times)] + [(f"D_{p}", d) for p, d in res.distances.items()]
        files.append(emit_csv(cols, out / "nonmarkov_blp.csv", meta))
        summary += [(f"N_BLP[{p}]", v) for p, v in res.per_pair.items()]
        summary.append(("N_BLP", res.value))
    files.append(emit_text(summary, out / "nonmarkov_summary.txt", meta))
    return files, summary


def run_ion_params(cfg, obj, out, meta):
    from . import iontrap

    lasers_cfg = cfg.values["lasers"]
    extra = cfg.values.get("ion_params") or {}
    crystal, lasers = obj["crystal"], obj["lasers"]
    modes = iontrap.axial_normal_modes(crystal)
    ion = extra.get("spin_ion", 1)
    if ion not in (0, 1):
        raise ConfigError("ion_params.spin_ion: must be 0 or 1")
    eta = iontrap.lamb_dicke(modes, lasers, ion)
    omega_l = modes.omega_2 - lasers.detuning_delta_m
    lam = iontrap.spin_motion_coupling(eta[1], lasers.omega_odf)
    rows = [("omega_1_hz", _hz(modes.omega_1), "Hz"), ("omega_2_hz", _hz(modes.omega_2), "Hz"),
            ("M_00", modes.amplitudes[0, 0], ""), ("M_01", modes.amplitudes[0, 1], ""),
            ("M_10", modes.amplitudes[1, 0], ""), ("M_11", modes.amplitudes[1, 1], ""),
            ("k_eff", lasers.k_eff, "1/m"), ("eta_1", eta[0], ""), ("eta_2", eta[1], ""),
            ("omega_L_hz", _hz(omega_l), "Hz"), ("lambda_hz", _hz(lam), "Hz")]
    if lasers.gamma > 0 and math.isfinite(lasers.big_detuning):
        table = lasers_cfg["rabi_table"]
        rabi = (np.array(table, dtype=float) if table is not None
                else np.full((2, 2), lasers.rabi_0))
        frac = lasers_cfg["gamma_up_fraction"]
        sc = iontrap.scattering_rates(rabi, lasers.big_detuning, frac * lasers.gamma,
                                      (1 - frac) * lasers.gamma, lasers.rabi_0 or None)
        rows += [(f"rate_{k}_hz", _hz(v), "Hz") for k, v in sc.rates.items()]
        rows.append(("gamma_eff_hz", _hz(sc.gamma_eff), "Hz"))
        if table is not None:
            eff = iontrap.effective_rabi_frequencies(rabi, lasers.gamma, big_detuning=lasers.big_detuning)
            rows += [("omega_odf_eff_abs_hz", _hz(abs(eff.omega_odf)), "Hz"),
                     ("omega_rw_eff_abs_hz", _hz(abs(eff.omega_rw)), "Hz"),
                     ("stark_up_hz", _hz(eff.stark[0]), "Hz"), ("stark_down_hz", _hz(eff.stark[1]), "Hz")]
    kappa = extra.get("kappa")
    reg = None
    if lasers.omega_odf > 0:
        if kappa is not None and lasers.detuning_delta_m > 0:
            reg = iontrap.regime_check(lasers.detuning_delta_m, kappa, nbar=extra.get("nbar"),
                                       omega_1=modes.omega_1, omega_L=omega_l, eta_1=eta[0],
                                       omega_odf=lasers.omega_odf)
        else:
            reg = iontrap.regime_check(modes.omega_2, 0.0, omega_1=modes.omega_1, omega_L=omega_l,
                                       eta_1=eta[0], omega_odf=lasers.omega_odf)
            reg.entries = reg.entries[1:]
    regime_rows = [(f"regime[{e.name}]", f"{format(e.ratio, '.6g')} {e.status}") for e in (reg.entries if reg else [])]
    files = [
        emit_csv([("quantity", [r[0] for r in rows]), ("value", [float(r[1]) for r in rows]),
                  ("unit", [r[2] for r in rows])], out / "ion_params.csv", meta),
        emit_text([(r[0], float(r[1])) for r in rows] + regime_rows, out / "ion_params.txt", meta),
    ]
    return files, [(r[0], float(r[1])) for r in rows] + regime_rows


def _chain(cfg, obj):
    from . import chainmap

    c = cfg.values["chain"]
    measure = chainmap.discretize_measure(obj["target"], c["omega_max"], c["n_nodes"])
    return chainmap.chain_coefficients(measure, c["n_chain"])


def run_chain(cfg, obj, out, meta):
    coeffs = _chain(cfg, obj)
    n = coeffs.n_chain
    # t_0 couples the spin to site 0, t_n (n >= 1) couples site n-1 to site n
    t = np.concatenate([[coeffs.coupling], coeffs.hoppings])
    cols = [("n", list(range(n))), ("omega_n_hz", _hz(coeffs.frequencies)), ("t_n_hz", _hz(t))]
    return [emit_csv(cols, out / "chain.csv", meta)], [("t_0_hz", float(_hz(coeffs.coupling)))]


def run_chain_evolve(cfg, obj, out, meta, acknowledge=False):
    from . import chainmap, lindblad

    ce = cfg.values.get("chain_evolve") or {}
    d_max, n_sites = ce.get("d_max", 4), ce.get("n_sites", 6)
    dim = 2 * d_max ** n_sites
    if dim > ce.get("max_dim", chainmap.DEFAULT_CHAIN_CAP):
        raise CapExceededError(dim, ce.get("max_dim"), "chain Hilbert")
    if dim > lindblad.DEFAULT_MAX_DIM and not acknowledge:
        raise CapExceededError(dim, lindblad.DEFAULT_MAX_DIM,
                               "chain Hilbert (pass --acknowledge-cap to run above the default)")
    coeffs = _chain(cfg, obj)
    if n_sites > coeffs.n_chain:
        raise ConfigError(f"chain_evolve.n_sites={n_sites} exceeds chain.n_chain={coeffs.n_chain}")
    times = grid_times(cfg.values["grid"], cfg.values["spin"])
    res = chainmap.exact_chain_evolution(obj["spin"], coeffs, d_max, n_sites, ce.get("initial", "up"), times,
                                         max_dim=ce.get("max_dim", chainmap.DEFAULT_CHAIN_CAP))
    cols = [("t_s", times), ("t_natural", obj["spin"].delta_rabi * times), ("sigma_z", res.sigma_z),
            ("norm_err", res.norm_err)]
    return [emit_csv(cols, out / "chain_evolve.csv", meta)], []


RUNNERS = {
    "sd": run_sd, "sd-fit": run_sd_fit, "corr": run_corr, "corr-dist": run_corr_dist,
    "simulate": run_simulate, "nonmarkov": run_nonmarkov, "ion-params": run_ion_params,
    "chain": run_chain, "chain-evolve": run_chain_evolve,
}


# --------------------------------------------------------------------------- driver

def parse_sweep(spec: str):
    key, sep, vals = spec.partition("=")
    if not sep or not key or not vals:
        raise ConfigError(f"--sweep {spec!r}: expected key=v1,v2,...")
    out = []
    for v in vals.split(","):
        try:
            x = float(v)
        except ValueError:
            raise ConfigError(f"--sweep {spec!r}: {v!r} is not a number") from None
        out.append(int(x) if x.is_integer() and "." not in v and "e" not in v.lower() else x)
    return key, sorted(set(out))


def _point_name(assign):
    return "_".join(f"{k}={v}" for k, v in assign).replace("/", "-")


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML run configuration")
    common.add_argument("--out-dir", default=".", help="directory for output files (default: .)")
    common.add_argument("--threads", type=int, default=1, help="worker/BLAS thread count (default: 1)")
    common.add_argument("--strict-regime", action="store_true", help="treat failed regime rules as errors")
    common.add_argument("--dry-run", action="store_true", help="validate and print the resolved parameters")
    common.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2,...",
                        help="run once per value of a dotted config key; repeatable (cartesian product)")
    parser = argparse.ArgumentParser(prog="ionsbm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "chain-evolve":
            p.add_argument("--acknowledge-cap", action="store_true",
                           help="allow chain spaces above the default dimension cap")
    return parser


def _run_point(args, cfg, out, threads):
    meta = {"config_hash": cfg.digest, "version": __version__, "threads": threads, "backend": kernels.BACKEND,
            "subcommand": cfg.subcommand}
    obj = build_objects(cfg)
    runner = RUNNERS[cfg.subcommand]
    if cfg.subcommand == "chain-evolve":
        return runner(cfg, obj, out, meta, acknowledge=args.acknowledge_cap)
    return runner(cfg, obj, out, meta)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _main(args)
    except IonSBMError as exc:
        if isinstance(exc, ConfigError) and len(exc.problems) > 1:
            print("error: configuration problems:", file=sys.stderr)
            for p in exc.problems:
                print(f"  - {p}", file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def _main(args) -> int:
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    raw = load_toml(args.config)
    sweeps = [parse_sweep(s) for s in args.sweep]
    points = []
    for combo in itertools.product(*[[(k, v) for v in vals] for k, vals in sweeps]):
        r = copy.deepcopy(raw)
        for k, v in combo:
            set_path(r, k, v)
        cfg = validate(r, args.command, strict=args.strict_regime, source=args.config)
        points.append((combo, cfg))
    for combo, cfg in points:
        for w in cfg.warnings:
            print(f"warning: {w}", file=sys.stderr)
    out_dir = Path(args.out_dir)
    if args.dry_run:
        for combo, cfg in points:
            if combo:
                print(f"[{_point_name(combo)}]")
            print(f"config_hash = {cfg.digest}")
            for key, value in cfg.table():
                print(f"{key} = {value}")
        return 0
    if not sweeps:
        with threadpool_limits(args.threads):
            files, summary = _run_point(args, points[0][1], out_dir, args.threads)
        for k, v in summary:
            print(f"{k}={v}")
        for f in files:
            print(f"wrote {f}", file=sys.stderr)
        return 0
    # one worker per point, each with single-threaded BLAS
    with threadpool_limits(1), ThreadPoolExecutor(max_workers=args.threads) as pool:
        futures = [pool.submit(_run_point, args, cfg, out_dir / _point_name(combo), args.threads)
                   for combo, cfg in points]
        results = [f.result() for f in futures]
    index = {"point": [], "directory": []}
    for (combo, _), (files, summary) in zip(points, results):
        index["point"].append(_point_name(combo))
        index["directory"].append(str(out_dir / _point_name(combo)))
        for k, v in summary:
            print(f"{_point_name(combo)}: {k}={v}")
    emit_csv(index, out_dir / "sweep_index.csv", {"version": __version__, "threads": args.threads})
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
