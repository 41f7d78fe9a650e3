"""Command-line front end.

Subcommands wire the full pipeline: ``simulate`` runs a measurement suite
from a JSON config and persists decay curves, ``invert`` turns a suite (or an
external rate CSV) into a spectrum estimate, ``compare`` scores an estimate
against a ground-truth model or a reference estimate, and ``weights`` dumps
the harmonic weights. Every command is reproducible from its manifest alone:
manifests capture the config, seeds, fit windows, and package version, and
contain no timestamps.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .exceptions import GridMismatchError, SchemaError, SpectroscopyError
from .filters import harmonic_weights, sensitivity_matrix
from .noise import Lorentzian, SpectralModel
from .sequence import make_cpmg
from .simulate import run_suite
from .spectro import (
    METHOD_CORRECTED,
    METHOD_FIRST_HARMONIC,
    METHOD_NAIVE,
    RateSet,
    first_harmonic,
    fit_tail,
    invert_corrected,
    invert_naive,
    subtract_baseline,
)

_METHOD_FLAGS = {
    "naive": METHOD_NAIVE,
    "first-harmonic": METHOD_FIRST_HARMONIC,
    "corrected": METHOD_CORRECTED,
}


def _resolve_model_spec(spec: dict, config_dir: Path) -> dict:
    """Inline any tabulated-model CSV reference so manifests stay standalone."""
    spec = dict(spec)
    if spec.get("kind") == "tabulated" and "csv" in spec:
        csv_path = config_dir / spec.pop("csv")
        if not csv_path.exists():
            raise SchemaError(
                f"tabulated model file {csv_path} does not exist", path=str(csv_path)
            )
        omega, values = io.read_tabulated_model_csv(csv_path)
        spec["omega"] = omega.tolist()
        spec["values"] = values.tolist()
    if spec.get("kind") == "modulated" and isinstance(spec.get("base"), dict):
        spec["base"] = _resolve_model_spec(spec["base"], config_dir)
    return spec


def _load_config(path: Path) -> dict:
    if not path.exists():
        raise SchemaError("config file does not exist", path=str(path))
    try:
        with open(path) as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config is not valid JSON: {exc}", path=str(path)) from None
    for key in ("model", "tau_max", "m"):
        if key not in config:
            raise SchemaError(f"config is missing the {key!r} key", path=str(path))
    engine = config.get("engine", "analytic")
    if engine not in ("analytic", "monte_carlo"):
        raise SchemaError(
            f"engine must be 'analytic' or 'monte_carlo', got {engine!r}", path=str(path)
        )
    if engine == "monte_carlo" and int(config.get("trials", 400)) < 100:
        raise SchemaError(
            f"monte_carlo needs at least 100 trials, got {config.get('trials')}",
            path=str(path),
        )
    if not float(config["tau_max"]) > 0:
        raise SchemaError("tau_max must be positive", path=str(path))
    if int(config["m"]) < 1:
        raise SchemaError("m must be >= 1", path=str(path))
    family = config.get("sequence", {}).get("family", "cpmg")
    if family != "cpmg":
        raise SchemaError(
            f"only the cpmg sequence family is supported in suites, got {family!r}",
            path=str(path),
        )
    config["model"] = _resolve_model_spec(config["model"], path.parent)
    try:
        SpectralModel.from_dict(config["model"])  # validate early, before any work
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid model: {exc}", path=str(path)) from None
    return config


def _tau_b_hint(config: dict, model: SpectralModel, override: float | None) -> float:
    if override is not None:
        return override
    hint = config.get("fit", {}).get("tau_b_hint")
    if hint is not None:
        return float(hint)
    if isinstance(model, Lorentzian):
        return model.correlation_time
    base = getattr(model, "base", None)
    if isinstance(base, Lorentzian):
        return base.correlation_time
    raise SpectroscopyError(
        "no correlation-time hint available: pass --tau-b-hint or set fit.tau_b_hint "
        "in the config"
    )


def cmd_simulate(args) -> int:
    config = _load_config(Path(args.config))
    model = SpectralModel.from_dict(config["model"])
    out_dir = Path(args.out or config.get("output", "suite"))
    out_dir.mkdir(parents=True, exist_ok=True)
    tau_max = float(config["tau_max"])
    m = int(config["m"])
    engine = config.get("engine", "analytic")
    trials = int(config.get("trials", 400))
    seed = int(config.get("seed", 0))
    curves = run_suite(
        model,
        tau_max,
        m,
        engine=engine,
        trials=trials,
        seed=seed,
        points=int(config.get("points", 16)),
        depth=float(config.get("depth", 3.0)),
        tau_b_hint=config.get("fit", {}).get("tau_b_hint"),
    )
    curve_files = []
    for n, curve in enumerate(curves, start=1):
        name = f"curve_n{n:02d}.csv"
        io.write_decay_curve(out_dir / name, curve)
        curve_files.append(
            {
                "file": name,
                "n": n,
                "tau_s": curve.tau,
                "cycle_length_s": curve.cycle_length,
                "engine": curve.engine,
            }
        )
    io.write_manifest(
        out_dir,
        {
            "command": "simulate",
            "version": __version__,
            "config": config,
            "tau_max_s": tau_max,
            "m": m,
            "omega_min_rad_per_s": np.pi / tau_max,
            "engine": engine,
            "trials": trials if engine == "monte_carlo" else None,
            "seed": seed if engine == "monte_carlo" else None,
            "curves": curve_files,
        },
    )
    if args.gnuplot:
        _write_curve_gnuplot(out_dir, curve_files)
    print(f"wrote {len(curve_files)} curves and manifest to {out_dir}")
    return 0


def _write_curve_gnuplot(out_dir: Path, curve_files) -> None:
    lines = [
        "set datafile separator ','",
        "set logscale y",
        "set xlabel 'time (s)'",
        "set ylabel 'signal'",
    ]
    plots = ", ".join(
        f"'{entry['file']}' skip 2 using 1:2 with linespoints title 'n={entry['n']}'"
        for entry in curve_files
    )
    lines.append(f"plot {plots}")
    (out_dir / "plot_curves.gp").write_text("\n".join(lines) + "\n")


def _rates_from_suite(suite_dir: Path, args) -> tuple[RateSet, dict]:
    manifest = io.read_manifest(suite_dir)
    config = manifest.get("config", {})
    model = SpectralModel.from_dict(config["model"])
    hint = _tau_b_hint(config, model, args.tau_b_hint)
    curves = []
    for entry in manifest["curves"]:
        curves.append(
            io.read_decay_curve(
                suite_dir / entry["file"],
                tau=entry["tau_s"],
                cycle_length=entry["cycle_length_s"],
                engine=entry["engine"],
            )
        )
    floor = config.get("fit", {}).get("signal_floor", 0.05)
    rates = RateSet.from_curves(curves, tau_b_hint=hint, signal_floor=floor)
    return rates, manifest


def cmd_invert(args) -> int:
    if (args.suite is None) == (args.rates is None):
        raise SpectroscopyError("pass exactly one of --suite or --rates")
    manifest_info: dict = {}
    if args.suite is not None:
        rates, suite_manifest = _rates_from_suite(Path(args.suite), args)
        manifest_info["suite"] = str(args.suite)
        manifest_info["suite_config"] = suite_manifest.get("config", {})
        fit_cfg = suite_manifest.get("config", {}).get("fit", {})
    else:
        rates = io.read_rate_set(args.rates)
        manifest_info["rates_file"] = str(args.rates)
        fit_cfg = {}
    method = _METHOD_FLAGS[args.method]
    out = Path(args.out or f"spectrum_{method}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)

    weights = harmonic_weights(make_cpmg(rates.tau_max), rates.m)
    matrix = sensitivity_matrix(weights, rates.m, omega_min=rates.omega_min)

    window = args.tail_window or fit_cfg.get("tail_window") or [max(rates.m // 2, 1), rates.m]
    window = (int(window[0]), int(window[1]))
    baseline_info = None
    if args.baseline:
        b_window = args.baseline_window or fit_cfg.get("baseline_window") or window
        rates, baseline = subtract_baseline(rates, (int(b_window[0]), int(b_window[1])))
        baseline_info = {
            "rate_per_s": baseline.rate,
            "sigma": baseline.sigma,
            "warning": baseline.warning,
            "window": [int(b_window[0]), int(b_window[1])],
        }

    tail = None
    if method == METHOD_NAIVE:
        estimate = invert_naive(rates, matrix)
    elif method == METHOD_FIRST_HARMONIC:
        estimate = first_harmonic(rates, matrix)
    else:
        tail = fit_tail(rates, window, matrix)
        estimate = invert_corrected(rates, matrix, tail)

    if args.suite is not None:
        rates_out = out.with_name(out.stem + "_rates.csv")
        io.write_rate_set(rates_out, rates)
        manifest_info["rates_csv"] = rates_out.name
    io.write_spectrum(out, estimate)
    if args.hz:
        io.write_spectrum(out.with_name(out.stem + "_hz.csv"), estimate, hz=True)
    payload = {
        "command": "invert",
        "version": __version__,
        "method": method,
        "tail": io.tail_to_dict(tail),
        "tail_window": list(window) if method == METHOD_CORRECTED else None,
        "baseline": baseline_info,
        "notes": list(estimate.notes),
        "estimate_csv": out.name,
        **manifest_info,
    }
    with open(out.with_suffix(".manifest.json"), "w") as fh:
        json.dump({"schema": io.MANIFEST_SCHEMA, **payload}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out} (method = {method})")
    if tail is not None:
        print(
            f"tail: amplitude = {tail.amplitude:.6g}, exponent = {tail.exponent:.4f} "
            f"+- {tail.exponent_sigma:.4f}, harmonic sum = {tail.tail_sum:.6f}"
        )
    return 0


def cmd_compare(args) -> int:
    estimate = io.read_spectrum(args.estimate)
    if (args.model is None) == (args.reference is None):
        raise SpectroscopyError("pass exactly one of --model or --reference")
    if args.reference is not None:
        reference = io.read_spectrum(args.reference)
        if reference.m != estimate.m or not np.isclose(
            reference.omega_min, estimate.omega_min, rtol=1e-9
        ):
            raise GridMismatchError(
                f"estimate grid (m = {estimate.m}, omega_min = {estimate.omega_min:g}) "
                f"does not match reference grid (m = {reference.m}, "
                f"omega_min = {reference.omega_min:g})"
            )
        truth = reference.values
        truth_label = str(args.reference)
    else:
        with open(args.model) as fh:
            model = SpectralModel.from_dict(json.load(fh))
        truth = model.psd(estimate.omega)
        truth_label = str(args.model)
    valid = ~np.isnan(estimate.values) & (truth != 0)
    rel = np.full(estimate.m, np.nan)
    rel[valid] = (estimate.values[valid] - truth[valid]) / truth[valid]
    abs_rel = np.abs(rel[valid])
    report = {
        "estimate": str(args.estimate),
        "reference": truth_label,
        "method": estimate.method,
        "per_j": [
            {
                "j": int(j),
                "omega_rad_per_s": float(w),
                "estimate": None if np.isnan(v) else float(v),
                "truth": float(t),
                "rel_error": None if np.isnan(r) else float(r),
            }
            for j, w, v, t, r in zip(
                estimate.j, estimate.omega, estimate.values, truth, rel
            )
        ],
        "max_abs_rel_error": float(abs_rel.max()) if abs_rel.size else None,
        "mean_abs_rel_error": float(abs_rel.mean()) if abs_rel.size else None,
    }
    if np.any(estimate.sigmas[valid] > 0):
        z = (estimate.values[valid] - truth[valid]) / np.where(
            estimate.sigmas[valid] > 0, estimate.sigmas[valid], np.inf
        )
        report["max_abs_z"] = float(np.abs(z).max())
        report["chi_sq_per_point"] = float(np.mean(z**2))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"compared {args.estimate} against {truth_label} ({estimate.method})")
    if abs_rel.size:
        print(
            f"max |rel error| = {report['max_abs_rel_error']:.3e}, "
            f"mean = {report['mean_abs_rel_error']:.3e} over {int(valid.sum())} points"
        )
    if "chi_sq_per_point" in report:
        print(f"chi^2 per point = {report['chi_sq_per_point']:.3f}")
    return 0


def cmd_weights(args) -> int:
    weights = harmonic_weights(make_cpmg(args.tau), args.k_max)
    if args.out:
        weights.to_csv(args.out)
        print(f"wrote {args.k_max} weights to {args.out}")
    else:
        print("k,A_k_sq")
        for k, val in enumerate(weights.values, start=1):
            print(f"{k},{float(val)!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddspectro",
        description=(
            "Simulate dephasing under dynamical-decoupling sequences and reconstruct "
            "the environmental noise spectral density from decay rates."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a measurement suite from a JSON config")
    p_sim.add_argument("--config", required=True, help="JSON run configuration")
    p_sim.add_argument("--out", help="output directory (default from config)")
    p_sim.add_argument("--gnuplot", action="store_true", help="also write a plot script")
    p_sim.set_defaults(func=cmd_simulate)

    p_inv = sub.add_parser("invert", help="reconstruct the spectrum from rates")
    p_inv.add_argument("--suite", help="simulated suite directory")
    p_inv.add_argument("--rates", help="external rate-set CSV")
    p_inv.add_argument(
        "--method", choices=sorted(_METHOD_FLAGS), default="corrected"
    )
    p_inv.add_argument(
        "--tail-window", nargs=2, type=int, metavar=("LO", "HI"),
        help="divisor window for the power-law tail fit",
    )
    p_inv.add_argument(
        "--baseline", action="store_true",
        help="fit and subtract a constant background rate first",
    )
    p_inv.add_argument("--baseline-window", nargs=2, type=int, metavar=("LO", "HI"))
    p_inv.add_argument("--tau-b-hint", type=float, help="correlation-time hint (s)")
    p_inv.add_argument("--out", help="output spectrum CSV path")
    p_inv.add_argument(
        "--hz", action="store_true", help="also export frequencies in Hz"
    )
    p_inv.set_defaults(func=cmd_invert)

    p_cmp = sub.add_parser("compare", help="score an estimate against ground truth")
    p_cmp.add_argument("--estimate", required=True, help="spectrum CSV to score")
    p_cmp.add_argument("--model", help="ground-truth model JSON")
    p_cmp.add_argument("--reference", help="reference spectrum CSV")
    p_cmp.add_argument("--out", help="machine-readable JSON report path")
    p_cmp.set_defaults(func=cmd_compare)

    p_w = sub.add_parser("weights", help="dump CPMG harmonic weights A_k^2")
    p_w.add_argument("--k-max", type=int, default=99)
    p_w.add_argument(
        "--tau", type=float, default=1.0,
        help="pulse spacing (s); CPMG weights are spacing-independent",
    )
    p_w.add_argument("--out", help="CSV output path (default: print)")
    p_w.set_defaults(func=cmd_weights)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpectroscopyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
