"""Command-line entry point: ``qdlnsim <command> [options]``.

Every command writes CSV (unit-bearing headers) or YAML into ``--out`` plus
a ``<command>.manifest.json``.  Exit codes: 0 success, 1 runtime error,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bandgap import (
    UEV,
    calibrate,
    find_critical_angle,
    fit_rate,
    shift_vs_theta,
    shift_vs_voltage,
)
from .budget import coincidence_rate, end_to_end, load_budget
from .io import RunManifest, write_outputs
from .materials import MaterialsError, load_materials, shipped_config_text
from .optics.fitting import fit_model
from .optics.histogram import CorrelationHistogram, HistogramFormatError, extract_g2_zero
from .optics.models import DetectionModel, EmitterModel, TpiConfig
from .optics.montecarlo import simulate_tpi
from .piezo import ElectrodeGeometry, Orientation, StrainRangeError, strain_from_voltage
from .tuning import (
    ChannelFileError,
    EnsembleSpec,
    align_channels,
    max_overlap_window,
    read_channels_csv,
    sample_ensemble,
    write_channels_csv,
)

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


def _read_config(path: str | None) -> tuple[str, dict]:
    text = shipped_config_text() if path is None else Path(path).read_text()
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MaterialsError(f"cannot parse config: {exc}") from None
    return text, tree if isinstance(tree, dict) else {}


def _geometry(tree: dict) -> ElectrodeGeometry:
    gap_um = (tree.get("device") or {}).get("electrode_gap_um", 5.0)
    try:
        return ElectrodeGeometry(float(gap_um) * 1e-6)
    except (TypeError, ValueError) as exc:
        raise MaterialsError(f"device.electrode_gap_um: {exc}") from None


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _grid(start: float, stop: float, step: float) -> np.ndarray:
    if not (step > 0 and stop > start):
        raise UsageError(f"empty range: start={start}, stop={stop}, step={step}")
    n = int(np.floor((stop - start) / step + 1e-9))
    return start + step * np.arange(n + 1)


def _manifest(args, command: str) -> RunManifest:
    skip = {"func", "config", "seed", "out"}
    return RunManifest(
        command=command,
        config_path=args.config,
        seed=getattr(args, "seed", None),
        outputs=[],
        arguments={k: v for k, v in vars(args).items() if k not in skip},
    )


# --- commands ---------------------------------------------------------------


def cmd_strain(args) -> int:
    text, tree = _read_config(args.config)
    m = load_materials(text)
    eps = strain_from_voltage(m, Orientation(args.theta), args.v, _geometry(tree))
    body = _csv(
        ["theta_deg", "voltage_V", "eps_xx", "eps_yy", "eps_zz", "eps_yz", "eps_xz", "eps_xy"],
        # + 0.0 turns -0.0 into 0.0
        [[repr(float(args.theta)), repr(float(args.v))] + [repr(float(x) + 0.0) for x in eps]],
    )
    write_outputs(Path(args.out), {"strain.csv": body}, _manifest(args, "strain"))
    sys.stdout.write(body)
    return 0


def cmd_sweep(args) -> int:
    grid = _grid(args.start, args.stop, args.step)
    text, tree = _read_config(args.config)
    m = load_materials(text)
    geom = _geometry(tree)
    report = {}
    if args.calibrate is not None:
        cal = calibrate(m, args.calibrate_theta, args.calibrate, geom)
        m = cal.materials
        report.update(eta=cal.eta, calibration_residual_ueV_per_V=cal.residual)
    if args.mode == "theta":
        curve = shift_vs_theta(m, args.v, geom, grid)
        y = curve.delta_e
        flips = np.nonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0)[0]
        report.update(
            voltage_V=args.v,
            critical_angle_deg=find_critical_angle(m, geom),
            sign_changes_deg=[float(curve.x[i + 1]) for i in flips],
            extremum_deg=float(curve.x[int(np.argmax(np.abs(y)))]),
        )
    else:
        curve = shift_vs_voltage(m, args.theta, grid, geom)
        report.update(
            theta_deg=args.theta,
            span_meV=float((curve.delta_e[-1] - curve.delta_e[0]) / 1e-3),
        )
        if curve.x.size >= 2:
            report["fitted_rate_ueV_per_V"] = fit_rate(curve)
    summary = yaml.safe_dump(report, sort_keys=False)
    write_outputs(
        Path(args.out),
        {f"sweep_{args.mode}.csv": curve.to_csv(), f"sweep_{args.mode}.yaml": summary},
        _manifest(args, "sweep"),
    )
    sys.stdout.write(summary)
    return 0


def cmd_align(args) -> int:
    if (args.channels is None) == (not args.sample):
        raise UsageError("give exactly one of --channels PATH or --sample")
    if args.sample:
        if args.seed is None:
            raise UsageError("--sample draws random channels and needs --seed")
        spec = EnsembleSpec(
            n=args.n,
            center=args.center,
            sigma_inhomogeneous=args.sigma_ueV * UEV,
            rate_mean=args.rate_mean,
            rate_spread=args.rate_spread,
            v_limit=args.v_limit,
            seed=args.seed,
        )
        channels = sample_ensemble(spec)
    else:
        channels = read_channels_csv(Path(args.channels).read_text())
    if args.tolerance_ueV <= 0:
        raise UsageError("--tolerance-ueV must be positive")
    res = align_channels(channels, args.tolerance_ueV * UEV)
    lo, hi, depth = max_overlap_window(channels)
    mapping = res.to_mapping()
    mapping["overlap_window_eV"] = [lo, hi]
    mapping["overlap_window_meV"] = (hi - lo) / 1e-3
    mapping["overlap_depth"] = depth
    text = yaml.safe_dump(mapping, sort_keys=False)
    files = {"alignment.yaml": text, "alignment.csv": res.to_csv()}
    if args.sample:
        files["channels.csv"] = write_channels_csv(channels)
    write_outputs(Path(args.out), files, _manifest(args, "align"))
    sys.stdout.write(
        f"aligned {res.count}/{len(channels)} at {res.target:.7f} eV; "
        f"overlap window {(hi - lo) / 1e-3:.4f} meV\n"
    )
    return 0


def _tpi_models(args):
    em = EmitterModel(
        lifetime_tau1=args.lifetime, coherence_tau_c=args.tau_c, purity_g2=args.purity
    )
    det = DetectionModel(
        irf_fwhm=args.irf_fwhm,
        bin_width=args.bin_width,
        rep_period=args.rep_period,
        n_side=args.n_side,
        irf_shape=args.irf_shape,
    )
    cfg = TpiConfig((em, em), args.detuning, args.mode_overlap, 0.0, args.single_source)
    return cfg, det


def _fit_report(h, det, detuning) -> str:
    fit = fit_model(h, det, detuning)
    est = extract_g2_zero(h)
    report = fit.to_mapping()
    report["area_ratio"] = est.value
    report["area_ratio_err"] = est.error
    return yaml.safe_dump(report, sort_keys=False)


def cmd_tpi(args) -> int:
    cfg, det = _tpi_models(args)
    files = {}
    if args.action == "simulate":
        if args.seed is None:
            raise UsageError("tpi simulate needs --seed")
        h = simulate_tpi(cfg, det, args.pulses, args.seed)
        files["histogram.csv"] = h.to_csv()
        files["histogram.json"] = h.metadata_json()
        if not args.no_fit and not cfg.single_source:
            files["fit.yaml"] = _fit_report(h, det, args.detuning)
        est = extract_g2_zero(h)
        msg = f"g2(0) area ratio {est.value:.4f} +- {est.error:.4f}\n"
    else:
        if args.histogram is None:
            raise UsageError("tpi fit needs --histogram PATH")
        path = Path(args.histogram)
        h = CorrelationHistogram.from_csv(path.read_text(), path.with_suffix(".json").read_text())
        files["fit.yaml"] = _fit_report(h, det, args.detuning)
        msg = files["fit.yaml"]
    write_outputs(Path(args.out), files, _manifest(args, "tpi"))
    if "fit.yaml" in files and args.action == "simulate":
        msg += files["fit.yaml"]
    sys.stdout.write(msg)
    return 0


def cmd_budget(args) -> int:
    text, _ = _read_config(args.config)
    cfg = load_budget(text)
    rows = []
    totals = {}
    for name, chain in cfg.chains.items():
        for stage, eff in chain.stages().items():
            rows.append([name, stage, repr(float(eff))])
        totals[name] = end_to_end(chain)
        rows.append([name, "end_to_end", repr(float(totals[name]))])
    report = {"pulse_rate_hz": cfg.pulse_rate, "end_to_end": totals}
    names = list(cfg.chains)
    if len(names) >= 2:
        a, b = cfg.chains[names[0]], cfg.chains[names[1]]
        report["same_port_prob"] = args.same_port_prob
        report["coincidence_rate_hz"] = coincidence_rate(cfg.pulse_rate, a, b, args.same_port_prob)
    summary = yaml.safe_dump(report, sort_keys=False)
    write_outputs(
        Path(args.out),
        {"budget.csv": _csv(["chain", "stage", "efficiency_fraction"], rows), "budget.yaml": summary},
        _manifest(args, "budget"),
    )
    sys.stdout.write(summary)
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML config (default: shipped constants)")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="RNG seed (required for random commands)")

    p = argparse.ArgumentParser(prog="qdlnsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("strain", parents=[common], help="strain tensor at one angle and bias")
    s.add_argument("--theta", type=float, required=True, help="waveguide angle, deg")
    s.add_argument("--v", type=float, required=True, help="bias, V")
    s.set_defaults(func=cmd_strain)

    s = sub.add_parser("sweep", parents=[common], help="gap shift vs angle or voltage")
    s.add_argument("--mode", choices=("theta", "voltage"), required=True)
    s.add_argument("--start", type=float, required=True)
    s.add_argument("--stop", type=float, required=True)
    s.add_argument("--step", type=float, required=True)
    s.add_argument("--v", type=float, default=100.0, help="bias for theta sweeps, V")
    s.add_argument("--theta", type=float, default=0.0, help="angle for voltage sweeps, deg")
    s.add_argument("--calibrate", type=float, metavar="RATE", help="measured rate to match, ueV/V")
    s.add_argument("--calibrate-theta", type=float, default=0.0, help="angle of that measurement, deg")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("align", parents=[common], help="bring channels into resonance")
    s.add_argument("--channels", metavar="CSV", help="id,e0_eV,rate_ueV_per_V,vmin,vmax")
    s.add_argument("--sample", action="store_true", help="draw a synthetic ensemble instead")
    s.add_argument("--tolerance-ueV", type=float, default=1.0)
    d = EnsembleSpec()
    s.add_argument("--n", type=int, default=d.n)
    s.add_argument("--center", type=float, default=d.center, help="eV")
    s.add_argument("--sigma-ueV", type=float, default=d.sigma_inhomogeneous / UEV)
    s.add_argument("--rate-mean", type=float, default=d.rate_mean, help="ueV/V")
    s.add_argument("--rate-spread", type=float, default=d.rate_spread, help="ueV/V")
    s.add_argument("--v-limit", type=float, default=d.v_limit, help="V")
    s.set_defaults(func=cmd_align)

    s = sub.add_parser("tpi", parents=[common], help="two-photon interference histograms")
    s.add_argument("action", choices=("simulate", "fit"))
    s.add_argument("--pulses", type=int, default=1_000_000)
    s.add_argument("--histogram", metavar="CSV", help="histogram to fit (sidecar .json next to it)")
    s.add_argument("--no-fit", action="store_true", help="skip the fit after simulating")
    e, dm, t = EmitterModel(), DetectionModel(), TpiConfig()
    s.add_argument("--detuning", type=float, default=t.detuning, help="ueV")
    s.add_argument("--mode-overlap", type=float, default=t.mode_overlap)
    s.add_argument("--single-source", action="store_true", help="autocorrelation of one emitter")
    s.add_argument("--lifetime", type=float, default=e.lifetime_tau1, help="ps")
    s.add_argument("--tau-c", type=float, default=e.coherence_tau_c, help="ps")
    s.add_argument("--purity", type=float, default=e.purity_g2, help="HBT g2(0) of each emitter")
    s.add_argument("--irf-fwhm", type=float, default=dm.irf_fwhm, help="ps, per detector")
    s.add_argument("--irf-shape", choices=("gaussian", "exponential"), default=dm.irf_shape)
    s.add_argument("--bin-width", type=float, default=dm.bin_width, help="ps")
    s.add_argument("--rep-period", type=float, default=dm.rep_period, help="ps")
    s.add_argument("--n-side", type=int, default=dm.n_side)
    s.set_defaults(func=cmd_tpi)

    s = sub.add_parser("budget", parents=[common], help="efficiency chain and coincidence rate")
    s.add_argument("--same-port-prob", type=float, default=0.5)
    s.set_defaults(func=cmd_budget)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qdlnsim {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (
        OSError,
        MaterialsError,
        ChannelFileError,
        HistogramFormatError,
        StrainRangeError,
        ValueError,
    ) as exc:
        print(f"qdlnsim {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
