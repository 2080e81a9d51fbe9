"""
Command-line pipeline: simulate, condition, correlate, fit, postselect, modes.

Every subcommand writes plain CSV/JSON outputs plus a manifest.json with
the resolved config and the sha256 of each input and output.
"""

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from . import __version__
from .conditioning import condition_stream, count_distribution, expected_count_distribution
from .config import PipelineConfig, env_log_level, env_threads, load_config, parse_config
from .correlator import (
    CoincidenceHistogram,
    coincidence_histogram,
    correct_background,
    far_bin_plateau,
    histogram_frame,
    plateau_normalize,
    read_histogram,
    slice_axis,
    write_histogram,
)
from .errors import ConfigError, DataError, PhononCountsError
from .fitting import (
    FitResult,
    PowerSweep,
    fit_coherence,
    fit_power_sweep,
    fit_spectrum,
    fit_temperature_sweep,
    require_converged,
)
from .models import gawbs_mode_roots, mhz
from .postselect import MAX_HERALDS, conditioned_g2_curve, conditioned_rate_curve
from .schemas import DriveSide
from .simulator import plan_from_backaction, simulate_stream
from .tagstream import TagStream, load_tags, records_from_metadata, save_tags
from .utils import format_timestamp, get_logger, set_run_seed, setup_logging, sha256_file, write_json, write_table


logger = get_logger("cli")

MODE_WINDOW_MHZ = (150.0, 450.0)


class RunContext:
    """Resolved settings and file bookkeeping for one subcommand."""

    def __init__(self, args: argparse.Namespace, config: PipelineConfig):
        self.command = args.command
        self.config = config
        self.out = Path(args.out)
        self.fmt = args.format
        self.threads = args.threads or env_threads()
        self.seed = args.seed
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self.out.mkdir(parents=True, exist_ok=True)

    def add_input(self, path: str | Path) -> Path:
        path = Path(path)
        if not path.is_file():
            raise DataError(f"input file {path} does not exist")
        self.inputs[str(path)] = sha256_file(path)
        return path

    def record(self, path: Path) -> Path:
        self.outputs[path.name] = sha256_file(path)
        return path

    def table(self, frame: pd.DataFrame, stem: str) -> Path:
        return self.record(write_table(frame, self.out / stem, self.fmt))

    def json(self, payload, name: str) -> Path:
        return self.record(write_json(payload, self.out / name))

    def write_manifest(self) -> Path:
        manifest = {
            "command": self.command,
            "version": __version__,
            "created": format_timestamp(),
            "seed": self.seed,
            "threads": self.threads,
            "config": self.config.model_dump(mode="json"),
            "inputs": self.inputs,
            "outputs": self.outputs,
        }
        return write_json(manifest, self.out / "manifest.json")


def _save_stream(ctx: RunContext, stream: TagStream, name: str, sidecar: dict) -> None:
    path = ctx.out / f"{name}.ptg"
    save_tags(stream, path)
    ctx.record(path)
    ctx.json(sidecar, f"{name}.plan.json")


def cmd_simulate(args: argparse.Namespace, ctx: RunContext) -> None:
    sim = ctx.config.simulation
    if sim.power_sweep is None:
        plan = sim.plan
        if ctx.seed is not None:
            plan = plan.model_copy(update={"seed": ctx.seed})
        set_run_seed(plan.seed)
        stream = simulate_stream(plan, workers=ctx.threads)
        _save_stream(ctx, stream, "stream", plan.model_dump(mode="json"))
        return

    sweep = sim.power_sweep
    base_seed = sim.plan.seed if ctx.seed is None else ctx.seed
    index = 0
    for side in sweep.sides:
        for j, power in enumerate(sweep.P_in_w):
            plan = plan_from_backaction(
                power,
                sweep.cavity,
                sweep.link,
                side,
                sweep.eta_det,
                sweep.duration_ns,
                seed=base_seed + index,
                background_rate=sweep.background_rate,
                detector=sweep.detector,
            )
            set_run_seed(plan.seed)
            stream = simulate_stream(plan, workers=ctx.threads)
            sidecar = {"P_in_w": power, "plan": plan.model_dump(mode="json")}
            _save_stream(ctx, stream, f"stream_{side.value}_{j:03d}", sidecar)
            index += 1


def _records(stream: TagStream, ctx: RunContext):
    """Record tiling from the stream's conditioning metadata, else from the config."""
    fallback = None if "record_ns" in stream.metadata else ctx.config.conditioning.record_ns
    return records_from_metadata(stream, fallback)


def cmd_condition(args: argparse.Namespace, ctx: RunContext) -> None:
    stream = load_tags(ctx.add_input(args.input))
    section = ctx.config.conditioning
    cleaned, records, report = condition_stream(
        stream, record_ns=section.record_ns, policy=section.policy, afterpulse_window_ns=section.afterpulse_window_ns
    )
    path = ctx.out / "conditioned.ptg"
    save_tags(cleaned, path)
    ctx.record(path)
    ctx.json(report.model_dump(mode="json"), "conditioning_report.json")

    rows = []
    for window in report.windows:
        observed = count_distribution(cleaned, window.window_ns)
        k_max = max(len(observed.occupancy) - 1, window.k_thr)
        expected = expected_count_distribution(window.lam, window.n_intervals, k_max, section.policy.model)
        for k in range(k_max + 1):
            rows.append(
                {
                    "window_ns": window.window_ns,
                    "k": k,
                    "observed": observed.occupancy[k] if k < len(observed.occupancy) else 0,
                    "expected": float(expected[k]),
                    "k_thr": window.k_thr,
                }
            )
    ctx.table(pd.DataFrame(rows), "count_distributions")


def _plateau(hist: CoincidenceHistogram, ctx: RunContext, label: str) -> tuple[float, Optional[FitResult]]:
    section = ctx.config.correlation
    if section.plateau == "far_bin":
        return far_bin_plateau(hist, section.gamma_bar), None
    result = require_converged(fit_coherence(hist), f"order-{hist.order} plateau ({label})")
    return result.value("A"), result


def _lower_orders(stream, records, order: int, ctx: RunContext) -> dict[int, np.ndarray]:
    """Normalized lower-order grids at the top order's bin width, over the range correction needs."""
    section = ctx.config.correlation
    width = section.bin_width_ns[order]
    lower = {}
    for m in range(2, order):
        hist = coincidence_histogram(
            stream,
            records,
            m,
            width,
            section.max_delay_ns[order] * 2 ** (order - m),
            section.channel_mode,
            workers=ctx.threads,
        )
        A, _ = _plateau(hist, ctx, "auxiliary")
        lower[m] = plateau_normalize(hist, A)
    return lower


def cmd_correlate(args: argparse.Namespace, ctx: RunContext) -> None:
    stream = load_tags(ctx.add_input(args.input))
    section = ctx.config.correlation
    records = _records(stream, ctx)
    epsilon = section.epsilon or 0.0

    for order in section.orders:
        hist = coincidence_histogram(
            stream,
            records,
            order,
            section.bin_width_ns[order],
            section.max_delay_ns[order],
            section.channel_mode,
            workers=ctx.threads,
        )
        path = ctx.out / f"g{order}.pch"
        write_histogram(hist, path)
        ctx.record(path)

        A, fit = _plateau(hist, ctx, "measured")
        hist = hist.model_copy(update={"normalization": A})
        raw = plateau_normalize(hist, A)
        if fit is not None:
            ctx.json(fit.model_dump(mode="json"), f"g{order}_fit.json")

        corrected = raw
        if epsilon > 0 and order > 2:
            measured = _lower_orders(stream, records, order, ctx)
            measured[order] = raw
            corrected = correct_background(measured, epsilon)[order]
        elif epsilon > 0:
            corrected = correct_background({2: raw}, epsilon)[2]

        frame = histogram_frame(hist, raw)
        frame["corrected"] = corrected.ravel()
        ctx.table(frame, f"g{order}_coherence")

        if order == 4:
            lower = hist.lower_edges_ns
            for b in section.slice_tau1_bins:
                if b >= hist.n_bins:
                    raise ConfigError(f"slice bin {b} outside the {hist.n_bins}-bin axis")
                tau2, tau3 = np.meshgrid(lower, lower, indexing="ij")
                ctx.table(
                    pd.DataFrame(
                        {
                            "tau2_ns": tau2.ravel(),
                            "tau3_ns": tau3.ravel(),
                            "coherence": slice_axis(raw, 0, b).ravel(),
                            "corrected": slice_axis(corrected, 0, b).ravel(),
                        }
                    ),
                    f"g4_slice_tau1_bin{b:04d}",
                )


def _read_frame(path: Path, required: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read table {path}: {exc}") from exc
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataError(f"{path} lacks columns {missing}")
    return frame


def _optional(frame: pd.DataFrame, column: str):
    return frame[column].to_numpy(float) if column in frame.columns else None


def cmd_fit(args: argparse.Namespace, ctx: RunContext) -> None:
    path = ctx.add_input(args.input)
    section = ctx.config.fitting

    if args.kind == "coherence":
        hist = read_histogram(path)
        result = require_converged(fit_coherence(hist), f"order-{hist.order} coherence")
        frame = histogram_frame(hist, plateau_normalize(hist, result.value("A")))
        frame["residual"] = result.residuals
    elif args.kind == "spectrum":
        data = _read_frame(path, ["detuning_mhz", "rate"])
        sigma = _optional(data, "sigma")
        result = fit_spectrum(
            mhz(data["detuning_mhz"].to_numpy(float)),
            data["rate"].to_numpy(float),
            weights=None if sigma is None else 1.0 / sigma**2,
            mode=section.spectrum_mode,
            n_gawbs_peaks=section.n_gawbs_peaks,
            filters=section.filters,
            omega_ac=section.cavity.omega_ac,
        )
        frame = data.assign(residual=result.residuals)
    elif args.kind == "power":
        data = _read_frame(path, ["label", "P_in_w", "R_AS", "R_S"])
        sweeps = [
            PowerSweep(
                label=str(label),
                P_in=group["P_in_w"].tolist(),
                R_AS=group["R_AS"].tolist(),
                R_S=group["R_S"].tolist(),
                sigma_AS=group["sigma_AS"].tolist() if "sigma_AS" in group else None,
                sigma_S=group["sigma_S"].tolist() if "sigma_S" in group else None,
            )
            for label, group in data.groupby("label", sort=False)
        ]
        result = fit_power_sweep(
            sweeps,
            cavity=section.cavity,
            link=section.link,
            eta_det_init=section.eta_det_init,
            fixed=section.fixed,
            shared_eta=section.shared_eta,
        )
        frame = pd.DataFrame({"index": np.arange(len(result.residuals)), "residual": result.residuals})
    else:
        data = _read_frame(path, ["T_MC", "R_AS", "R_S"])
        result = fit_temperature_sweep(
            data["T_MC"].to_numpy(float),
            data["R_AS"].to_numpy(float),
            data["R_S"].to_numpy(float),
            section.cavity.omega_ac,
            sigma_as=_optional(data, "sigma_AS"),
            sigma_s=_optional(data, "sigma_S"),
        )
        frame = pd.DataFrame({"index": np.arange(len(result.residuals)), "residual": result.residuals})

    payload = result.model_dump(mode="json")
    payload["formatted"] = {n: result.formatted(n) for n in result.names}
    ctx.json(payload, f"fit_{args.kind}.json")
    ctx.table(frame, f"fit_{args.kind}_residuals")


def cmd_postselect(args: argparse.Namespace, ctx: RunContext) -> None:
    stream = load_tags(ctx.add_input(args.input))
    section = ctx.config.postselect
    side = DriveSide(args.side) if args.side else DriveSide(stream.metadata.get("side", section.side))
    gamma_bar = section.gamma_bar or section.herald.gamma_bar or stream.metadata.get("gamma_ac_bar")
    update = {"gamma_bar": gamma_bar}
    if args.k is not None:
        update["k"] = args.k
    spec = section.herald.model_validate({**section.herald.model_dump(), **update})
    records = _records(stream, ctx)

    rate = conditioned_rate_curve(stream, records, spec, side)
    ctx.table(rate.to_frame(), f"herald_rate_k{spec.k}")
    summary = {"rate": rate.model_dump(mode="json", exclude={"tau_ns", "value", "sigma", "theory", "conditioned_counts"})}
    if section.conditional_g2 and spec.k <= 2:
        g2 = conditioned_g2_curve(stream, records, spec, side)
        ctx.table(g2.to_frame(), f"herald_g2_k{spec.k}")
        summary["conditional_g2"] = g2.model_dump(
            mode="json", exclude={"tau_ns", "value", "sigma", "theory", "conditioned_counts"}
        )
    ctx.json(summary, f"herald_summary_k{spec.k}.json")


def cmd_modes(args: argparse.Namespace, ctx: RunContext) -> None:
    section = ctx.config.modes
    model = section.gawbs
    if args.alpha is not None:
        model = model.model_validate({**model.model_dump(), "alpha": args.alpha})
    m_max = args.m_max or section.m_max
    modes = gawbs_mode_roots(model, m_max)
    lo, hi = MODE_WINDOW_MHZ
    frame = pd.DataFrame(
        {
            "m": [m.m for m in modes],
            "y": [m.y for m in modes],
            "frequency_mhz": [m.frequency_hz * 1e-6 for m in modes],
            "residual": [m.residual for m in modes],
        }
    )
    frame["in_window"] = (frame["frequency_mhz"] >= lo) & (frame["frequency_mhz"] <= hi)
    logger.info(f"[Modes] {int(frame['in_window'].sum())} of {m_max} modes within {lo:g}-{hi:g} MHz")
    ctx.table(frame, "gawbs_modes")


COMMANDS = {
    "simulate": cmd_simulate,
    "condition": cmd_condition,
    "correlate": cmd_correlate,
    "fit": cmd_fit,
    "postselect": cmd_postselect,
    "modes": cmd_modes,
}


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Pipeline config (JSON)")
    common.add_argument("--seed", type=int, default=None, help="Override the simulation seed")
    common.add_argument("--out", default="out", help="Output directory")
    common.add_argument("--threads", type=_positive_int, default=None, help="Worker cap (default PHONONCOUNTS_THREADS)")
    common.add_argument("--format", choices=["csv", "json"], default="csv", help="Tabular output format")

    parser = argparse.ArgumentParser(prog="phononcounts", description="Phonon-counting analysis pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="Simulate click streams")

    condition = sub.add_parser("condition", parents=[common], help="Afterpulse filter and burst rejection")
    condition.add_argument("input", help="Tag file (.ptg)")

    correlate = sub.add_parser("correlate", parents=[common], help="Coincidence histograms and coherences")
    correlate.add_argument("input", help="Tag file (.ptg)")
    correlate.add_argument("--order", type=int, action="append", choices=[2, 3, 4], help="Order (repeatable)")
    correlate.add_argument("--bin-width-ns", type=_positive_int, default=None, help="Bin width for every order")
    correlate.add_argument("--max-delay-ns", type=_positive_int, default=None, help="Delay range for every order")
    correlate.add_argument("--epsilon", type=float, default=None, help="Background ratio (0 disables correction)")

    fit = sub.add_parser("fit", parents=[common], help="Fit coherences, spectra or sideband rates")
    fit.add_argument("kind", choices=["coherence", "spectrum", "power", "temperature"])
    fit.add_argument("input", help="Histogram (.pch) for coherence, CSV otherwise")

    post = sub.add_parser("postselect", parents=[common], help="Heralded occupancy and conditional g2")
    post.add_argument("input", help="Tag file (.ptg)")
    post.add_argument("--k", type=int, choices=range(1, MAX_HERALDS + 1), default=None, help="Heralding clicks")
    post.add_argument("--side", choices=[s.value for s in DriveSide], default=None, help="Sideband of the stream")

    modes = sub.add_parser("modes", parents=[common], help="GAWBS transverse-mode frequencies")
    modes.add_argument("--alpha", type=float, default=None, help="Velocity ratio override")
    modes.add_argument("--m-max", type=_positive_int, default=None, help="Modes to solve")
    return parser


def apply_cli_overrides(config: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    """Fold subcommand flags into the config and re-validate."""
    payload = config.model_dump(mode="json")
    if args.command == "correlate":
        corr = payload["correlation"]
        for key in ("bin_width_ns", "max_delay_ns"):
            corr[key] = {str(order): value for order, value in corr[key].items()}
        if args.order:
            corr["orders"] = sorted(set(args.order))
        for order in corr["orders"]:
            if args.bin_width_ns:
                corr["bin_width_ns"][str(order)] = args.bin_width_ns
            if args.max_delay_ns:
                corr["max_delay_ns"][str(order)] = args.max_delay_ns
        if args.epsilon is not None:
            corr["epsilon"] = args.epsilon
    return parse_config(payload)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(env_log_level())

    try:
        config = apply_cli_overrides(load_config(args.config), args)
        ctx = RunContext(args, config)
        set_run_seed(ctx.seed)
        COMMANDS[args.command](args, ctx)
        ctx.write_manifest()
    except PhononCountsError as exc:
        logger.error(f"[CLI] {args.command} failed: {exc}")
        return exc.exit_code
    finally:
        set_run_seed(None)
    logger.info(f"[CLI] {args.command} wrote {len(ctx.outputs)} file(s) to {ctx.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
