"""
Cox-process click generation.

Signal clicks come from thinning a dominating homogeneous Poisson process
against the piecewise-frozen intensity R |beta|^2 / n_eff, where beta is
only sampled at the grid steps that hold a candidate. Background clicks are
an independent homogeneous Poisson process merged afterwards.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from .. import __version__
from ..errors import ConfigError
from ..tagstream import TagStream
from ..utils import get_logger
from .detector import apply_detector_artifacts
from .ou import ou_sample_path, stationary_state
from .schemas import MAX_DT_GAMMA, SimPlan


logger = get_logger("simulator")

# Expected number of thinning candidates handled per chunk
CHUNK_CANDIDATES = 1 << 18


def _signal_segment(
    plan: SimPlan,
    start_ns: int,
    end_ns: int,
    dt_ns: float,
    seed: np.random.SeedSequence,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Thinned signal clicks in [start_ns, end_ns); returns (times_ns, channels, final bound factor)."""
    rng = np.random.default_rng(seed)
    rate = plan.detected_sideband_rate
    n_eff = plan.effective_occupancy
    factor = plan.bound_factor
    if rate == 0 or n_eff == 0:
        return np.empty(0), np.empty(0, np.uint8), factor

    gamma = plan.osc.gamma_ac_bar
    state = stationary_state(n_eff, rng, t_ns=float(start_ns))
    beta, beta_t = state.beta, state.t_ns

    kept = []
    a = float(start_ns)
    while a < end_ns:
        chunk_ns = max(dt_ns, CHUNK_CANDIDATES / (rate * factor) * 1e9)
        b = min(a + chunk_ns, float(end_ns))
        while True:
            lam_max = rate * factor
            n_cand = rng.poisson(lam_max * (b - a) * 1e-9)
            cand = np.sort(rng.uniform(a, b, n_cand))
            steps, inverse = np.unique(np.floor((cand - start_ns) / dt_ns), return_inverse=True)
            grid_t = start_ns + steps * dt_ns
            betas = ou_sample_path(beta, beta_t * 1e-9, grid_t * 1e-9, gamma, n_eff, rng)
            intensity = rate * np.abs(betas) ** 2 / n_eff
            if len(intensity) and intensity.max() > lam_max:
                factor *= 2.0
                logger.debug(f"[Simulator] thinning bound raised to {factor:g}x mean rate")
                continue
            accept = rng.random(n_cand) < intensity[inverse] / lam_max
            kept.append(cand[accept])
            if len(steps):
                beta, beta_t = betas[-1], grid_t[-1]
            break
        a = b

    times = np.concatenate(kept) if kept else np.empty(0)
    channels = (rng.random(len(times)) >= plan.detector.split_ratio).astype(np.uint8)
    return times, channels, factor


def _background(plan: SimPlan, seed: np.random.SeedSequence) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    rate = plan.background_rate + plan.detector.dark_and_stray_rate
    count = rng.poisson(rate * plan.duration_ns * 1e-9) if plan.duration_ns else 0
    times = rng.uniform(0.0, plan.duration_ns, count)
    channels = (rng.random(count) >= plan.detector.split_ratio).astype(np.uint8)
    return times, channels


def _discard_guards(stream: TagStream, spans: list[tuple[int, int]]) -> TagStream:
    keep = np.ones(len(stream), dtype=bool)
    for lo, hi in spans:
        keep[np.searchsorted(stream.timestamps, lo) : np.searchsorted(stream.timestamps, hi)] = False
    logger.debug(f"[Simulator] discarded {int((~keep).sum())} clicks in {len(spans)} join guard(s)")
    return stream.select(keep)


def simulate_stream(plan: SimPlan, workers: int = 1, artifacts: bool = True) -> TagStream:
    """
    Generate the click stream described by a plan.

    Args:
        plan: Simulation plan; its seed fixes every random draw
        workers: Threads used across segments (output does not depend on it)
        artifacts: Apply the plan's detector model as the final stage

    Returns:
        Sorted TagStream with provenance metadata
    """
    dt_ns = plan.resolved_dt_ns()
    if dt_ns * 1e-9 * plan.osc.gamma_ac_bar > MAX_DT_GAMMA:
        raise ConfigError(
            f"dt_ns={dt_ns:g} too coarse: dt * gamma_ac_bar must be <= {MAX_DT_GAMMA}"
        )
    if plan.detector.channel_count < 2 and plan.detector.split_ratio < 1.0:
        raise ConfigError("a single-channel detector needs split_ratio = 1")
    spans = plan.guard_spans()
    if spans and plan.segment_ns <= 2 * plan.segment_guard_ns():
        raise ConfigError(
            f"segment_ns={plan.segment_ns} must exceed twice the join guard of {plan.segment_guard_ns()} ns"
        )

    root = np.random.SeedSequence(plan.seed)
    signal_seed, background_seed, detector_seed = root.spawn(3)
    bounds = plan.segment_bounds()
    seeds = signal_seed.spawn(len(bounds))

    logger.info(
        f"[Simulator] {plan.side.value} n_ac={plan.osc.n_ac:g} rate={plan.detected_sideband_rate:g}/s "
        f"over {plan.duration_ns * 1e-9:g} s in {len(bounds)} segment(s)"
    )
    jobs = [(plan, lo, hi, dt_ns, s) for (lo, hi), s in zip(bounds, seeds)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _signal_segment(*job), jobs))
    else:
        parts = [_signal_segment(*job) for job in jobs]

    bg_times, bg_chans = _background(plan, background_seed)
    times = np.concatenate([p[0] for p in parts] + [bg_times])
    chans = np.concatenate([p[1] for p in parts] + [bg_chans])
    final_factor = max([p[2] for p in parts], default=plan.bound_factor)

    metadata = {
        "generator": "phononcounts.simulator",
        "generator_version": __version__,
        "seed": plan.seed,
        "side": plan.side.value,
        "n_ac": plan.osc.n_ac,
        "gamma_ac_bar": plan.osc.gamma_ac_bar,
        "detected_sideband_rate": plan.detected_sideband_rate,
        "background_rate": plan.background_rate + plan.detector.dark_and_stray_rate,
        "dt_ns": dt_ns,
        "segments": len(bounds),
        "segment_join": (
            "each segment restarts from an independent stationary draw; "
            f"tags within {plan.segment_guard_ns()} ns (10/gamma_bar) of an interior join are discarded"
        ),
        "guard_spans_ns": [[lo, hi] for lo, hi in spans],
        "channel_semantics": f"one optical signal split, fraction {plan.detector.split_ratio:g} to channel 0",
        "thinning_bound_factor": final_factor,
    }
    stream = TagStream.from_unsorted(
        np.floor(times).astype(np.int64),
        chans,
        duration_ns=plan.duration_ns,
        channel_count=plan.detector.channel_count,
        metadata=metadata,
    )
    if artifacts:
        stream = apply_detector_artifacts(stream, plan.detector, detector_seed)
    if spans:
        stream = _discard_guards(stream, spans)
    logger.info(f"[Simulator] generated {len(stream)} clicks ({stream.mean_rate():.1f}/s)")
    return stream


def simulate_streams(plans: list[SimPlan], workers: Optional[int] = None) -> list[TagStream]:
    """Run several independent plans, e.g. the points of a power sweep."""
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(simulate_stream, plans))
    return [simulate_stream(p) for p in plans]
