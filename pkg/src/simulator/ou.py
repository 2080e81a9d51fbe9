"""
Exact discretization of the rotating-frame Ornstein-Uhlenbeck amplitude.

    beta(t + dt) = beta(t) e^{-gamma dt / 2} + xi sqrt(n (1 - e^{-gamma dt}))

with xi a circular complex Gaussian of unit mean modulus squared, so that
<beta*(t + tau) beta(t)> = n e^{-gamma tau / 2} for any step size.
"""

from typing import Optional

import numpy as np

from ..errors import ConfigError
from .schemas import OscillatorParams, OscState


# Largest decay exponent handled in one vectorized block
_MAX_BLOCK_DECAY = 200.0


def circular_gaussian(rng: np.random.Generator, size: Optional[int] = None) -> complex | np.ndarray:
    """Complex normal draw with E|xi|^2 = 1."""
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return (re + 1j * im) * np.sqrt(0.5)


def stationary_state(occupancy: float, rng: np.random.Generator, t_ns: float = 0.0) -> OscState:
    """Draw from the stationary distribution, <|beta|^2> = occupancy."""
    return OscState(beta=complex(circular_gaussian(rng) * np.sqrt(occupancy)), t_ns=t_ns)


def ou_step(
    state: OscState,
    dt: float,
    osc: OscillatorParams,
    rng: np.random.Generator,
    occupancy: Optional[float] = None,
) -> OscState:
    """
    Advance the amplitude by dt seconds.

    Args:
        state: Current amplitude
        dt: Step in seconds, >= 0
        osc: Oscillator parameters
        rng: Seeded generator
        occupancy: Override of osc.n_ac (the Stokes side runs at n_ac + 1)
    """
    if dt < 0:
        raise ConfigError(f"ou_step needs dt >= 0, got {dt}")
    if dt == 0:
        return state
    n = osc.n_ac if occupancy is None else occupancy
    decay = np.exp(-0.5 * osc.gamma_ac_bar * dt)
    spread = np.sqrt(n * -np.expm1(-osc.gamma_ac_bar * dt))
    beta = state.beta * decay + circular_gaussian(rng) * spread
    return OscState(beta=complex(beta), t_ns=state.t_ns + dt * 1e9)


def ou_sample_path(
    beta0: complex,
    t0: float,
    times: np.ndarray,
    gamma_bar: float,
    occupancy: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Exact amplitudes at ascending sample times (seconds), starting from beta0 at t0.

    Equivalent to chaining ou_step between consecutive samples, but evaluated
    in blocks via cumulative sums of rescaled kicks.
    """
    times = np.asarray(times, dtype=float)
    n = len(times)
    out = np.empty(n, dtype=complex)
    if n == 0:
        return out
    gaps = np.diff(times, prepend=t0)
    if (gaps < 0).any():
        raise ConfigError("sample times must be ascending and not precede t0")

    kicks = circular_gaussian(rng, n) * np.sqrt(occupancy * -np.expm1(-gamma_bar * gaps))
    half = 0.5 * gamma_bar
    span = _MAX_BLOCK_DECAY / half

    beta = complex(beta0)
    start = 0
    while start < n:
        beta = beta * np.exp(-half * gaps[start]) + kicks[start]
        out[start] = beta
        anchor = times[start]
        stop = int(np.searchsorted(times, anchor + span, side="right"))
        if stop > start + 1:
            block = slice(start + 1, stop)
            log_decay = -half * (times[block] - anchor)
            out[block] = np.exp(log_decay) * (beta + np.cumsum(kicks[block] * np.exp(-log_decay)))
            beta = out[stop - 1]
        start = max(stop, start + 1)
    return out
