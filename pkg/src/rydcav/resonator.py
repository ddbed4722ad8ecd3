"""Damped resonator mode driven by piecewise-constant microwave pulse sequences.

The mode field F(t) obeys the damped-driven oscillator equation

    F'' + (omega_res/Q) F' + omega_res^2 F = Pi(t) * exp(-i*omega_mu*t),

with Pi(t) the (complex) pulse envelope and omega_mu the carrier. Writing
F(t) = A(t) * exp(-i*omega_mu*t) and dropping A'' (slowly varying envelope)
leaves the first-order equation

    A' * (omega_res/Q - 2i*omega_mu)
        + (omega_res^2 - omega_mu^2 - i*omega_res*omega_mu/Q) * A = Pi(t).

For piecewise-constant Pi this is solved exactly, segment by segment, as an
exponential relaxation toward each segment's steady state, so the returned
envelopes carry no step-size error. Drive amplitudes are in arbitrary units;
only the product g* |A|^2 is physical downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooCoarseError

__all__ = [
    "ResonatorMode",
    "Pulse",
    "PulseSequence",
    "FieldTrace",
    "steady_state_amplitude",
    "lorentzian_power_response",
    "pulse_spectral_width",
    "simulate_field",
    "field_envelope_scan",
    "default_ring_down_tail",
    "reference_field_full_ode",
]

# Half-power point of sin(x)/x, i.e. the root of sin(x)/x = 1/sqrt(2).
# The |sinc|^2 power spectrum of a rectangular pulse of length T has
# FWHM 4*x0/T in angular frequency (= 0.8859/T in ordinary frequency).
_SINC_HALF_POWER = 1.3915573782515103

# Ring-down tail appended after the last pulse, in units of the amplitude
# time constant 2Q/omega_res; the field decays to < 1e-4 of its driven value.
_TAIL_IN_RINGDOWN_UNITS = 10.0


@dataclass(frozen=True)
class ResonatorMode:
    """One resonator mode: resonance frequency and quality factor.

    Attributes
    ----------
    omega_res : float
        Angular resonance frequency (rad/s), > 0.
    q_factor : float
        Dimensionless quality factor, > 0.
    """

    omega_res: float
    q_factor: float

    def __post_init__(self):
        if not np.isfinite(self.omega_res) or self.omega_res <= 0:
            raise ValueError(f"omega_res must be finite and > 0, got {self.omega_res}")
        if not np.isfinite(self.q_factor) or self.q_factor <= 0:
            raise ValueError(f"q_factor must be finite and > 0, got {self.q_factor}")

    @property
    def ring_down_time(self) -> float:
        """Amplitude 1/e time constant 2Q/omega_res (s)."""
        return 2.0 * self.q_factor / self.omega_res

    @property
    def linewidth(self) -> float:
        """FWHM of the power response, omega_res/Q (rad/s)."""
        return self.omega_res / self.q_factor


@dataclass(frozen=True)
class Pulse:
    """One rectangular drive segment: [start, start + duration) at a fixed
    complex amplitude (arbitrary field-source units; phase allowed)."""

    start: float
    duration: float
    amplitude: complex

    def __post_init__(self):
        if not np.isfinite(self.start):
            raise ValueError("pulse start must be finite")
        if not np.isfinite(self.duration) or self.duration <= 0:
            raise ValueError(f"pulse duration must be > 0, got {self.duration}")
        if not np.isfinite(self.amplitude):
            raise ValueError("pulse amplitude must be finite")

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class PulseSequence:
    """Piecewise-constant drive envelope Pi(t) with a single carrier.

    Segments must be time-ordered and non-overlapping; the envelope is zero
    outside all segments.
    """

    carrier: float  # omega_mu, rad/s
    pulses: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not np.isfinite(self.carrier) or self.carrier <= 0:
            raise ValueError(f"carrier must be finite and > 0, got {self.carrier}")
        pulses = tuple(self.pulses)
        for i, p in enumerate(pulses[1:], start=1):
            if p.start < pulses[i - 1].end:
                raise ValueError(
                    f"pulses must be time-ordered and non-overlapping; "
                    f"pulse {i} starts at {p.start} before {pulses[i - 1].end}"
                )
        object.__setattr__(self, "pulses", pulses)

    @classmethod
    def single(cls, carrier, duration, amplitude, start=0.0):
        return cls(carrier, (Pulse(start, duration, amplitude),))

    @classmethod
    def ramsey_pair(cls, carrier, duration, gap, amplitude, start=0.0):
        """Two identical pulses separated by an edge-to-edge gap."""
        return cls(
            carrier,
            (
                Pulse(start, duration, amplitude),
                Pulse(start + duration + gap, duration, amplitude),
            ),
        )

    @property
    def start(self) -> float:
        if not self.pulses:
            raise ValueError("empty pulse sequence has no start")
        return self.pulses[0].start

    @property
    def end(self) -> float:
        if not self.pulses:
            raise ValueError("empty pulse sequence has no end")
        return self.pulses[-1].end

    def envelope_at(self, t):
        """Drive envelope Pi(t) sampled at time(s) t."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for p in self.pulses:
            out[(t >= p.start) & (t < p.end)] = p.amplitude
        return out


@dataclass(frozen=True)
class FieldTrace:
    """Time-gridded complex intracavity field envelope A(t).

    The physical field is F(t) = A(t) * exp(-i*carrier*t). Arrays are marked
    read-only: traces are immutable once produced.
    """

    t_grid: np.ndarray
    envelope: np.ndarray
    carrier: float

    def __post_init__(self):
        t = np.ascontiguousarray(self.t_grid, dtype=float)
        env = np.ascontiguousarray(self.envelope, dtype=complex)
        if t.ndim != 1 or env.shape != t.shape:
            raise ValueError("t_grid and envelope must be 1-d arrays of equal length")
        if t.size >= 2 and np.any(np.diff(t) <= 0):
            raise ValueError("t_grid must be strictly increasing")
        if not np.isfinite(self.carrier) or self.carrier <= 0:
            raise ValueError(f"carrier must be finite and > 0, got {self.carrier}")
        t.flags.writeable = False
        env.flags.writeable = False
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "envelope", env)


def _envelope_coefficients(mode: ResonatorMode, omega_mu):
    """Coefficients (a, b) of the envelope equation a*A' + b*A = Pi.

    Accepts scalar or array omega_mu. The steady state is Pi/b and the
    homogeneous relaxation rate is b/a.
    """
    omega_mu = np.asarray(omega_mu, dtype=float)
    a = mode.omega_res / mode.q_factor - 2j * omega_mu
    b = (
        mode.omega_res**2
        - omega_mu**2
        - 1j * mode.omega_res * omega_mu / mode.q_factor
    )
    return a, b


def steady_state_amplitude(mode: ResonatorMode, omega_mu, drive):
    """Stationary envelope for a constant drive Pi(t) = drive.

    Returns drive / (omega_res^2 - omega_mu^2 - i*omega_res*omega_mu/Q),
    which satisfies the full second-order mode equation exactly when
    dA/dt = 0. Accepts scalar or array omega_mu.
    """
    if np.any(np.asarray(omega_mu) <= 0):
        raise ValueError("omega_mu must be > 0")
    _, b = _envelope_coefficients(mode, omega_mu)
    out = np.asarray(drive, dtype=complex) / b
    return complex(out) if out.ndim == 0 else out


def lorentzian_power_response(mode: ResonatorMode, omega):
    """Relative steady-state power response |A_ss(omega)|^2 / |A_ss(omega_res)|^2.

    Normalized to 1 at omega = omega_res; FWHM is omega_res/Q up to
    corrections of order 1/Q^2. Accepts scalar or array omega.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be > 0")
    _, b = _envelope_coefficients(mode, omega)
    _, b0 = _envelope_coefficients(mode, mode.omega_res)
    out = np.abs(b0) ** 2 / np.abs(b) ** 2
    return float(out) if out.ndim == 0 else out


def pulse_spectral_width(duration: float) -> float:
    """FWHM of the |sinc|^2 power spectrum of a rectangular pulse (rad/s).

    Equals 4*x0/duration with x0 the half-power point of sin(x)/x, i.e.
    about 2*pi*0.886/duration.
    """
    if not np.isfinite(duration) or duration <= 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    return 4.0 * _SINC_HALF_POWER / duration


def default_ring_down_tail(mode: ResonatorMode) -> float:
    """Default post-sequence tail: 10 amplitude time constants (s)."""
    return _TAIL_IN_RINGDOWN_UNITS * mode.ring_down_time


def _regions(pulses):
    """Split the time axis at pulse edges.

    Returns (boundaries, amplitudes): region k spans
    [boundaries[k], boundaries[k+1]) with constant drive amplitudes[k];
    the final region, from boundaries[-1] onward, is undriven.
    """
    edges = []
    for p in pulses:
        edges.append(p.start)
        edges.append(p.end)
    boundaries = np.array(sorted(set(edges)), dtype=float)
    amps = np.zeros(boundaries.size - 1, dtype=complex)
    mids = 0.5 * (boundaries[:-1] + boundaries[1:])
    for p in pulses:
        amps[(mids >= p.start) & (mids < p.end)] = p.amplitude
    return boundaries, amps


def _grid_step_limit(mode: ResonatorMode) -> float:
    return min(1e-9, mode.ring_down_time / 20.0)


def _check_grid(t_grid, mode: ResonatorMode):
    t_grid = np.ascontiguousarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2:
        raise ValueError("t_grid must be a 1-d array with at least two samples")
    dt = np.diff(t_grid)
    if np.any(dt <= 0):
        raise ValueError("t_grid must be strictly increasing")
    limit = _grid_step_limit(mode)
    if dt.max() > limit * (1.0 + 1e-9):
        raise GridTooCoarseError(
            f"grid step {dt.max():.3e} s exceeds the resolution bound "
            f"{limit:.3e} s (min of 1 ns and ring-down time / 20)"
        )
    return t_grid


def field_envelope_scan(mode: ResonatorMode, pulses, carriers, t_grid) -> np.ndarray:
    """Envelopes A(t) for one pulse timing pattern at many carrier frequencies.

    Parameters
    ----------
    mode : ResonatorMode
    pulses : sequence of Pulse
        Shared, time-ordered drive segments.
    carriers : array_like
        Carrier frequencies omega_mu (rad/s), one per scan point.
    t_grid : array_like
        Common time grid (s); same step bound as `simulate_field`.

    Returns
    -------
    ndarray, shape (len(carriers), len(t_grid)), complex
        Row j is the envelope for carriers[j]. Exact per constant segment.
    """
    carriers = np.atleast_1d(np.asarray(carriers, dtype=float))
    if np.any(carriers <= 0):
        raise ValueError("carriers must be > 0")
    t_grid = _check_grid(t_grid, mode) if len(pulses) else np.ascontiguousarray(
        t_grid, dtype=float
    )
    if not len(pulses):
        return np.zeros((carriers.size, t_grid.size), dtype=complex)

    a, b = _envelope_coefficients(mode, carriers)  # (B,)
    lam = b / a

    boundaries, amps = _regions(pulses)
    if t_grid[-1] < boundaries[-1]:
        raise ValueError(
            f"t_grid ends at {t_grid[-1]:.3e} s, before the pulse sequence "
            f"ends at {boundaries[-1]:.3e} s"
        )
    n_regions = amps.size
    # Steady state of each region for each carrier, plus the undriven tail.
    a_ss = np.concatenate(
        [amps[None, :] / b[:, None], np.zeros((carriers.size, 1))], axis=1
    )
    # Envelope at each region boundary, by exact exponential relaxation.
    a_bnd = np.zeros((carriers.size, boundaries.size), dtype=complex)
    for k in range(n_regions):
        dt = boundaries[k + 1] - boundaries[k]
        a_bnd[:, k + 1] = a_ss[:, k] + (a_bnd[:, k] - a_ss[:, k]) * np.exp(-lam * dt)

    out = np.zeros((carriers.size, t_grid.size), dtype=complex)
    # Region index for every grid time; -1 marks times before the first pulse.
    idx = np.searchsorted(boundaries, t_grid, side="right") - 1
    for k in range(n_regions + 1):
        sel = idx == k if k < n_regions else idx >= n_regions
        if not np.any(sel):
            continue
        kk = min(k, n_regions)
        t_rel = t_grid[sel] - boundaries[kk]
        decay = np.exp(-lam[:, None] * t_rel[None, :])
        out[:, sel] = a_ss[:, kk, None] + (a_bnd[:, kk] - a_ss[:, kk])[:, None] * decay
    return out


def simulate_field(mode: ResonatorMode, drive: PulseSequence, t_grid) -> FieldTrace:
    """Solve the envelope equation for a pulse sequence on a time grid.

    The grid must span the pulse sequence (plus whatever ring-down tail the
    caller wants) with step <= min(1 ns, ring_down_time/20). An empty
    sequence yields an all-zero trace. Within each constant-drive segment the
    solution is the exact exponential relaxation toward that segment's steady
    state; the trace is exact at the grid times.
    """
    env = field_envelope_scan(mode, drive.pulses, drive.carrier, t_grid)
    return FieldTrace(
        t_grid=np.asarray(t_grid, dtype=float), envelope=env[0], carrier=drive.carrier
    )


def reference_field_full_ode(mode: ResonatorMode, drive: PulseSequence, t_grid,
                             max_step: float = 1e-12):
    """Validation-only reference: integrate the full second-order mode equation.

    Classic fixed-step fourth-order integration of
    F'' + (omega_res/Q) F' + omega_res^2 F = Pi(t) exp(-i*omega_mu*t)
    from rest, with steps aligned to pulse edges so the discontinuous drive
    never falls inside a step. Returns the complex field F (carrier resolved)
    sampled at t_grid. Meant for short windows (~10 ns); cost grows as
    1/max_step.
    """
    t_grid = np.ascontiguousarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be 1-d and strictly increasing")
    if max_step <= 0 or max_step > 1e-12 * (1 + 1e-9):
        raise ValueError("max_step must be positive and <= 1 ps")

    w2 = mode.omega_res**2
    damp = mode.omega_res / mode.q_factor
    wm = drive.carrier

    # Integration checkpoints: every grid time and every pulse edge.
    edges = [p.start for p in drive.pulses] + [p.end for p in drive.pulses]
    checkpoints = np.unique(np.concatenate([t_grid, np.asarray(edges, dtype=float)]))
    checkpoints = checkpoints[(checkpoints >= t_grid[0]) & (checkpoints <= t_grid[-1])]

    def rhs(t, f, g, pi_k):
        return g, pi_k * np.exp(-1j * wm * t) - damp * g - w2 * f

    f = 0.0 + 0.0j
    g = 0.0 + 0.0j
    out = np.zeros(t_grid.size, dtype=complex)
    out_idx = {t: i for i, t in enumerate(t_grid)}
    if t_grid[0] in out_idx:
        out[out_idx[t_grid[0]]] = f
    for t0, t1 in zip(checkpoints[:-1], checkpoints[1:]):
        span = t1 - t0
        n = max(1, int(np.ceil(span / max_step)))
        h = span / n
        pi_k = complex(drive.envelope_at(0.5 * (t0 + t1))[()])
        t = t0
        for _ in range(n):
            k1f, k1g = rhs(t, f, g, pi_k)
            k2f, k2g = rhs(t + 0.5 * h, f + 0.5 * h * k1f, g + 0.5 * h * k1g, pi_k)
            k3f, k3g = rhs(t + 0.5 * h, f + 0.5 * h * k2f, g + 0.5 * h * k2g, pi_k)
            k4f, k4g = rhs(t + h, f + h * k3f, g + h * k3g, pi_k)
            f += h / 6.0 * (k1f + 2 * k2f + 2 * k3f + k4f)
            g += h / 6.0 * (k1g + 2 * k2g + 2 * k3g + k4g)
            t += h
        if t1 in out_idx:
            out[out_idx[t1]] = f
    return out
