"""Flat key-value run configuration.

Config files are human-readable text: one `section.key = value` pair per
line, `#` starts a comment. All frequencies are ordinary frequencies in Hz
in config files and are converted to angular frequencies (rad/s, factor
2*pi) when domain objects are built.
"""

from __future__ import annotations

import numpy as np

from .bloch import AtomParams
from .errors import ConfigError
from .experiment import RamseyConfig
from .resonator import ResonatorMode

__all__ = ["RunConfig", "parse_config"]

_TWO_PI = 2.0 * np.pi


class RunConfig:
    """Parsed configuration with typed accessors and domain-object builders.

    Missing required keys raise ConfigError naming the key.
    """

    def __init__(self, entries: dict, source: str = "<config>"):
        self.entries = dict(entries)
        self.source = source

    def get(self, key, default=None):
        return self.entries.get(key, default)

    def require(self, key) -> str:
        if key not in self.entries:
            raise ConfigError(f"{self.source}: missing required config key: {key}")
        return self.entries[key]

    def get_float(self, key, default=None) -> float:
        raw = self.entries.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"{self.source}: missing required config key: {key}")
            return float(default)
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{self.source}: key {key}: {exc}") from exc

    def get_int(self, key, default=None) -> int:
        raw = self.entries.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"{self.source}: missing required config key: {key}")
            return int(default)
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{self.source}: key {key}: {exc}") from exc

    # domain-object builders -------------------------------------------------

    def mode(self) -> ResonatorMode:
        try:
            return ResonatorMode(
                omega_res=_TWO_PI * self.get_float("mode.omega_res_hz"),
                q_factor=self.get_float("mode.q_factor"),
            )
        except ValueError as exc:
            raise ConfigError(f"{self.source}: mode.*: {exc}") from exc

    def atom(self) -> AtomParams:
        try:
            return AtomParams.pure_dephasing(
                omega_atom=_TWO_PI * self.get_float("atom.omega_atom_hz"),
                g_star=self.get_float("atom.g_star"),
                t2=self.get_float("atom.t2_s"),
            )
        except ValueError as exc:
            raise ConfigError(f"{self.source}: atom.*: {exc}") from exc

    def atom_for_fit(self) -> AtomParams:
        """Atom parameters for Ramsey fitting: g* is a fitted quantity, so
        the config value is optional here and only seeds the placeholder."""
        try:
            return AtomParams.pure_dephasing(
                omega_atom=_TWO_PI * self.get_float("atom.omega_atom_hz"),
                g_star=self.get_float("atom.g_star", default=1.0),
                t2=self.get_float("atom.t2_s"),
            )
        except ValueError as exc:
            raise ConfigError(f"{self.source}: atom.*: {exc}") from exc

    def frequency_grid(self) -> np.ndarray:
        start = self.get_float("sequence.freq_start_hz")
        stop = self.get_float("sequence.freq_stop_hz")
        step = self.get_float("sequence.freq_step_hz")
        if step <= 0 or stop <= start:
            raise ConfigError(
                f"{self.source}: sequence frequency grid needs "
                "freq_stop_hz > freq_start_hz and freq_step_hz > 0"
            )
        n = int(round((stop - start) / step)) + 1
        return _TWO_PI * (start + step * np.arange(n))

    def ramsey(self) -> RamseyConfig:
        tail = self.get("sequence.ring_down_tail_s")
        try:
            return RamseyConfig(
                pulse_duration=self.get_float("sequence.pulse_duration_s"),
                gap=self.get_float("sequence.gap_s"),
                drive_amplitude=self.get_float("sequence.amplitude"),
                frequency_grid=self.frequency_grid(),
                ring_down_tail=float(tail) if tail is not None else None,
            )
        except ValueError as exc:
            raise ConfigError(f"{self.source}: sequence.*: {exc}") from exc

    def rabi_durations(self) -> np.ndarray:
        start = self.get_float("sequence.duration_start_s")
        stop = self.get_float("sequence.duration_stop_s")
        step = self.get_float("sequence.duration_step_s")
        if step <= 0 or stop <= start or start <= 0:
            raise ConfigError(
                f"{self.source}: sequence duration grid needs "
                "0 < duration_start_s < duration_stop_s and duration_step_s > 0"
            )
        n = int(round((stop - start) / step)) + 1
        return start + step * np.arange(n)

    def rabi_carrier(self) -> float:
        return _TWO_PI * self.get_float("sequence.omega_mu_hz")

    def amplitude(self) -> float:
        return self.get_float("sequence.amplitude")

    def seed(self, override=None) -> int:
        if override is not None:
            return int(override)
        return self.get_int("fit.seed", default=0)

    def max_iterations(self) -> int:
        return self.get_int("fit.max_iterations", default=100)

    def noise_sigma(self) -> float:
        return self.get_float("synth.noise_sigma", default=0.03)


def parse_config(path) -> RunConfig:
    """Parse a flat key-value config file."""
    entries = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
        entries[key] = value
    return RunConfig(entries, source=str(path))
