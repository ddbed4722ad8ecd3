"""Two-level Bloch dynamics driven two-photon by the squared resonator field.

The state is a real Bloch vector r = (r_x, r_y, r_z) obeying

    dr/dt = T(t) x r - Gamma . r,

with elementwise damping Gamma . r = (G_x r_x, G_y r_y, G_z r_z). Work is
done in the frame rotating at twice the drive carrier, where the two-photon
torque is

    T(t) = (g* Re[A(t)^2], g* Im[A(t)^2], delta),   delta = omega_atom - 2*omega_mu,

A(t) the intracavity field envelope and delta the two-photon detuning;
counter-rotating terms at 4*omega_mu are dropped. Convention: r_z = +1 means
all population in the lower state, so the upper-state population is
(1 - r_z)/2.

Integration is classic fourth-order fixed-step on the field grid, with
internal substepping keeping the rotation per substep below 0.01 rad and the
envelope interpolated linearly between grid samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridTooCoarseError
from .resonator import FieldTrace

__all__ = [
    "AtomParams",
    "BlochState",
    "BlochTrajectory",
    "bloch_rhs",
    "evolve",
    "evolve_final_states",
    "population_upper",
]

# Maximum Bloch rotation per integrator substep (rad).
_MAX_STEP_PHASE = 0.01
# Maximum rotation per *grid* interval beyond which the linearly
# interpolated envelope cannot be trusted.
_MAX_GRID_PHASE = 0.5


@dataclass(frozen=True)
class AtomParams:
    """Two-photon transition parameters of the (ensemble-average) atom.

    Attributes
    ----------
    omega_atom : float
        Total two-photon transition angular frequency (rad/s), > 0. The
        drive is resonant at carrier omega_atom/2.
    g_star : float
        Normalized coupling (rad/s per squared field unit), real.
    gamma : ndarray, shape (3,)
        Decay rates of (r_x, r_y, r_z) in 1/s, each >= 0. Pure ensemble
        dephasing is (1/T2, 1/T2, 0).
    """

    omega_atom: float
    g_star: float
    gamma: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.omega_atom) or self.omega_atom <= 0:
            raise ValueError(f"omega_atom must be > 0, got {self.omega_atom}")
        if not np.isfinite(self.g_star):
            raise ValueError("g_star must be finite and real")
        g = np.ascontiguousarray(self.gamma, dtype=float)
        if g.shape != (3,) or not np.all(np.isfinite(g)) or np.any(g < 0):
            raise ValueError("gamma must be three finite non-negative rates")
        g.flags.writeable = False
        object.__setattr__(self, "gamma", g)

    @classmethod
    def pure_dephasing(cls, omega_atom, g_star, t2):
        """Atom whose only decoherence is transverse dephasing at rate 1/t2."""
        if t2 <= 0:
            raise ValueError(f"t2 must be > 0, got {t2}")
        return cls(omega_atom, g_star, np.array([1.0 / t2, 1.0 / t2, 0.0]))


@dataclass(frozen=True)
class BlochState:
    """Bloch vector (r_x, r_y, r_z); |r| <= 1 within numerical slack."""

    r: np.ndarray

    def __post_init__(self):
        r = np.ascontiguousarray(self.r, dtype=float)
        if r.shape != (3,) or not np.all(np.isfinite(r)):
            raise ValueError("r must be a finite 3-vector")
        if np.linalg.norm(r) > 1.0 + 1e-9:
            raise ValueError(f"|r| = {np.linalg.norm(r)} exceeds 1")
        r.flags.writeable = False
        object.__setattr__(self, "r", r)

    @classmethod
    def lower(cls):
        """All population in the lower state: r = (0, 0, +1)."""
        return cls(np.array([0.0, 0.0, 1.0]))


@dataclass(frozen=True)
class BlochTrajectory:
    """Bloch vector sampled on a time grid; row i of `r` is the state at
    t_grid[i], the first row being the initial state."""

    t_grid: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(self.t_grid, dtype=float)
        r = np.ascontiguousarray(self.r, dtype=float)
        if t.ndim != 1 or r.shape != (t.size, 3):
            raise ValueError("need t_grid (n,) and r (n, 3)")
        t.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "r", r)

    @property
    def populations(self) -> np.ndarray:
        """Upper-state population (1 - r_z)/2 per sample."""
        return np.clip(0.5 * (1.0 - self.r[:, 2]), 0.0, 1.0)

    def final_state(self) -> BlochState:
        return BlochState(self.r[-1].copy())


def population_upper(state: BlochState) -> float:
    """Upper-state population (1 - r_z)/2 of one state."""
    return float(np.clip(0.5 * (1.0 - state.r[2]), 0.0, 1.0))


def bloch_rhs(r, torque, gamma):
    """Time derivative T x r - Gamma . r (elementwise damping).

    All arguments are 3-vectors (or broadcastable stacks with the component
    axis last)."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(torque, dtype=float)
    g = np.asarray(gamma, dtype=float)
    return np.cross(t, r) - g * r


def _integrate(g_star, gamma, deltas, t_grid, envelopes, r0, store, rate=None):
    """Fixed-step RK4 over the field grid for a batch of drive conditions.

    envelopes: (B, n) complex; deltas, and r0 rows, per batch element.
    Returns (B, n, 3) when store else (B, 3). `rate` (rad/s) sets the
    substep resolution; by default it is bounded from this batch's maximum
    drive strength and detuning.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    env = np.atleast_2d(np.asarray(envelopes, dtype=complex))
    deltas = np.broadcast_to(np.asarray(deltas, dtype=float), (env.shape[0],))
    n_b, n_t = env.shape
    if t_grid.shape != (n_t,):
        raise ValueError("envelope and t_grid lengths differ")
    gx, gy, gz = (float(g) for g in gamma)

    dts = np.diff(t_grid)
    if rate is None:
        drive_max = abs(g_star) * float(np.max(np.abs(env)) ** 2) if env.size else 0.0
        rate = np.hypot(drive_max, float(np.max(np.abs(deltas)))) + max(gx, gy, gz)
    if rate > 0 and dts.max() * rate > _MAX_GRID_PHASE:
        raise GridTooCoarseError(
            f"grid step {dts.max():.3e} s allows {dts.max() * rate:.2f} rad of "
            f"Bloch rotation per sample; need <= {_MAX_GRID_PHASE} rad"
        )

    rx = np.full(n_b, float(r0[0])) if np.ndim(r0) == 1 else r0[:, 0].astype(float)
    ry = np.full(n_b, float(r0[1])) if np.ndim(r0) == 1 else r0[:, 1].astype(float)
    rz = np.full(n_b, float(r0[2])) if np.ndim(r0) == 1 else r0[:, 2].astype(float)
    tz = deltas

    if store:
        out = np.empty((n_b, n_t, 3))
        out[:, 0, 0], out[:, 0, 1], out[:, 0, 2] = rx, ry, rz

    def rhs(rx, ry, rz, tx, ty):
        return (
            ty * rz - tz * ry - gx * rx,
            tz * rx - tx * rz - gy * ry,
            tx * ry - ty * rx - gz * rz,
        )

    for i in range(n_t - 1):
        n_sub = max(1, int(np.ceil(rate * dts[i] / _MAX_STEP_PHASE)))
        h = dts[i] / n_sub
        e0 = env[:, i]
        de = env[:, i + 1] - e0
        for s in range(n_sub):
            sq0 = (e0 + de * (s / n_sub)) ** 2
            sqm = (e0 + de * ((s + 0.5) / n_sub)) ** 2
            sq1 = (e0 + de * ((s + 1.0) / n_sub)) ** 2
            tx0, ty0 = g_star * sq0.real, g_star * sq0.imag
            txm, tym = g_star * sqm.real, g_star * sqm.imag
            tx1, ty1 = g_star * sq1.real, g_star * sq1.imag

            k1x, k1y, k1z = rhs(rx, ry, rz, tx0, ty0)
            k2x, k2y, k2z = rhs(
                rx + 0.5 * h * k1x, ry + 0.5 * h * k1y, rz + 0.5 * h * k1z, txm, tym
            )
            k3x, k3y, k3z = rhs(
                rx + 0.5 * h * k2x, ry + 0.5 * h * k2y, rz + 0.5 * h * k2z, txm, tym
            )
            k4x, k4y, k4z = rhs(
                rx + h * k3x, ry + h * k3y, rz + h * k3z, tx1, ty1
            )
            rx = rx + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            ry = ry + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            rz = rz + h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        if store:
            out[:, i + 1, 0], out[:, i + 1, 1], out[:, i + 1, 2] = rx, ry, rz

    if store:
        return out
    return np.stack([rx, ry, rz], axis=1)


def evolve(atom: AtomParams, field: FieldTrace, initial: BlochState) -> BlochTrajectory:
    """Integrate the rotating-frame Bloch equations along one field trace.

    The two-photon detuning is delta = atom.omega_atom - 2*field.carrier.
    Raises GridTooCoarseError when the field grid cannot resolve the faster
    of the drive rate g*|A|^2 and |delta|.
    """
    delta = atom.omega_atom - 2.0 * field.carrier
    r = _integrate(
        atom.g_star, atom.gamma, np.array([delta]),
        field.t_grid, field.envelope[None, :], initial.r, store=True,
    )
    return BlochTrajectory(t_grid=field.t_grid.copy(), r=r[0])


def evolve_final_states(g_star, gamma, deltas, t_grid, envelopes,
                        initial: BlochState, rate=None):
    """Final Bloch vectors for a batch of (detuning, envelope) pairs.

    This is the vectorized scan path used for spectra: `envelopes` has one
    row per scan point sharing `t_grid`, and `deltas` holds the matching
    two-photon detunings. Returns an (n_scan, 3) array. When `rate` is
    supplied the substep resolution is fixed by the caller, making results
    independent of how a larger scan was chunked across workers.
    """
    return _integrate(g_star, gamma, deltas, t_grid, envelopes, initial.r,
                      store=False, rate=rate)
