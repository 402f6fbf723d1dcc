"""The NV electron + 13C nuclear two-qubit register.

Level ordering (global, used by every module)::

    0 = |0 up>   1 = |0 down>   2 = |1 up>   3 = |1 down>

Electron |0>/|1> are m_S = 0 / -1, the nuclear spin is the inner factor.
Dynamics are in the rotating frame on resonance (RWA); frequencies are in Hz
and times in seconds throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path

import numpy as np

from .config import parse_key_values
from .qcore import DensityMatrix, KrausChannel, apply_channel, apply_unitary

LEVEL_LABELS = ("0u", "0d", "1u", "1d")
ELECTRON_ZERO_LEVELS = (0, 1)


class Transition(str, Enum):
    """Selectively driven two-level transitions, as (lower, upper) level pairs."""

    MW_UP = "MW_UP"  # |0 up> <-> |1 up>
    MW_DOWN = "MW_DOWN"  # |0 down> <-> |1 down>
    RF0 = "RF0"  # |0 up> <-> |0 down>
    RF1 = "RF1"  # |1 up> <-> |1 down>

    @property
    def levels(self) -> tuple[int, int]:
        return _TRANSITION_LEVELS[self]

    @property
    def species(self) -> str:
        return "electron" if self in (Transition.MW_UP, Transition.MW_DOWN) else "nuclear"


_TRANSITION_LEVELS = {
    Transition.MW_UP: (0, 2),
    Transition.MW_DOWN: (1, 3),
    Transition.RF0: (0, 1),
    Transition.RF1: (2, 3),
}


class SelectivityError(ValueError):
    """Drive too strong for the transition to stay selective under RWA."""


@dataclass(frozen=True)
class SystemParams:
    zero_field_splitting: float = 2.87e9
    hyperfine_coupling: float = 12.8e6
    nuclear_resonance_ms0: float = 495e3
    nuclear_larmor: float = 542e3
    magnetic_field_gauss: float = 507.0
    # Drive strengths used by the compiled experiments.
    mw_rabi: float = 1.0e6
    rf_rabi: float = 50e3
    enforce_selectivity: bool = True

    def __post_init__(self):
        for name in ("zero_field_splitting", "hyperfine_coupling", "nuclear_resonance_ms0",
                     "nuclear_larmor", "mw_rabi", "rf_rabi"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.hyperfine_coupling <= 10 * self.nuclear_resonance_ms0:
            raise ValueError("hyperfine coupling must exceed 10x the nuclear resonance for selective control")

    def selectivity_gap(self, transition: Transition) -> float:
        # RF0 competes with its own Zeeman splitting; the others are separated by the hyperfine term
        if transition is Transition.RF0:
            return self.nuclear_resonance_ms0
        return self.hyperfine_coupling

    @classmethod
    def from_file(cls, path: str | Path) -> "SystemParams":
        return _load(cls, Path(path).read_text())


@dataclass(frozen=True)
class NoiseParams:
    """Decoherence and imperfect-control parameters. Defaults are the measured device values."""

    t2_star_electron: float = 0.72e-6
    t2_star_nuclear_ms0: float = 270e-6
    t2_star_nuclear_ms1: float = 212e-6
    t1_electron: float = 5e-3
    t1rho_nuclear: float = 1.3e-3
    t1rho_electron: float = math.inf
    mapping_gate_efficiency: float = 0.92
    nuclear_init_polarization: float = 0.85
    electron_init_polarization: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name.startswith("t"):
                if not v > 0:
                    raise ValueError(f"{f.name} must be > 0")
            elif not 0.0 <= v <= 1.0:
                raise ValueError(f"{f.name} must lie in [0, 1]")

    @classmethod
    def ideal(cls) -> "NoiseParams":
        inf = math.inf
        return cls(inf, inf, inf, inf, inf, inf, 1.0, 1.0, 1.0)

    @classmethod
    def preset(cls, name: str) -> "NoiseParams":
        if name == "ideal":
            return cls.ideal()
        if name == "paper":
            return cls()
        raise ValueError(f"unknown noise preset {name!r}; expected 'ideal' or 'paper'")

    @classmethod
    def from_file(cls, path: str | Path) -> "NoiseParams":
        return _load(cls, Path(path).read_text())


def _load(cls, text: str):
    values = parse_key_values(text)
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, raw in values.items():
        if key not in known:
            raise ValueError(f"unknown key {key!r} for {cls.__name__}")
        if known[key].type in ("bool", bool):
            kwargs[key] = raw.strip().lower() in ("1", "true", "yes", "on")
        else:
            kwargs[key] = float(raw)
    return cls(**kwargs)


def initial_state(noise: NoiseParams) -> DensityMatrix:
    pe = noise.electron_init_polarization
    pn = noise.nuclear_init_polarization
    return DensityMatrix(np.diag(np.kron([pe, 1 - pe], [pn, 1 - pn])).astype(complex))


@dataclass(frozen=True, eq=False)
class Drive:
    """Rotating-frame drive of one transition: H = (rabi/2)(e^{-i phase}|a><b| + h.c.)."""

    transition: Transition
    phase: float
    rabi_freq: float
    matrix: np.ndarray

    def rotation(self, duration: float) -> np.ndarray:
        """Closed form of exp(-i H 2 pi t) for the two-level block."""
        a, b = self.transition.levels
        half = math.pi * self.rabi_freq * duration
        u = np.eye(4, dtype=complex)
        c, s = math.cos(half), math.sin(half)
        u[a, a] = u[b, b] = c
        u[a, b] = -1j * s * np.exp(-1j * self.phase)
        u[b, a] = -1j * s * np.exp(1j * self.phase)
        return u


def drive_generator(transition: Transition | str, phase: float, rabi_freq: float,
                    params: SystemParams | None = None) -> Drive:
    transition = Transition(transition)
    params = params or SystemParams()
    if not rabi_freq > 0:
        raise ValueError("rabi_freq must be > 0")
    limit = 0.2 * params.selectivity_gap(transition)
    if params.enforce_selectivity and rabi_freq > limit * (1 + 1e-12):
        raise SelectivityError(
            f"Rabi frequency {rabi_freq:.4g} Hz exceeds 20% of the {transition.value} "
            f"selectivity gap ({limit:.4g} Hz); set enforce_selectivity=False to override")
    a, b = transition.levels
    h = np.zeros((4, 4), dtype=complex)
    h[a, b] = 0.5 * rabi_freq * np.exp(-1j * phase)
    h[b, a] = 0.5 * rabi_freq * np.exp(1j * phase)
    h.setflags(write=False)
    return Drive(transition, float(phase), float(rabi_freq), h)


def _driven_decay(drive: Drive, duration: float, t1rho: float) -> KrausChannel | None:
    if math.isinf(t1rho) or duration == 0:
        return None
    e = math.exp(-duration / t1rho)
    a, b = drive.transition.levels
    # Dressed basis: eigenvectors of the drive within the (a, b) block.
    w = np.eye(4, dtype=complex)
    ph = np.exp(1j * drive.phase)
    w[a, a], w[b, a] = 1 / math.sqrt(2), ph / math.sqrt(2)
    w[a, b], w[b, b] = 1 / math.sqrt(2), -ph / math.sqrt(2)
    # Lorentzian spread of the rotation angle: E[e^{-i d}] = e, E[e^{-i d/2}] = sqrt(e)
    d = np.ones((4, 4), dtype=complex)
    for i in range(4):
        if i not in (a, b):
            d[a, i] = d[i, a] = d[b, i] = d[i, b] = math.sqrt(e)
    d[a, b] = d[b, a] = e
    return KrausChannel.from_schur(d, basis=w)


def evolve_pulse(state: DensityMatrix, drive: Drive, duration: float,
                 noise: NoiseParams | None = None) -> DensityMatrix:
    """Resonant drive for ``duration``; decay of the Rabi envelope at 1/T1rho of the driven spin."""
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if duration == 0:
        return state
    out = apply_unitary(state, drive.rotation(duration))
    if noise is not None:
        t1rho = noise.t1rho_electron if drive.transition.species == "electron" else noise.t1rho_nuclear
        ch = _driven_decay(drive, duration, t1rho)
        if ch is not None:
            out = apply_channel(out, ch)
    return out


def _gaussian(t: float, t2: float) -> float:
    return 1.0 if math.isinf(t2) else math.exp(-((t / t2) ** 2))


def free_evolution_channels(duration: float, noise: NoiseParams) -> list[KrausChannel]:
    """Kraus sets for free precession: electron and nuclear dephasing, then electron T1."""
    chans = []
    g = _gaussian(duration, noise.t2_star_electron)
    h0 = _gaussian(duration, noise.t2_star_nuclear_ms0)
    h1 = _gaussian(duration, noise.t2_star_nuclear_ms1)
    # Each factor is a random phase on a set of levels, hence PSD.
    d = np.ones((4, 4))
    for i in (0, 1):
        for j in (2, 3):
            d[i, j] = d[j, i] = g
    dn0 = np.ones((4, 4))
    dn0[1, :] = dn0[:, 1] = h0
    dn0[1, 1] = 1.0
    dn1 = np.ones((4, 4))
    dn1[3, :] = dn1[:, 3] = h1
    dn1[3, 3] = 1.0
    damp = d * dn0 * dn1
    if not np.allclose(damp, 1.0):
        chans.append(KrausChannel.from_schur(damp))
    if not math.isinf(noise.t1_electron):
        p = 1.0 - math.exp(-duration / noise.t1_electron)
        k0 = np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex)
        k1 = np.array([[0, math.sqrt(p)], [0, 0]], dtype=complex)
        eye = np.eye(2)
        chans.append(KrausChannel((np.kron(k0, eye), np.kron(k1, eye))))
    return chans


def evolve_free(state: DensityMatrix, duration: float, noise: NoiseParams) -> DensityMatrix:
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if duration == 0:
        return state
    for ch in free_evolution_channels(duration, noise):
        state = apply_channel(state, ch)
    return state


def electron_zero_population(state: DensityMatrix) -> float:
    p = state.populations()
    return float(p[0] + p[1])
