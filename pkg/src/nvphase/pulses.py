"""Pulse sequences for preparing and reading out phase-encoded states.

All phase bookkeeping goes through :data:`CONVENTION`. With the drive
Hamiltonian of :func:`nvphase.nvmodel.drive_generator` (rotation about the
axis (cos p, sin p, 0)) a pi/2 pulse of drive phase p maps |a> to
(|a> + e^{i(p - pi/2)}|b>)/sqrt(2), hence the +pi/2 preparation offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Union

import numpy as np

from .nvmodel import (
    NoiseParams,
    SystemParams,
    Transition,
    drive_generator,
    evolve_free,
    evolve_pulse,
    initial_state,
)
from .qcore import DensityMatrix


@dataclass(frozen=True)
class PhaseConvention:
    """Calibrated relation between logical phases and applied drive phases.

    prep_offset
        added to the encoded phase of every pi/2 preparation pulse, so that
        the prepared coherence ``rho[b, a]`` has argument exactly phi.
    entangle_sign, entangle_offset
        the entangling MW pi pulse is applied at ``sign * phi + offset``,
        which doubles the phase on the (|1 up>, |0 down>) coherence.
    disentangle_phase
        phase of the MW pi pulse that maps the entangled coherence back onto
        the nuclear |0 up>, |0 down> pair without extra phase.
    readout_sign
        readout drives of nominal phase theta are applied at ``readout_sign * theta``;
        with -1 the signed Rabi amplitudes of the 0 and 90 degree drives are
        proportional to (sin phi, cos phi), so phi = atan2(A_x, A_y).
    """

    prep_offset: float = math.pi / 2
    entangle_sign: float = -1.0
    entangle_offset: float = math.pi / 2
    disentangle_phase: float = -math.pi / 2
    readout_sign: float = -1.0

    def prep_phase(self, phi: float) -> float:
        return phi + self.prep_offset

    def entangle_phase(self, phi: float) -> float:
        return self.entangle_sign * phi + self.entangle_offset

    def readout_phase(self, theta: float) -> float:
        return self.readout_sign * theta


CONVENTION = PhaseConvention()

X_DRIVE = 0.0
Y_DRIVE = math.pi / 2


@dataclass(frozen=True)
class Pulse:
    transition: Transition
    duration: float
    phase: float
    rabi_freq: float

    def __post_init__(self):
        object.__setattr__(self, "transition", Transition(self.transition))
        if not self.duration >= 0:
            raise ValueError("pulse duration must be >= 0")


@dataclass(frozen=True)
class FreeGap:
    duration: float

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError("gap duration must be >= 0")


Element = Union[Pulse, FreeGap]


@dataclass(frozen=True)
class PulseSequence:
    elements: tuple = ()

    def __post_init__(self):
        els = tuple(self.elements)
        for e in els:
            if not isinstance(e, (Pulse, FreeGap)):
                raise TypeError(f"not a sequence element: {e!r}")
        object.__setattr__(self, "elements", els)

    def __add__(self, other: "PulseSequence") -> "PulseSequence":
        return PulseSequence(self.elements + other.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def total_duration(self) -> float:
        return sum(e.duration for e in self.elements)

    def inverse(self) -> "PulseSequence":
        """Reversed sequence undoing every pulse (drive axis flipped by pi). Free gaps are dropped."""
        return PulseSequence(
            tuple(Pulse(p.transition, p.duration, p.phase + math.pi, p.rabi_freq)
                  for p in reversed(self.elements) if isinstance(p, Pulse)))

    def to_text(self) -> str:
        lines = ["# transition duration[s] phase[rad] rabi_freq[Hz]"]
        for e in self.elements:
            if isinstance(e, Pulse):
                lines.append(f"{e.transition.value} {float(e.duration)!r} {float(e.phase)!r} {float(e.rabi_freq)!r}")
            else:
                lines.append(f"FREE {float(e.duration)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PulseSequence":
        els: list[Element] = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            try:
                if tok[0] == "FREE" and len(tok) == 2:
                    els.append(FreeGap(float(tok[1])))
                elif len(tok) == 4:
                    els.append(Pulse(Transition(tok[0]), float(tok[1]), float(tok[2]), float(tok[3])))
                else:
                    raise ValueError("wrong field count")
            except ValueError as exc:
                raise ValueError(f"line {lineno}: cannot parse {line!r}: {exc}") from None
        return cls(tuple(els))


def rotation_pulse(transition: Transition, angle: float, phase: float, rabi_freq: float) -> Pulse:
    """Pulse of the given rotation angle (radians) at the given Rabi frequency."""
    return Pulse(transition, angle / (2 * math.pi * rabi_freq), phase, rabi_freq)


def prepare_single_nuclear(phi: float, params: SystemParams | None = None) -> PulseSequence:
    params = params or SystemParams()
    return PulseSequence((rotation_pulse(Transition.RF0, math.pi / 2, CONVENTION.prep_phase(phi),
                                         params.rf_rabi),))


def prepare_single_electron(phi: float, params: SystemParams | None = None) -> PulseSequence:
    params = params or SystemParams()
    return PulseSequence((rotation_pulse(Transition.MW_UP, math.pi / 2, CONVENTION.prep_phase(phi),
                                         params.mw_rabi),))


def prepare_entangled(phi: float, params: SystemParams | None = None) -> PulseSequence:
    params = params or SystemParams()
    mw = rotation_pulse(Transition.MW_UP, math.pi, CONVENTION.entangle_phase(phi), params.mw_rabi)
    return prepare_single_nuclear(phi, params) + PulseSequence((mw,))


def mapping_gate(efficiency: float = 1.0, params: SystemParams | None = None) -> PulseSequence:
    """Selective MW pi pulse on |0 up> <-> |1 up>, under-rotated to transfer probability ``efficiency``."""
    params = params or SystemParams()
    if not 0.0 <= efficiency <= 1.0:
        raise ValueError("efficiency must lie in [0, 1]")
    angle = 2 * math.asin(math.sqrt(efficiency))
    return PulseSequence((rotation_pulse(Transition.MW_UP, angle, 0.0, params.mw_rabi),))


def rabi_block(transition: Transition, drive_phase: float, duration: float,
               rabi_freq: float) -> PulseSequence:
    """Readout drive of nominal phase ``drive_phase``; the applied phase follows the convention."""
    if duration < 0:
        raise ValueError("duration must be >= 0")
    return PulseSequence((Pulse(transition, duration, CONVENTION.readout_phase(drive_phase), rabi_freq),))


def simulate(seq: PulseSequence, params: SystemParams | None = None,
             noise: NoiseParams | None = None, state: DensityMatrix | None = None) -> DensityMatrix:
    """Run ``seq`` left to right, starting from ``state`` or the initialized register."""
    params = params or SystemParams()
    noise = noise if noise is not None else NoiseParams.ideal()
    rho = initial_state(noise) if state is None else state
    for e in seq:
        if isinstance(e, Pulse):
            if e.duration == 0:
                continue
            drive = drive_generator(e.transition, e.phase, e.rabi_freq, params)
            rho = evolve_pulse(rho, drive, e.duration, noise)
        else:
            rho = evolve_free(rho, e.duration, noise)
    return rho


@dataclass(frozen=True)
class Probe:
    """A phase-measurement recipe: preparation, Rabi readout and sign conventions.

    ``signal_sign`` flips the fitted amplitudes when the dark level of the
    readout is the upper one of the driven pair (direct electron readout).
    ``phase_multiplier`` is 2 for the entangled probe whose coherence carries 2 phi.
    """

    name: str
    transition: Transition
    signal_sign: float
    phase_multiplier: int
    prepare: Callable[[float, SystemParams], PulseSequence]
    readout_prefix: Callable[[SystemParams, NoiseParams], PulseSequence]
    readout_suffix: Callable[[SystemParams, NoiseParams], PulseSequence]

    def rabi_freq(self, params: SystemParams) -> float:
        return params.mw_rabi if self.transition.species == "electron" else params.rf_rabi

    def sequence(self, phi: float, theta: float, duration: float,
                 params: SystemParams, noise: NoiseParams) -> PulseSequence:
        return (self.prepare(phi, params)
                + self.readout_prefix(params, noise)
                + rabi_block(self.transition, theta, duration, self.rabi_freq(params))
                + self.readout_suffix(params, noise))


def _empty(params, noise) -> PulseSequence:
    return PulseSequence()


def _mapping(params, noise) -> PulseSequence:
    return mapping_gate(noise.mapping_gate_efficiency, params)


def _disentangle(params, noise) -> PulseSequence:
    return PulseSequence((rotation_pulse(Transition.MW_UP, math.pi, CONVENTION.disentangle_phase,
                                         params.mw_rabi),))


PROBES = {
    "electron": Probe("electron", Transition.MW_UP, 1.0, 1, prepare_single_electron, _empty, _empty),
    "nuclear": Probe("nuclear", Transition.RF0, -1.0, 1, prepare_single_nuclear, _empty, _mapping),
    "entangled": Probe("entangled", Transition.RF0, -1.0, 2, prepare_entangled, _disentangle, _mapping),
}


def get_probe(name: str) -> Probe:
    try:
        return PROBES[name]
    except KeyError:
        raise ValueError(f"unknown probe {name!r}; expected one of {sorted(PROBES)}") from None


def rabi_durations(rabi_freq: float, periods: int = 2, points_per_period: int = 8) -> np.ndarray:
    """Evenly spaced drive durations covering whole Rabi periods (endpoint excluded)."""
    if periods < 1 or points_per_period * periods < 8:
        raise ValueError("need >= 8 samples spanning >= 1 Rabi period")
    n = periods * points_per_period
    return np.arange(n) * (periods / rabi_freq) / n


def concat(seqs: Iterable[PulseSequence]) -> PulseSequence:
    out = PulseSequence()
    for s in seqs:
        out = out + s
    return out
