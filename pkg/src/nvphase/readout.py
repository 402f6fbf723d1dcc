"""Spin-dependent fluorescence readout with Poisson shot noise.

Each repetition ends with a signal window and, after re-polarization, a
reference window of the same length. The analysed quantity is the ratio of
the accumulated signal and reference counts.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .nvmodel import NoiseParams, SystemParams, electron_zero_population
from .pulses import PulseSequence, simulate
from .qcore import DensityMatrix


class ReadoutError(ValueError):
    pass


@dataclass(frozen=True)
class ReadoutModel:
    bright_rate: float = 250e3  # counts/s for electron |0>
    window: float = 300e-9
    contrast: float = 0.30  # not a measured device value
    reference_delay: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.contrast < 1.0:
            raise ValueError("contrast must lie in (0, 1)")
        if not self.window > 0 or not self.bright_rate > 0:
            raise ValueError("window and bright_rate must be > 0")

    @property
    def photons_per_shot(self) -> float:
        """Mean reference photons per repetition."""
        return self.bright_rate * self.window

    def ratio_from_population(self, p0):
        return 1.0 - self.contrast * (1.0 - np.asarray(p0))

    def population_from_ratio(self, ratio):
        return 1.0 - (1.0 - np.asarray(ratio)) / self.contrast


@dataclass(frozen=True)
class ShotRecord:
    signal_counts: int
    reference_counts: int
    nu: int

    def __post_init__(self):
        if self.signal_counts < 0 or self.reference_counts < 0:
            raise ValueError("counts must be >= 0")

    @property
    def ratio(self) -> float:
        if self.reference_counts == 0:
            raise ReadoutError("no reference photons; ratio undefined")
        return self.signal_counts / self.reference_counts


def expected_ratio(state: DensityMatrix, model: ReadoutModel) -> float:
    return float(model.ratio_from_population(electron_zero_population(state)))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def sample_shots(state: DensityMatrix, model: ReadoutModel, nu: int, seed: int) -> ShotRecord:
    if nu < 1:
        raise ValueError("nu must be >= 1")
    rng = make_rng(seed)
    lam = nu * model.photons_per_shot
    sig = rng.poisson(lam * expected_ratio(state, model))
    ref = rng.poisson(lam)
    return ShotRecord(int(sig), int(ref), int(nu))


@dataclass(frozen=True, eq=False)
class RabiTrace:
    """Block-averaged normalized signal versus drive duration.

    ``sds`` is the sample SD of the ``blocks`` per-block ratios at each point.
    """

    durations: np.ndarray
    means: np.ndarray
    sds: np.ndarray
    nu: int
    blocks: int = 10

    def __post_init__(self):
        for name in ("durations", "means", "sds"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not len(self.durations) == len(self.means) == len(self.sds):
            raise ValueError("durations, means and sds must have equal lengths")
        if self.nu < 1:
            raise ValueError("nu must be >= 1")

    @property
    def standard_errors(self) -> np.ndarray:
        return self.sds / np.sqrt(self.blocks)

    def to_table(self) -> str:
        buf = io.StringIO()
        buf.write(f"# nu={self.nu} blocks={self.blocks}\n")
        buf.write("duration[s]\tmean[ratio]\tsd[ratio]\n")
        for t, m, s in zip(self.durations, self.means, self.sds):
            buf.write(f"{float(t)!r}\t{float(m)!r}\t{float(s)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_table(cls, text: str) -> "RabiTrace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        meta = dict(kv.split("=") for kv in lines[0].lstrip("# ").split())
        rows = np.array([[float(x) for x in ln.split("\t")] for ln in lines[2:]]).reshape(-1, 3)
        return cls(rows[:, 0], rows[:, 1], rows[:, 2], int(meta["nu"]), int(meta["blocks"]))


def expected_trace(sequence_for: Callable[[float], PulseSequence], durations: Sequence[float],
                   model: ReadoutModel, params: SystemParams | None = None,
                   noise: NoiseParams | None = None) -> np.ndarray:
    """Noise-free normalized signal at each duration."""
    return np.array([expected_ratio(simulate(sequence_for(t), params, noise), model)
                     for t in durations])


def sample_trace(ratios: np.ndarray, durations: Sequence[float], model: ReadoutModel, nu: int,
                 blocks: int, seed: int, stream: Sequence[int] = (), shot_noise: bool = True) -> RabiTrace:
    """Draw block-wise signal/reference counts around the expected ``ratios``.

    Block ``b`` uses the random stream ``(seed, *stream, b)``, so results do
    not depend on the order in which blocks are evaluated.
    """
    ratios = np.asarray(ratios, dtype=float)
    if blocks < 2:
        raise ReadoutError("at least 2 blocks are needed for a block SD")
    if nu < blocks:
        raise ReadoutError("nu must be at least the number of blocks")
    if not shot_noise:
        return RabiTrace(durations, ratios, np.zeros_like(ratios), nu, blocks)
    lam = (nu // blocks) * model.photons_per_shot
    values = np.empty((blocks, ratios.size))
    for b in range(blocks):
        rng = make_rng(seed, *stream, b)
        sig = rng.poisson(lam * ratios)
        ref = rng.poisson(lam, size=ratios.size)
        if np.any(ref == 0):
            raise ReadoutError("a block recorded no reference photons; increase nu")
        values[b] = sig / ref
    return RabiTrace(durations, values.mean(axis=0), values.std(axis=0, ddof=1), nu, blocks)


def measure_trace(sequence_for: Callable[[float], PulseSequence], durations: Sequence[float],
                  model: ReadoutModel, nu: int, blocks: int = 10, seed: int = 0,
                  params: SystemParams | None = None, noise: NoiseParams | None = None,
                  shot_noise: bool = True) -> RabiTrace:
    if len(durations) < 8:
        raise ReadoutError("a Rabi trace needs at least 8 duration samples")
    ratios = expected_trace(sequence_for, durations, model, params, noise)
    return sample_trace(ratios, durations, model, nu, blocks, seed, shot_noise=shot_noise)


def ratio_variance(ratio, shots, model: ReadoutModel):
    """Large-count variance of signal/reference for ``shots`` repetitions."""
    r = np.asarray(ratio)
    return r * (1.0 + r) / (np.asarray(shots) * model.photons_per_shot)
