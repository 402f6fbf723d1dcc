"""Fisher information, quantum Fisher information and Cramer-Rao bounds."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .qcore import MAX_DIM, DensityMatrix, Povm, PureState, outcome_pdf

PROB_FLOOR = 1e-12
DEFAULT_DPHI = 1e-5
MAX_QUBITS = 4


class FisherConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class StateFamily:
    """phi -> state map. ``evaluator`` returns a DensityMatrix or PureState."""

    evaluator: Callable[[float], object]
    dim: int
    analytic_derivative: Callable[[float], np.ndarray] | None = None

    def __call__(self, phi: float):
        return self.evaluator(phi)

    def density(self, phi: float) -> DensityMatrix:
        s = self.evaluator(phi)
        return s.density() if isinstance(s, PureState) else s


@dataclass(frozen=True)
class CrbReport:
    fisher: float
    qfi: float
    bound: float
    nu: float

    def __post_init__(self):
        if not 0 <= self.fisher <= self.qfi + 1e-8:
            raise ValueError("Fisher information must lie in [0, QFI]")


def _fisher(family: StateFamily, povm: Povm, phi: float, dphi: float) -> float:
    p = outcome_pdf(family.density(phi), povm)
    dp = (outcome_pdf(family.density(phi + dphi), povm)
          - outcome_pdf(family.density(phi - dphi), povm)) / (2 * dphi)
    keep = p > PROB_FLOOR
    return float(np.sum(dp[keep] ** 2 / p[keep]))


def fisher_information(family: StateFamily, povm: Povm, phi: float, dphi: float = DEFAULT_DPHI,
                       richardson: bool = False) -> float:
    """Classical Fisher information sum_k (d_phi p_k)^2 / p_k by central differences.

    With ``richardson=True`` the value is recomputed at dphi/2 and a relative
    change above 1e-4 raises :class:`FisherConvergenceError`.
    """
    if not dphi > 0:
        raise ValueError("dphi must be > 0")
    f = _fisher(family, povm, phi, dphi)
    if richardson:
        f2 = _fisher(family, povm, phi, dphi / 2)
        if abs(f2 - f) > 1e-4 * max(abs(f2), 1e-12):
            raise FisherConvergenceError(f"F changed from {f:.8g} to {f2:.8g} on halving dphi")
    return max(f, 0.0)


def qfi_pure(family: StateFamily, phi: float, dphi: float = DEFAULT_DPHI) -> float:
    """4 (<d psi|d psi> - |<psi|d psi>|^2) for a pure-state family."""
    if not dphi > 0:
        raise ValueError("dphi must be > 0")
    states = [family(phi + s * dphi) for s in (-1, 0, 1)]
    for s in states:
        if not isinstance(s, PureState):
            raise TypeError("qfi_pure needs a family of PureState values")
    psi = states[1].amplitudes
    if family.analytic_derivative is not None:
        dpsi = np.asarray(family.analytic_derivative(phi), dtype=complex)
    else:
        dpsi = (states[2].amplitudes - states[0].amplitudes) / (2 * dphi)
    val = 4.0 * (np.vdot(dpsi, dpsi).real - abs(np.vdot(psi, dpsi)) ** 2)
    return max(float(val), 0.0)


def crb(fisher: float, nu: float = 1) -> float:
    """Cramer-Rao bound 1 / sqrt(nu F)."""
    if not fisher > 0:
        raise ValueError("Fisher information must be > 0")
    if nu < 1:
        raise ValueError("nu must be >= 1")
    return 1.0 / math.sqrt(nu * fisher)


def crb_report(family: StateFamily, povm: Povm, phi: float, nu: float,
               dphi: float = DEFAULT_DPHI) -> CrbReport:
    f = fisher_information(family, povm, phi, dphi)
    q = qfi_pure(family, phi, dphi)
    return CrbReport(f, q, crb(f, nu), nu)


def _plus_phase(phi: float, n_phase: float) -> np.ndarray:
    return np.array([1.0, np.exp(-1j * n_phase * phi)]) / math.sqrt(2)


def separable_family(n: int) -> StateFamily:
    """[(|0> + e^{-i phi}|1>)/sqrt 2]^{(x) n}."""
    _check_n(n)

    def ev(phi):
        v = np.array([1.0 + 0j])
        for _ in range(n):
            v = np.kron(v, _plus_phase(phi, 1))
        return PureState(v)

    return StateFamily(ev, 2 ** n)


def ghz_family(n: int) -> StateFamily:
    """(|0...0> + e^{-i n phi}|1...1>)/sqrt 2."""
    _check_n(n)
    d = 2 ** n

    def ev(phi):
        v = np.zeros(d, dtype=complex)
        v[0] = 1 / math.sqrt(2)
        v[-1] = np.exp(-1j * n * phi) / math.sqrt(2)
        return PureState(v)

    return StateFamily(ev, d)


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS or 2 ** n > MAX_DIM:
        raise ValueError(f"qubit number must lie in 1..{MAX_QUBITS}, got {n}")


def parity_povm(n: int, angle: float | None = None) -> Povm:
    """Two-outcome parity of the n-fold product of cos(a) X + sin(a) Y.

    The default a = pi / (2n) gives p(+/-) = (1 -/+ sin(n phi)) / 2 on the GHZ
    family, which saturates its QFI of n^2.
    """
    if angle is None:
        angle = math.pi / (2 * n)
    op = math.cos(angle) * np.array([[0, 1], [1, 0]]) + math.sin(angle) * np.array([[0, -1j], [1j, 0]])
    big = np.array([[1.0 + 0j]])
    for _ in range(n):
        big = np.kron(big, op)
    eye = np.eye(2 ** n)
    return Povm([(eye + big) / 2, (eye - big) / 2], ["+", "-"])


def scaling_table(n_values, kind: str, phi: float = 0.3, nu: float = 1.0,
                  dphi: float = DEFAULT_DPHI) -> list[dict]:
    """QFI and bound per qubit number for separable or GHZ probes."""
    factories = {"separable": separable_family, "ghz": ghz_family}
    if kind not in factories:
        raise ValueError(f"kind must be one of {sorted(factories)}")
    rows = []
    for n in n_values:
        q = qfi_pure(factories[kind](int(n)), phi, dphi)
        rows.append({"N": int(n), "kind": kind, "qfi": q, "bound": crb(q, nu),
                     "expected_qfi": float(n if kind == "separable" else n * n)})
    return rows


def table_text(rows: list[dict], columns: list[tuple[str, str]]) -> str:
    """Tab-separated table with a ``name[unit]`` header row."""
    buf = io.StringIO()
    buf.write("\t".join(f"{c}[{u}]" for c, u in columns) + "\n")
    for r in rows:
        buf.write("\t".join(_fmt(r[c]) for c, _ in columns) + "\n")
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def readout_fisher_information(ratios_of: Callable[[float], np.ndarray], photons: np.ndarray,
                               phi: float, dphi: float = 1e-4) -> float:
    """Fisher information about phi carried by ratio-normalized photon counts.

    ``ratios_of(phi)`` gives the expected signal/reference ratio r_k of every
    readout point and ``photons`` the mean reference photons n_k collected at
    each point. Signal ~ Poisson(n_k r_k) and reference ~ Poisson(n_k) with the
    brightness treated as an unknown per point; eliminating it leaves
    F = sum_k n_k (d r_k / d phi)^2 / (r_k (1 + r_k)).
    """
    r = np.asarray(ratios_of(phi), dtype=float)
    dr = (np.asarray(ratios_of(phi + dphi)) - np.asarray(ratios_of(phi - dphi))) / (2 * dphi)
    return float(np.sum(np.asarray(photons) * dr ** 2 / (r * (1 + r))))
