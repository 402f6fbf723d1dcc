"""Two-qubit state tomography on the three working transitions.

Every coherence is read as the signed quadrature of a Rabi trace on one of the
working transitions 0<->1 (nuclear, followed by the mapping gate), 0<->2 and
1<->3 (electron, read directly). Coherences outside these pairs are first moved
into the 0<->1 pair by selective pi pulses. The measured quadratures are related
to the density matrix through Heisenberg-picture observables computed from the
same pulse model, and the matrix is recovered by a trace-constrained linear
least-squares inversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .nvmodel import LEVEL_LABELS, NoiseParams, SystemParams, Transition
from .pulses import PulseSequence, mapping_gate, rabi_block, rotation_pulse, simulate
from .qcore import DensityMatrix
from .readout import ReadoutModel, sample_trace

WORKING = (Transition.RF0, Transition.MW_UP, Transition.MW_DOWN)
THETAS_DEG = (0.0, 90.0)
POINTS = 128
BLOCKS = 10

# pi pulses that carry each indirect coherence into the 0<->1 pair
_TRANSFERS = {
    (0, 3): (Transition.MW_DOWN,),
    (1, 2): (Transition.MW_UP,),
    (2, 3): (Transition.MW_UP, Transition.MW_DOWN),
}


class TomographyError(RuntimeError):
    pass


@dataclass(frozen=True)
class TomoSetting:
    target: tuple[int, int]
    component: str
    working: Transition
    theta_deg: float
    prefix: tuple[Transition, ...] = ()

    @property
    def direct(self) -> bool:
        return not self.prefix

    def rabi_freq(self, params: SystemParams) -> float:
        return params.mw_rabi if self.working.species == "electron" else params.rf_rabi

    def readout(self, duration: float, params: SystemParams, noise: NoiseParams) -> PulseSequence:
        """Transfer pulses, working-transition drive and (for 0<->1) the mapping gate."""
        pre = PulseSequence(tuple(rotation_pulse(tr, math.pi, 0.0, params.mw_rabi) for tr in self.prefix))
        drive = rabi_block(self.working, math.radians(self.theta_deg), duration, self.rabi_freq(params))
        seq = pre + drive
        if self.working is Transition.RF0:
            seq = seq + mapping_gate(noise.mapping_gate_efficiency, params)
        return seq


@dataclass(frozen=True)
class TomographySchedule:
    settings: tuple[TomoSetting, ...]

    def __len__(self) -> int:
        return len(self.settings)

    def __iter__(self):
        return iter(self.settings)

    def to_text(self) -> str:
        lines = ["# target component working theta[deg] prefix"]
        for s in self.settings:
            prefix = "+".join(t.value for t in s.prefix) or "-"
            lines.append(f"{s.target[0]},{s.target[1]} {s.component} {s.working.value} "
                         f"{s.theta_deg:g} {prefix}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TomographySchedule":
        out = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tgt, comp, work, theta, prefix = line.split()
            i, j = (int(v) for v in tgt.split(","))
            pre = () if prefix == "-" else tuple(Transition(p) for p in prefix.split("+"))
            out.append(TomoSetting((i, j), comp, Transition(work), float(theta), pre))
        return cls(tuple(out))


def _hermitian_basis() -> list[tuple[str, tuple[int, int], np.ndarray]]:
    """Real parametrization rho = sum_k x_k B_k of 4x4 Hermitian matrices."""
    basis = []
    for i in range(4):
        b = np.zeros((4, 4), dtype=complex)
        b[i, i] = 1
        basis.append(("diag", (i, i), b))
    for i in range(4):
        for j in range(i + 1, 4):
            re = np.zeros((4, 4), dtype=complex)
            re[i, j] = re[j, i] = 1
            im = np.zeros((4, 4), dtype=complex)
            im[i, j], im[j, i] = -1j, 1j  # rho[i, j] = x_re - i x_im, rho[j, i] = x_re + i x_im
            basis.append(("real", (i, j), re))
            basis.append(("imag", (i, j), im))
    return basis


_BASIS = _hermitian_basis()
_INDEX = {(kind, ij): k for k, (kind, ij, _) in enumerate(_BASIS)}


def _vector(rho: np.ndarray) -> np.ndarray:
    return np.array([np.trace(b @ rho).real / (1 if kind == "diag" else 2) for kind, _, b in _BASIS])


def _matrix(x: np.ndarray) -> np.ndarray:
    return sum(v * b for v, (_, _, b) in zip(x, _BASIS))


def _probe_states() -> list[DensityMatrix]:
    """Sixteen pure states whose projectors span the Hermitian 4x4 matrices."""
    states = []
    for i in range(4):
        v = np.zeros(4, dtype=complex)
        v[i] = 1
        states.append(v)
    for i in range(4):
        for j in range(i + 1, 4):
            for ph in (1, 1j):
                v = np.zeros(4, dtype=complex)
                v[i], v[j] = 1, ph
                states.append(v / math.sqrt(2))
    return [DensityMatrix.from_pure(v) for v in states]


_PROBES = _probe_states()
_PROBE_SOLVE = np.linalg.inv(np.array([_vector(s.matrix) for s in _PROBES]))


def _observable(seq: PulseSequence, params: SystemParams, noise: NoiseParams) -> np.ndarray:
    """Coefficients g with P(electron 0 after seq | rho) = g . x(rho)."""
    vals = []
    for s in _PROBES:
        p = simulate(seq, params, noise, state=s).populations()
        vals.append(p[0] + p[1])
    return _PROBE_SOLVE @ np.array(vals)


def _design(points: int) -> np.ndarray:
    a = 2 * np.pi * np.arange(points) / points
    return np.column_stack([np.ones_like(a), np.cos(a), np.sin(a)])


@lru_cache(maxsize=256)
def quadrature_observables(setting: TomoSetting, params: SystemParams,
                           noise: NoiseParams, points: int = POINTS) -> np.ndarray:
    """Rows (offset, cos, sin) of the bright population y0 + C cos(a) + S sin(a).

    The rows are the least-squares projection, over the same duration grid the
    traces are fitted on, of the observable at every grid point. Fitted trace
    coefficients are therefore exactly linear in rho even when driven decay
    bends the signal away from a pure sinusoid.
    """
    f = setting.rabi_freq(params)
    t = np.arange(points) / (points * f)
    m = np.array([_observable(setting.readout(d, params, noise), params, noise) for d in t])
    out = np.linalg.lstsq(_design(points), m, rcond=None)[0]
    out.setflags(write=False)
    return out


def _component_of(setting_rows: np.ndarray, target: tuple[int, int]) -> str:
    s = setting_rows[2]
    re, im = s[_INDEX[("real", target)]], s[_INDEX[("imag", target)]]
    return "real" if abs(re) >= abs(im) else "imag"


@lru_cache(maxsize=1)
def build_schedule() -> TomographySchedule:
    """Six coherences, each at drive phases 0 and 90 degrees (12 Rabi traces).

    The three direct working-transition pairs also yield one population
    difference each, which together with the unit trace fixes the diagonal.
    """
    params, noise = SystemParams(), NoiseParams.ideal()
    targets = [(0, 1), (0, 2), (1, 3), (0, 3), (1, 2), (2, 3)]
    working = {(0, 1): Transition.RF0, (0, 2): Transition.MW_UP, (1, 3): Transition.MW_DOWN}
    out = []
    for tgt in targets:
        for theta in THETAS_DEG:
            s = TomoSetting(tgt, "", working.get(tgt, Transition.RF0), theta, _TRANSFERS.get(tgt, ()))
            comp = _component_of(quadrature_observables(s, params, noise, 8), tgt)
            out.append(TomoSetting(s.target, comp, s.working, s.theta_deg, s.prefix))
    return TomographySchedule(tuple(out))


def _simplex(w: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(u) + 1)
    r = int(np.max(np.nonzero(u - (css - 1) / k > 0)[0]))
    return np.clip(w - (css[r] - 1) / (r + 1), 0.0, None)


PROJECTIONS = ("shift", "scale")


def project_psd(matrix: np.ndarray, method: str = "shift") -> DensityMatrix:
    """Nearest physical state by eigenvalue clipping.

    ``shift`` lowers all eigenvalues by a common amount before clipping at zero,
    so the trace stays one (the Frobenius-closest density matrix). ``scale``
    clips first and divides by the remaining trace.
    """
    if method not in PROJECTIONS:
        raise ValueError(f"method must be one of {PROJECTIONS}")
    h = np.asarray(matrix, dtype=complex)
    h = (h + h.conj().T) / 2
    w, v = np.linalg.eigh(h)
    if method == "shift":
        w = _simplex(w / max(w.sum(), 1e-300)) if w.sum() > 0 else w
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise TomographyError("reconstruction has no positive eigenvalues")
    rho = (v * (w / w.sum())) @ v.conj().T
    return DensityMatrix((rho + rho.conj().T) / 2)


def _clean(w: np.ndarray) -> np.ndarray:
    # eigenvalues at round-off level would become ~1e-8 after the square root
    w = np.clip(w, 0.0, None)
    w[w < 1e-13 * max(float(w.max()), 1e-300)] = 0.0
    return w


def _sqrt_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return (v * np.sqrt(_clean(w))) @ v.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if not isinstance(rho, DensityMatrix) or not isinstance(sigma, DensityMatrix):
        raise TypeError("fidelity needs two DensityMatrix values")
    if rho.dim != sigma.dim:
        raise ValueError("dimension mismatch")
    s = _sqrt_psd(rho.matrix)
    inner = s @ sigma.matrix @ s
    w = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    return float(np.sum(np.sqrt(_clean(w))) ** 2)


@dataclass(frozen=True, eq=False)
class TomographyResult:
    rho: DensityMatrix
    linear: np.ndarray
    raw_estimates: dict = field(repr=False)
    fidelity: float | None = None
    target: DensityMatrix | None = None

    def frobenius_error(self, projected: bool = True) -> float:
        if self.target is None:
            raise TomographyError("no target state supplied")
        m = self.rho.matrix if projected else self.linear
        return float(np.linalg.norm(m - self.target.matrix))

    def to_tables(self) -> dict[str, str]:
        """Real and imaginary component tables in level order."""
        return {part: component_table(self.rho.matrix, part) for part in ("real", "imag")}


def component_table(matrix: np.ndarray, part: str) -> str:
    vals = np.real(matrix) if part == "real" else np.imag(matrix)
    lines = ["row[level]\t" + "\t".join(f"{lab}[{part}]" for lab in LEVEL_LABELS)]
    for lab, row in zip(LEVEL_LABELS, vals):
        lines.append(lab + "\t" + "\t".join(f"{v:.6f}" for v in row))
    return "\n".join(lines) + "\n"


def _constrained_lstsq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """min |a x - b| subject to unit trace, via the KKT system."""
    c = np.zeros(a.shape[1])
    c[:4] = 1.0
    n = a.shape[1]
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = 2 * a.T @ a
    kkt[:n, n] = kkt[n, :n] = c
    rhs = np.concatenate([2 * a.T @ b, [1.0]])
    if np.linalg.matrix_rank(kkt) < n + 1:
        raise TomographyError("schedule does not determine every matrix element")
    return np.linalg.solve(kkt, rhs)[:n]


def run_tomography(prep: PulseSequence, nu: int, seed: int = 0, params: SystemParams | None = None,
                   noise: NoiseParams | None = None, target: DensityMatrix | None = None,
                   initial: DensityMatrix | None = None, shot_noise: bool = True,
                   model: ReadoutModel | None = None, schedule: TomographySchedule | None = None,
                   points: int = POINTS, projection: str = "shift") -> TomographyResult:
    """Simulate every schedule entry, fit the traces and invert for the density matrix.

    ``target`` defaults to the state the model actually prepares, so the
    reported fidelity measures the reconstruction alone.
    """
    if nu < 1e4:
        raise ValueError("tomography needs nu >= 1e4 repetitions per point")
    params = params or SystemParams()
    noise = noise if noise is not None else NoiseParams.ideal()
    model = model or ReadoutModel()
    schedule = schedule or build_schedule()
    prepared = simulate(prep, params, noise, state=initial)
    if target is None:
        target = prepared

    rows, obs = [], []
    raw: dict = {}
    diag_rows, diag_obs = [], []
    for k, s in enumerate(schedule):
        f = s.rabi_freq(params)
        t = np.arange(points) / (points * f)
        ratios = np.array([_bright_ratio(simulate(s.readout(d, params, noise), params, noise,
                                                  state=prepared), model) for d in t])
        trace = sample_trace(ratios, t, model, int(nu), BLOCKS, seed, stream=(k,), shot_noise=shot_noise)
        pop = model.population_from_ratio(trace.means)
        coef = np.linalg.lstsq(_design(points), pop, rcond=None)[0]
        q = quadrature_observables(s, params, noise, points)
        rows.append(q)
        obs.append(coef)
        kidx = _INDEX[(s.component, s.target)]
        raw[(s.target, s.component, s.theta_deg)] = float(coef[2] / q[2, kidx])
        if s.direct:
            diag_rows.append(q[1, :4])
            diag_obs.append(coef[1])

    a_mat = np.vstack(rows)
    b_vec = np.concatenate(obs)
    x = _constrained_lstsq(a_mat, b_vec)
    linear = _matrix(x)

    # populations from the three direct working transitions plus the unit trace
    d = np.vstack(diag_rows + [np.ones(4)])
    pops = np.linalg.lstsq(d, np.concatenate([diag_obs, [1.0]]), rcond=None)[0]
    for i in range(4):
        raw[((i, i), "diag", None)] = float(pops[i])

    rho = project_psd(linear, projection)
    return TomographyResult(rho, linear, raw, fidelity(rho, target), target)


def _bright_ratio(state: DensityMatrix, model: ReadoutModel) -> float:
    p = state.populations()
    return float(model.ratio_from_population(p[0] + p[1]))


def element_estimates(result: TomographyResult) -> dict:
    """Averaged raw estimate of each matrix element (complex for coherences)."""
    out: dict = {}
    for (tgt, comp, _), v in result.raw_estimates.items():
        out.setdefault(tgt, {}).setdefault(comp, []).append(v)
    res = {}
    for tgt, comps in out.items():
        if "diag" in comps:
            res[tgt] = float(np.mean(comps["diag"]))
        else:
            re = float(np.mean(comps.get("real", [0.0])))
            im = float(np.mean(comps.get("imag", [0.0])))
            res[tgt] = complex(re, -im)  # rho[i, j] for i < j
    return res


__all__ = [
    "TomoSetting", "TomographySchedule", "TomographyResult", "TomographyError", "build_schedule",
    "run_tomography", "fidelity", "project_psd", "component_table", "element_estimates",
    "quadrature_observables",
]
