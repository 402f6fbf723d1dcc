"""Statistical estimation: Rabi-trace fits, phase extraction and scaling-law fits."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares, lsq_linear

from .infotheory import crb, readout_fisher_information
from .nvmodel import NoiseParams, SystemParams
from .pulses import X_DRIVE, Y_DRIVE, get_probe, rabi_durations
from .readout import ReadoutModel, RabiTrace, expected_trace, make_rng, sample_trace

# A phase-encoded equatorial state gives Rabi signals starting at the mean, i.e. a
# sine. Fitting cos(2 pi f t + RABI_PHASE_OFFSET) makes A the sine amplitude.
RABI_PHASE_OFFSET = -math.pi / 2

KINDS = ("single", "entangled")
ACCOUNTING_MODES = ("per_point", "per_trace")
_PROBE_STREAM = {"electron": 1, "nuclear": 2, "entangled": 3}


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class CosineFit:
    amplitude: float
    offset: float
    frequency: float
    tau: float | None
    residual_norm: float
    amplitude_se: float = 0.0
    offset_se: float = 0.0
    frequency_se: float = 0.0
    phase_offset: float = 0.0
    nfev: int = 0

    def model(self, t):
        t = np.asarray(t, dtype=float)
        env = 1.0 if self.tau is None else np.exp(-t / self.tau)
        return self.offset + self.amplitude * np.cos(2 * np.pi * self.frequency * t + self.phase_offset) * env


def _weights(trace: RabiTrace, weighting: str) -> tuple[np.ndarray, bool]:
    """Per-point standard errors and whether they are absolute."""
    se = trace.standard_errors
    if weighting == "sd":
        if np.all(se > 0):
            return se, True
        return np.ones_like(se), False
    if weighting == "pooled":
        pooled = math.sqrt(float(np.mean(se ** 2)))
        if pooled > 0:
            return np.full_like(se, pooled), True
        return np.ones_like(se), False
    if weighting == "uniform":
        return np.ones_like(se), False
    raise ValueError(f"unknown weighting {weighting!r}")


def _is_flat(y: np.ndarray) -> bool:
    return float(np.ptp(y)) <= 1e-14 * max(1.0, float(np.max(np.abs(y))))


def _fft_frequency(t: np.ndarray, y: np.ndarray) -> float:
    dt = float(np.median(np.diff(t)))
    n = 64 * len(t)
    power = np.abs(np.fft.rfft(y - y.mean(), n=n))
    freqs = np.fft.rfftfreq(n, d=dt)
    return float(freqs[1 + np.argmax(power[1:])])


def _fit_traces(traces: Sequence[RabiTrace], fixed_freq: float | None, phase_offset: float,
                decay: bool, weighting: str, freq_guess: float | None) -> list[CosineFit]:
    """Joint fit of offset and amplitude per trace with a shared frequency (and decay)."""
    t = [np.asarray(tr.durations) for tr in traces]
    y = [np.asarray(tr.means) for tr in traces]
    for tt in t:
        if len(tt) < 5:
            raise FitError("a cosine fit needs at least 5 points")
    if all(_is_flat(yy) for yy in y):
        raise FitError("degenerate trace: all values equal")
    ws = [_weights(tr, weighting) for tr in traces]
    absolute = all(a for _, a in ws)
    sig = [w for w, _ in ws]
    n_tr = len(traces)

    if fixed_freq is not None:
        if not fixed_freq > 0:
            raise ValueError("fixed_freq must be > 0")
        f0 = float(fixed_freq)
    elif freq_guess is not None:
        f0 = float(freq_guess)
    else:
        # the trace with the largest swing carries the frequency
        k = int(np.argmax([np.ptp(yy) for yy in y]))
        f0 = _fft_frequency(t[k], y[k])

    def basis(tt, f, tau):
        env = 1.0 if tau is None else np.exp(-tt / tau)
        return np.cos(2 * np.pi * f * tt + phase_offset) * env

    # linear solve for offsets and amplitudes at f0
    lin = []
    for tt, yy, ss in zip(t, y, sig):
        a = np.column_stack([np.ones_like(tt), basis(tt, f0, None)]) / ss[:, None]
        lin.append(np.linalg.lstsq(a, yy / ss, rcond=None)[0])
    x0 = np.concatenate(lin)

    free_f = fixed_freq is None
    if not free_f and not decay:
        x = x0
        jac = np.zeros((sum(len(tt) for tt in t), 2 * n_tr))
        row = 0
        for i, (tt, ss) in enumerate(zip(t, sig)):
            jac[row:row + len(tt), 2 * i] = 1.0 / ss
            jac[row:row + len(tt), 2 * i + 1] = basis(tt, f0, None) / ss
            row += len(tt)
        resid = np.concatenate([(yy - (x[2 * i] + x[2 * i + 1] * basis(tt, f0, None))) / ss
                                for i, (tt, yy, ss) in enumerate(zip(t, y, sig))])
        f_hat, tau_hat, nfev = f0, None, 1
    else:
        extra = ([f0] if free_f else []) + ([math.log(10.0 / f0)] if decay else [])
        p_start = np.concatenate([x0, extra])

        def unpack(p):
            f = p[2 * n_tr] if free_f else f0
            tau = math.exp(p[-1]) if decay else None
            return f, tau

        def residuals(p):
            f, tau = unpack(p)
            return np.concatenate([(yy - (p[2 * i] + p[2 * i + 1] * basis(tt, f, tau))) / ss
                                   for i, (tt, yy, ss) in enumerate(zip(t, y, sig))])

        def jacobian(p):
            f, tau = unpack(p)
            cols = 2 * n_tr + len(extra)
            rows = []
            for i, (tt, ss) in enumerate(zip(t, sig)):
                jb = np.zeros((len(tt), cols))
                env = 1.0 if tau is None else np.exp(-tt / tau)
                arg = 2 * np.pi * f * tt + phase_offset
                amp = p[2 * i + 1]
                jb[:, 2 * i] = -1.0
                jb[:, 2 * i + 1] = -np.cos(arg) * env
                c = 2 * n_tr
                if free_f:
                    jb[:, c] = amp * np.sin(arg) * 2 * np.pi * tt * env
                    c += 1
                if decay:
                    # d/d(log tau) of exp(-t/tau) = (t/tau) exp(-t/tau)
                    jb[:, c] = -amp * np.cos(arg) * env * tt / tau
                rows.append(jb / ss[:, None])
            return np.vstack(rows)

        res = least_squares(residuals, p_start, jac=jacobian, method="lm",
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        if res.status <= 0:
            raise FitError(f"cosine fit did not converge: {res.message}")
        x, resid, jac, nfev = res.x, res.fun, res.jac, res.nfev
        f_hat, tau_hat = unpack(x)
        if not f_hat > 0:
            raise FitError("fitted frequency is not positive")

    dof = max(1, len(resid) - jac.shape[1])
    try:
        cov = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jac.T @ jac)
    if not absolute:
        cov = cov * float(resid @ resid) / dof
    se = np.sqrt(np.clip(np.diag(cov), 0, None))

    fits = []
    row = 0
    for i, (tt, yy) in enumerate(zip(t, y)):
        r = resid[row:row + len(tt)] * sig[i]
        row += len(tt)
        fits.append(CosineFit(
            amplitude=float(x[2 * i + 1]), offset=float(x[2 * i]), frequency=float(f_hat),
            tau=tau_hat, residual_norm=float(np.linalg.norm(r)), amplitude_se=float(se[2 * i + 1]),
            offset_se=float(se[2 * i]), frequency_se=float(se[2 * n_tr]) if free_f else 0.0,
            phase_offset=phase_offset, nfev=int(nfev)))
    return fits


def fit_cosine(trace: RabiTrace, fixed_freq: float | None = None, phase_offset: float = 0.0,
               decay: bool = False, weighting: str = "sd", freq_guess: float | None = None) -> CosineFit:
    """Weighted least-squares fit of y0 + A cos(2 pi f t + phase_offset) [exp(-t/tau)].

    ``weighting`` is ``"sd"`` (1/se^2 per point), ``"pooled"`` (one common
    standard error, the RMS over points) or ``"uniform"``. Points with zero
    SD (noise-free traces) fall back to uniform weights.
    """
    return _fit_traces([trace], fixed_freq, phase_offset, decay, weighting, freq_guess)[0]


def fit_cosine_pair(trace_x: RabiTrace, trace_y: RabiTrace, fixed_freq: float | None = None,
                    phase_offset: float = 0.0, decay: bool = False, weighting: str = "sd",
                    freq_guess: float | None = None) -> tuple[CosineFit, CosineFit]:
    """Fit two traces of the same drive with one shared Rabi frequency."""
    fx, fy = _fit_traces([trace_x, trace_y], fixed_freq, phase_offset, decay, weighting, freq_guess)
    return fx, fy


def extract_phase(ax: float, ay: float) -> float:
    """Phase from the signed Rabi amplitudes of the 0 and 90 degree drives, in (-pi, pi]."""
    if ax == 0 and ay == 0:
        raise ValueError("both amplitudes are zero; phase undefined")
    phi = math.atan2(ax, ay)
    return math.pi if phi == -math.pi else phi


def _phase_se(ax: float, ay: float, sx: float, sy: float) -> float:
    r2 = ax * ax + ay * ay
    return math.sqrt((ay * sx) ** 2 + (ax * sy) ** 2) / r2


def wrap_angle(x: float) -> float:
    return math.atan2(math.sin(x), math.cos(x))


@dataclass(frozen=True)
class PhaseEstimate:
    phi_hat: float
    sd: float
    nu: int
    kind: str
    raw_phase: float
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sd < 0:
            raise ValueError("sd must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class EstimatorSettings:
    """Trace layout and fit options shared by every phase estimate."""

    blocks: int = 10
    periods: int = 2
    points_per_period: int = 8
    accounting: str = "per_point"
    weighting: str = "sd"
    fit_frequency: bool = True

    def __post_init__(self):
        if self.accounting not in ACCOUNTING_MODES:
            raise ValueError(f"accounting must be one of {ACCOUNTING_MODES}")

    def shots_per_point(self, nu: int) -> int:
        if self.accounting == "per_point":
            return int(nu)
        return int(nu) // (2 * self.periods * self.points_per_period)


@lru_cache(maxsize=4096)
def expected_pair(probe_name: str, phi: float, params: SystemParams, noise: NoiseParams,
                  model: ReadoutModel, periods: int, points_per_period: int):
    """Durations and noise-free signals of the X and Y readouts of one probe."""
    probe = get_probe(probe_name)
    durations = rabi_durations(probe.rabi_freq(params), periods, points_per_period)
    out = []
    for theta in (X_DRIVE, Y_DRIVE):
        r = expected_trace(lambda t: probe.sequence(phi, theta, t, params, noise), durations,
                           model, params, noise)
        r.setflags(write=False)
        out.append(r)
    durations.setflags(write=False)
    return durations, out[0], out[1]


def measure_probe(probe_name: str, phi: float, nu: int, seed: int, params: SystemParams,
                  noise: NoiseParams, model: ReadoutModel, settings: EstimatorSettings,
                  shot_noise: bool = True) -> tuple[RabiTrace, RabiTrace]:
    durations, rx, ry = expected_pair(probe_name, float(phi), params, noise, model,
                                      settings.periods, settings.points_per_period)
    shots = settings.shots_per_point(nu)
    code = _PROBE_STREAM[probe_name]
    tx = sample_trace(rx, durations, model, shots, settings.blocks, seed, (code, 0), shot_noise)
    ty = sample_trace(ry, durations, model, shots, settings.blocks, seed, (code, 1), shot_noise)
    return tx, ty


def probe_phase(probe_name: str, tx: RabiTrace, ty: RabiTrace, params: SystemParams,
                settings: EstimatorSettings) -> tuple[float, float, CosineFit, CosineFit]:
    """Raw extracted phase and its propagated standard error from one trace pair."""
    probe = get_probe(probe_name)
    f_nom = probe.rabi_freq(params)
    fx, fy = fit_cosine_pair(tx, ty, fixed_freq=None if settings.fit_frequency else f_nom,
                             phase_offset=RABI_PHASE_OFFSET, weighting=settings.weighting,
                             freq_guess=f_nom)
    ax, ay = probe.signal_sign * fx.amplitude, probe.signal_sign * fy.amplitude
    raw = extract_phase(ax, ay)
    return raw, _phase_se(ax, ay, fx.amplitude_se, fy.amplitude_se), fx, fy


def _drift_offset(seed: int, drift: float) -> float:
    if drift == 0:
        return 0.0
    return drift * (make_rng(seed, 99).random() - 0.5)


def estimate_phase(kind: str, phi_true: float, nu: int, seed: int,
                   params: SystemParams | None = None, noise: NoiseParams | None = None,
                   model: ReadoutModel | None = None, settings: EstimatorSettings | None = None,
                   shot_noise: bool = True, drift: float = 0.0) -> PhaseEstimate:
    """Prepare, read out (0 and 90 degree drives), fit and extract the phase.

    ``single`` averages an electron-probe and a nuclear-probe estimate, each
    with ``nu`` repetitions; ``entangled`` halves the phase extracted from the
    doubled-phase probe with ``nu`` repetitions. ``drift`` (radians) adds a
    per-acquisition systematic offset drawn uniformly from [-drift/2, drift/2].
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if nu < 1000:
        raise ValueError("nu must be >= 1e3")
    params = params or SystemParams()
    noise = noise if noise is not None else NoiseParams.ideal()
    model = model or ReadoutModel()
    settings = settings or EstimatorSettings()
    phi = float(phi_true) + _drift_offset(seed, drift)

    if kind == "entangled":
        raw, se = _probe_raw("entangled", phi, nu, seed, params, noise, model, settings, shot_noise)
        return PhaseEstimate(raw / 2, se / 2, int(nu), kind, raw)

    pe, se_e = _probe_raw("electron", phi, nu, seed, params, noise, model, settings, shot_noise)
    pn, se_n = _probe_raw("nuclear", phi, nu, seed, params, noise, model, settings, shot_noise)
    # equal weights for the two spins
    phi_hat = wrap_angle(pe + 0.5 * wrap_angle(pn - pe))
    sd = 0.5 * math.sqrt(se_e ** 2 + se_n ** 2)
    return PhaseEstimate(phi_hat, sd, int(nu), kind, phi_hat,
                         {"electron": pe, "nuclear": pn, "electron_se": se_e, "nuclear_se": se_n})


def _probe_raw(name, phi, nu, seed, params, noise, model, settings, shot_noise):
    tx, ty = measure_probe(name, phi, nu, seed, params, noise, model, settings, shot_noise)
    raw, se, _, _ = probe_phase(name, tx, ty, params, settings)
    return raw, se


def estimate_probe(probe_name: str, phi_true: float, nu: int, seed: int,
                   params: SystemParams | None = None, noise: NoiseParams | None = None,
                   model: ReadoutModel | None = None, settings: EstimatorSettings | None = None,
                   shot_noise: bool = True) -> PhaseEstimate:
    """Phase from one probe alone (``phase_multiplier`` already divided out)."""
    if nu < 1000:
        raise ValueError("nu must be >= 1e3")
    params = params or SystemParams()
    noise = noise if noise is not None else NoiseParams.ideal()
    model = model or ReadoutModel()
    settings = settings or EstimatorSettings()
    mult = get_probe(probe_name).phase_multiplier
    raw, se = _probe_raw(probe_name, float(phi_true), nu, seed, params, noise,
                         model, settings, shot_noise)
    return PhaseEstimate(raw / mult, se / mult, int(nu), probe_name, raw)


def readout_crb(kind: str, phi: float, nu: int, params: SystemParams | None = None,
                noise: NoiseParams | None = None, model: ReadoutModel | None = None,
                settings: EstimatorSettings | None = None) -> float:
    """Cramer-Rao bound on phi for the photon-counting readout of one estimate.

    ``kind`` is a probe name or one of :data:`KINDS`; ``single`` adds the
    information of its electron and nuclear acquisitions.
    """
    params = params or SystemParams()
    noise = noise if noise is not None else NoiseParams.ideal()
    model = model or ReadoutModel()
    settings = settings or EstimatorSettings()
    names = {"single": ("electron", "nuclear"), "entangled": ("entangled",)}.get(kind, (kind,))
    shots = settings.shots_per_point(nu) // settings.blocks * settings.blocks
    total = 0.0
    for name in names:
        def ratios(p, name=name):
            _, rx, ry = expected_pair(name, float(p), params, noise, model,
                                      settings.periods, settings.points_per_period)
            return np.concatenate([rx, ry])

        n_pts = 2 * settings.periods * settings.points_per_period
        photons = np.full(n_pts, shots * model.photons_per_shot)
        total += readout_fisher_information(ratios, photons, float(phi))
    return crb(total, 1)


def phase_monte_carlo(kind: str, phi_true: float, nu: int, seeds: Sequence[int], **kw) -> np.ndarray:
    return np.array([estimate_phase(kind, phi_true, nu, s, **kw).phi_hat for s in seeds])


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict
    uncertainties: dict
    adjusted_r2: float
    r2: float
    n: int

    def __post_init__(self):
        if self.adjusted_r2 > 1 + 1e-12:
            raise ValueError("adjusted R^2 cannot exceed 1")

    def to_dict(self) -> dict:
        return {"model": self.model, "n": self.n, "params": dict(self.params),
                "uncertainties": dict(self.uncertainties), "r2": self.r2,
                "adjusted_r2": self.adjusted_r2}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _r2(y: np.ndarray, yhat: np.ndarray, p: int) -> tuple[float, float]:
    """R^2 and adjusted R^2 with ``p`` predictors besides the intercept."""
    n = len(y)
    if n - p - 1 <= 0:
        raise ValueError(f"adjusted R^2 undefined for n={n} points and p={p} predictors")
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        r2 = 1.0 if ss_res == 0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return r2, 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1)


def _split_points(points) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("points must be a sequence of (nu, value) pairs")
    return arr[:, 0], arr[:, 1]


def _fit_inverse_power(points, power: float, name: str) -> FitResult:
    nu, y = _split_points(points)
    if len(np.unique(nu)) < 4:
        raise ValueError("at least 4 distinct nu values are required")
    if np.any(nu <= 0):
        raise ValueError("nu must be positive")
    a_mat = np.column_stack([nu ** -power, np.ones_like(nu)])
    # scale columns so the bounded solver sees a well-conditioned problem
    scale = np.abs(a_mat).max(axis=0)
    sol = lsq_linear(a_mat / scale, y, bounds=([-np.inf, 0.0], [np.inf, np.inf]),
                     method="bvls", tol=1e-15)
    a, c = sol.x / scale
    yhat = a_mat @ np.array([a, c])
    dof = len(y) - 2
    s2 = float(np.sum((y - yhat) ** 2)) / dof
    cov = np.linalg.inv(a_mat.T @ a_mat) * s2
    r2, adj = _r2(y, yhat, 1)
    return FitResult(name, {"a": float(a), "c": float(c)},
                     {"a": float(math.sqrt(cov[0, 0])), "c": float(math.sqrt(cov[1, 1]))},
                     adj, r2, len(y))


def fit_sd_scaling(points) -> FitResult:
    """Fit sd = a / sqrt(nu) + c with c >= 0."""
    return _fit_inverse_power(points, 0.5, "sd_inverse_sqrt")


def fit_variance_scaling(points) -> FitResult:
    """Fit var = a / nu + c with c >= 0."""
    return _fit_inverse_power(points, 1.0, "variance_inverse")


def fit_loglog(points, subtract_c: float | None = None, fixed_slope: float | None = None) -> FitResult:
    """Straight line through (log10 nu, log10 value), optionally with a fixed slope.

    ``subtract_c`` removes a constant system error from the values first.
    """
    nu, y = _split_points(points)
    if subtract_c is not None:
        y = y - subtract_c
    if np.any(y <= 0) or np.any(nu <= 0):
        raise ValueError("all values must be positive (after subtraction) for a log-log fit")
    lx, ly = np.log10(nu), np.log10(y)
    if fixed_slope is None:
        slope, intercept = np.polyfit(lx, ly, 1)
        p = 1
    else:
        slope = float(fixed_slope)
        intercept = float(np.mean(ly - slope * lx))
        p = 0
    yhat = intercept + slope * lx
    r2, adj = _r2(ly, yhat, p)
    dof = max(1, len(ly) - p - 1)
    s2 = float(np.sum((ly - yhat) ** 2)) / dof
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    unc = {"intercept": math.sqrt(s2 / len(ly) + (0.0 if p == 0 else s2 * lx.mean() ** 2 / sxx))}
    unc["slope"] = 0.0 if p == 0 else math.sqrt(s2 / sxx)
    return FitResult("loglog" if p else "loglog_fixed_slope",
                     {"slope": float(slope), "intercept": float(intercept),
                      "subtracted": 0.0 if subtract_c is None else float(subtract_c)},
                     unc, adj, r2, len(ly))
