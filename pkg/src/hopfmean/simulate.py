"""Numerical ground truth: integrate the flow, settle on the cycle, measure its mean.

The integrator is the Dormand-Prince 5(4) pair with FSAL, a PI step-size
controller and the pair's fourth-order continuous extension for dense output.
Cycle means are time integrals carried as extra state components, so the
quadrature inherits the integrator's error control.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import CycleNotFoundError, ConvergenceError, NonFiniteError, StepSizeError
from .field import VectorFieldModel, jacobian

log = logging.getLogger(__name__)

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [np.array(row) for row in [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
# continuous extension: y(t0 + th*h) = y0 + h * K^T (P @ [th, th^2, th^3, th^4])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR, MAX_FACTOR = 0.2, 10.0
PI_ALPHA, PI_BETA = 0.7 / 5, 0.4 / 5
ESCAPE_FACTOR = 1e6
PERIODS_AVERAGED = 8


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-9
    atol: float = 1e-11
    max_step: float = math.inf
    max_time: float = 1e5
    dense: bool = True
    max_steps: int = 5_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


@dataclass
class Step:
    """One accepted step with what the dense output needs."""

    t0: float
    h: float
    y0: np.ndarray
    y1: np.ndarray
    K: np.ndarray  # (7, m) stage derivatives

    @property
    def t1(self) -> float:
        return self.t0 + self.h

    def __call__(self, t):
        th = (t - self.t0) / self.h
        powers = np.array([th, th * th, th ** 3, th ** 4])
        return self.y0 + self.h * (self.K.T @ (_P @ powers))


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    steps: list = field(default_factory=list, repr=False)
    n_rejected: int = 0
    n_evals: int = 0

    def __call__(self, t) -> np.ndarray:
        """Dense-output state at time(s) ``t`` (requires ``dense=True``)."""
        if not self.steps:
            raise ValueError("trajectory was integrated without dense output")
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, float))
        starts = np.array([s.t0 for s in self.steps])
        idx = np.clip(np.searchsorted(starts, ts, side="right") - 1, 0, len(self.steps) - 1)
        out = np.array([self.steps[i](tt) for i, tt in zip(idx, ts)])
        return out[0] if scalar else out


def _norm(err, y0, y1, rtol, atol):
    sc = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / sc) ** 2)))


def _initial_step(fun, t0, y0, f0, rtol, atol, direction):
    sc = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / sc) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = fun(t0 + direction * h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / sc) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def dopri5(fun: Callable, t0: float, y0, t1: float, *, rtol: float = 1e-9, atol: float = 1e-11,
           max_step: float = math.inf, max_steps: int = 5_000_000, dense: bool = True,
           on_step: Optional[Callable] = None) -> Trajectory:
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t1``.

    ``on_step(step)`` is called after every accepted step; returning ``True``
    stops the integration early at that step's end.
    """
    y = np.array(y0, float)
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("initial state is not finite")
    direction = 1.0 if t1 >= t0 else -1.0
    t = float(t0)
    f = np.asarray(fun(t, y), float)
    ts, ys, steps = [t], [y.copy()], []
    n_evals, n_rej = 1, 0
    if t1 == t0:
        return Trajectory(np.array(ts), np.array(ys), steps, 0, n_evals)
    h = min(_initial_step(fun, t, y, f, rtol, atol, direction), max_step, abs(t1 - t0))
    n_evals += 1
    err_prev = 1e-4
    K = np.empty((7, len(y)))
    for _ in range(max_steps):
        if direction * (t1 - t) <= 0:
            break
        h_min = 10 * np.spacing(abs(t)) + 1e-300
        rejected = False
        while True:
            if h < h_min:
                raise StepSizeError(f"step size underflow at t={t:.17g}")
            hs = direction * min(h, abs(t1 - t))
            K[0] = f
            for i in range(1, 7):
                yi = y + hs * (_A[i] @ K[:i])
                K[i] = fun(t + _C[i] * hs, yi)
            n_evals += 6
            y_new = y + hs * (_B5 @ K)  # equals the last stage input (FSAL)
            err = _norm(hs * (_E @ K), y, y_new, rtol, atol)
            if not np.isfinite(err):
                h *= 0.25
                rejected = True
                n_rej += 1
                continue
            if err <= 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = SAFETY * err ** -PI_ALPHA * err_prev ** PI_BETA
                    factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
                if rejected:
                    factor = min(1.0, factor)
                err_prev = max(err, 1e-4)
                break
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
            rejected = True
            n_rej += 1
        if not np.all(np.isfinite(y_new)):
            raise NonFiniteError(f"state became non-finite at t={t + hs:.17g}")
        step = Step(t, hs, y, y_new, K.copy()) if dense or on_step else None
        t = t + hs if abs(t1 - (t + hs)) > 1e-14 * max(1.0, abs(t1)) else t1
        y, f = y_new, K[6].copy()
        ts.append(t)
        ys.append(y.copy())
        if dense:
            steps.append(step)
        h = min(abs(hs) * factor, max_step)
        if on_step is not None and on_step(step):
            break
    else:
        raise ConvergenceError(f"more than {max_steps} steps needed")
    return Trajectory(np.array(ts), np.array(ys), steps, n_rej, n_evals)


def _rhs_fun(model, alpha, augment=False):
    params = model.param_values(alpha)
    n = model.dimension
    rhs = model.rhs

    if not augment:
        return lambda t, y: np.asarray(rhs(y, params), float)

    def fun(t, y):
        fx = np.asarray(rhs(y[:n], params), float)
        return np.concatenate([fx, y[:n]])

    return fun


def integrate(model: VectorFieldModel, alpha: float, x_init, t_span, config: Optional[IntegratorConfig] = None) -> Trajectory:
    """Trajectory of ``x' = f(x; alpha)`` from ``x_init`` over ``t_span``."""
    cfg = config or IntegratorConfig()
    x = np.asarray(x_init, float)
    if x.shape != (model.dimension,) or not np.all(np.isfinite(x)):
        raise ValueError("x_init must be a finite vector of the model dimension")
    t0, t1 = map(float, t_span)
    return dopri5(_rhs_fun(model, alpha), t0, x, t1, rtol=cfg.rtol, atol=cfg.atol,
                  max_step=cfg.max_step, max_steps=cfg.max_steps, dense=cfg.dense)


def dump_trajectory(path, traj: Trajectory, n: Optional[int] = None) -> None:
    """Write ``t, x1..xn`` rows as CSV (17 significant digits)."""
    n = traj.y.shape[1] if n is None else n
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)])
        for t, y in zip(traj.t, traj.y):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in y[:n]])


# -- cycle observation ---------------------------------------------------------


@dataclass
class CycleObservation:
    period: float
    mean: np.ndarray
    amplitude: np.ndarray
    periods_averaged: int
    settle_time: float
    converged: bool
    section_coordinate: int
    method: str = ""
    period_estimates: list = field(default_factory=list)
    period_means: list = field(default_factory=list)
    orbit_point: Optional[np.ndarray] = None
    message: str = ""


class _SectionWatcher:
    """Collects upward crossings of ``x_k = c`` from accepted steps."""

    def __init__(self, k, level, n, escape):
        self.k, self.level, self.n, self.escape = k, level, n, escape
        self.crossings = []  # (time, state incl. augmented part)
        self.escaped = False
        self.size = 0.0

    def __call__(self, step):
        self.size = float(np.max(np.abs(step.y1[: self.n])))
        if self.size > self.escape:
            self.escaped = True
            return True
        s0 = step.y0[self.k] - self.level
        s1 = step.y1[self.k] - self.level
        if s0 < 0.0 <= s1:
            g = lambda t: step(t)[self.k] - self.level
            tc = step.t1 if s1 == 0.0 else brentq(g, step.t0, step.t1, xtol=1e-15, rtol=1e-15)
            # a start placed on the section can be re-detected a rounding error later
            if not self.crossings or tc - self.crossings[-1][0] > 1e-9 * max(1.0, abs(tc)):
                self.crossings.append((tc, step(tc)))
        return self.stop()

    def run(self, fun, t0, y0, t1, **kw):
        """``dopri5`` with this watcher; blow-up surfaces as an escape."""
        try:
            return dopri5(fun, t0, y0, t1, on_step=self, **kw)
        except (StepSizeError, NonFiniteError) as exc:
            raise CycleNotFoundError(
                f"trajectory escaped (finite-time blow-up suspected at |x|={self.size:.3g}): {exc}") from exc

    def stop(self):
        return False


def _crossing_stats(crossings, n):
    times = np.array([c[0] for c in crossings])
    periods = np.diff(times)
    integrals = np.array([c[1][n:] for c in crossings])
    means = np.diff(integrals, axis=0) / periods[:, None]
    return times, periods, means


def _settled(periods, means, scale):
    if len(periods) < 3:
        return False
    p3 = periods[-3:]
    m3 = means[-3:]
    ok_p = np.max(np.abs(np.diff(p3))) <= 1e-6 * np.max(p3)
    mean_ref = np.maximum(np.abs(m3[-1]), scale)
    ok_m = np.all(np.abs(np.diff(m3, axis=0)) <= 1e-7 * mean_ref)
    return bool(ok_p and ok_m)


def _flow_with_monodromy(model, alpha, x, T, cfg):
    n = model.dimension
    params = model.param_values(alpha)

    def fun(t, y):
        xs = y[:n]
        Phi = y[n:].reshape(n, n)
        J = jacobian(model, xs, alpha)
        return np.concatenate([np.asarray(model.rhs(xs, params), float), (J @ Phi).ravel()])

    y0 = np.concatenate([x, np.eye(n).ravel()])
    traj = dopri5(fun, 0.0, y0, T, rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step, dense=False)
    yT = traj.y[-1]
    return yT[:n], yT[n:].reshape(n, n)


def _shoot(model, alpha, x, T, k, level, cfg, scale, max_iter=25):
    """Bordered Newton on ``phi_T(x) = x`` with the phase condition ``x_k = level``."""
    n = model.dimension
    params = model.param_values(alpha)
    x = np.array(x, float)
    x[k] = level
    for _ in range(max_iter):
        xT, M = _flow_with_monodromy(model, alpha, x, T, cfg)
        G = xT - x
        res = float(np.max(np.abs(G / scale)))
        if res <= 1e-10:
            return x, T, res
        fT = np.asarray(model.rhs(xT, params), float)
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = M - np.eye(n)
        J[:n, n] = fT
        J[n, k] = 1.0
        try:
            d = np.linalg.solve(J, -np.concatenate([G, [0.0]]))
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular shooting system") from None
        x = x + d[:n]
        T = T + d[n]
        if not (T > 0 and np.all(np.isfinite(x))):
            raise ConvergenceError("shooting left the admissible region")
    raise ConvergenceError(f"shooting did not converge (residual {res:.3g})")


def _launch(model, eq):
    re_q = np.real(eq.hopf.q)
    if not np.any(re_q):
        re_q = np.imag(eq.hopf.q)
    return eq.x0 + 1e-3 * model.scale * re_q / np.max(np.abs(re_q))


def _coarse_settle(model, alpha, x, k, level, cfg, scale, t_limit):
    """Loose-tolerance transient run until successive section points stop moving."""
    n = model.dimension
    x0 = np.array(x, float)
    watcher = _SectionWatcher(k, level, n, ESCAPE_FACTOR * float(np.max(scale)))

    def stop():
        cr = watcher.crossings
        if len(cr) < 4:
            return False
        a, b = cr[-2][1], cr[-1][1]
        amp = float(np.max(np.abs((b - x0) / scale)))
        return float(np.max(np.abs((b - a) / scale))) <= 1e-4 * amp

    watcher.stop = stop
    traj = watcher.run(_rhs_fun(model, alpha), 0.0, x0, t_limit, rtol=max(cfg.rtol, 1e-7),
                       atol=max(cfg.atol, 1e-9), max_step=cfg.max_step, max_steps=cfg.max_steps,
                       dense=False)
    if watcher.escaped:
        raise CycleNotFoundError(f"trajectory escaped beyond {ESCAPE_FACTOR:g} x scale")
    if not stop():
        if len(watcher.crossings) < 2:
            raise CycleNotFoundError("no oscillation detected (trajectory settles or drifts)")
        raise CycleNotFoundError(f"no settled cycle within t={t_limit:g}")
    return watcher.crossings, float(traj.t[-1])


def _measure(model, alpha, x_start, t_start, k, level, cfg, scale, periods):
    """Integrate from a section point over ``periods`` returns and gather statistics."""
    n = model.dimension
    fun = _rhs_fun(model, alpha, augment=True)
    watcher = _SectionWatcher(k, level, n, ESCAPE_FACTOR * float(np.max(scale)))
    y0 = np.concatenate([x_start, np.zeros(n)])
    watcher.crossings.append((t_start, y0))
    need = periods + 1

    watcher.stop = lambda: len(watcher.crossings) >= need
    t_end = t_start + cfg.max_time
    traj = watcher.run(fun, t_start, y0, t_end, rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step,
                       dense=True)
    if watcher.escaped:
        raise CycleNotFoundError("trajectory escaped during measurement")
    if len(watcher.crossings) < need:
        raise CycleNotFoundError("section not crossed often enough during measurement")
    return watcher.crossings, traj


def _amplitude(traj, t_a, t_b, n, samples=4096):
    ts = np.linspace(t_a, t_b, samples)
    inside = traj.t[(traj.t > t_a) & (traj.t < t_b)]
    pts = traj(np.concatenate([ts, inside]))[:, :n]
    return 0.5 * (pts.max(axis=0) - pts.min(axis=0))


def observe_cycle(model: VectorFieldModel, alpha: float, eq, config: Optional[IntegratorConfig] = None,
                  section: Optional[int] = None, x_init=None, periods: int = PERIODS_AVERAGED,
                  shooting: bool = True) -> CycleObservation:
    """Settle onto the limit cycle around ``eq`` and measure period, mean and amplitude.

    The run starts at ``x0 + 1e-3 * scale * Re(q)`` (or ``x_init``) and uses
    the section ``x_k = x0_k`` crossed upward, ``k`` being the largest
    component of ``|Re q|`` unless ``section`` is given. A loose-tolerance
    transient brings the state near the cycle; bordered Newton shooting with
    the monodromy matrix then pins the periodic orbit, and the statistics come
    from ``periods`` further returns at full tolerance. With ``shooting=False``
    the transient is continued at full tolerance until the period and
    per-period means settle.
    """
    cfg = config or IntegratorConfig()
    n = model.dimension
    x0 = np.array(eq.x0, float)
    scale = model.scale
    hp = eq.hopf
    k = int(np.argmax(np.abs(np.real(hp.q)))) if (section is None and hp is not None) else int(section or 0)
    if hp is None or hp.mu <= 0 or eq.stability != "hopf_unstable":
        return CycleObservation(math.nan, x0.copy(), np.zeros(n), 0, 0.0, False, k, method="none",
                                message="equilibrium is not Hopf-unstable")
    level = x0[k]
    start = _launch(model, eq) if x_init is None else np.asarray(x_init, float)
    crossings, t_settle = _coarse_settle(model, alpha, start, k, level, cfg, scale, cfg.max_time)
    t_c, y_c = crossings[-1]
    T_guess = crossings[-1][0] - crossings[-2][0]
    x_c = y_c[:n]
    method = "transient"
    if shooting:
        try:
            x_c, T_guess, _ = _shoot(model, alpha, x_c, T_guess, k, level, cfg, scale)
            method = "shooting"
        except ConvergenceError as exc:
            log.info("shooting failed (%s); continuing the transient", exc)

    t_used = t_settle
    for _ in range(1000):
        cr, traj = _measure(model, alpha, x_c, t_c, k, level, cfg, scale, periods)
        times, pers, means = _crossing_stats(cr, n)
        t_used = times[-1]
        if _settled(pers, means, scale):
            mean = (cr[-1][1][n:] - cr[0][1][n:]) / (times[-1] - times[0])
            amp = _amplitude(traj, times[-2], times[-1], n)
            return CycleObservation(
                period=float(np.mean(pers)), mean=mean, amplitude=amp, periods_averaged=periods,
                settle_time=float(t_settle), converged=True, section_coordinate=k, method=method,
                period_estimates=list(pers), period_means=[m for m in means],
                orbit_point=x_c.copy(),
            )
        if t_used - t_settle > cfg.max_time:
            break
        x_c, t_c = cr[-1][1][:n], cr[-1][0]
        method = "transient"
    raise ConvergenceError("period and mean estimates did not settle")


@dataclass
class DeviationRecord:
    alpha: float
    mu: float
    d_num: np.ndarray
    d_pred: np.ndarray
    error: float
    relative_error: float
    angle: float
    amplitude_ratio: np.ndarray
    observation: CycleObservation
    prediction: object


def _angle(a, b):
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return math.nan
    return float(np.arccos(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0)))


def measure_deviation(model: VectorFieldModel, alpha: float, eq, prediction, config: Optional[IntegratorConfig] = None,
                      **observe_kw) -> DeviationRecord:
    """Compare the measured mean shift with ``K mu``.

    ``prediction`` is a :class:`~hopfmean.normalform.MeanPrediction` for the
    same equilibrium. Below threshold ``d_num`` is exactly zero.
    """
    obs = observe_cycle(model, alpha, eq, config, **observe_kw)
    x0 = np.asarray(eq.x0, float)
    d_pred = prediction.K * prediction.mu if prediction.cycle_predicted else np.zeros_like(x0)
    d_num = obs.mean - x0 if obs.converged else np.zeros_like(x0)
    err = float(np.linalg.norm(d_num - d_pred))
    nd = float(np.linalg.norm(d_num))
    rel = err / nd if nd > 0 else (0.0 if err == 0 else math.inf)
    if prediction.cycle_predicted and obs.converged:
        amp_pred = 2 * prediction.r_w * np.abs(eq.hopf.q)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(amp_pred > 0, obs.amplitude / amp_pred, np.nan)
    else:
        ratio = np.full_like(x0, np.nan)
    return DeviationRecord(float(alpha), prediction.mu, d_num, d_pred, err, rel, _angle(d_num, d_pred),
                           ratio, obs, prediction)
