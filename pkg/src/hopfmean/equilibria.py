"""Equilibria x0(alpha), their continuation, and Hopf point location."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError, ConvergenceError, NoComplexPairError, SingularJacobianError
from .field import VectorFieldModel, eval_rhs, jacobian
from .spectral import HopfPair, eigen_all, hopf_pair

log = logging.getLogger(__name__)

STABLE = "stable"
HOPF_UNSTABLE = "hopf_unstable"
OTHER_UNSTABLE = "other_unstable"

SUPERCRITICAL = "supercritical"
SUBCRITICAL = "subcritical"
DEGENERATE = "degenerate"

LYAPUNOV_TOL = 1e-10


@dataclass
class Equilibrium:
    alpha: float
    x0: np.ndarray
    residual: float
    hopf: Optional[HopfPair]
    stability: str
    jacobian: np.ndarray
    eigenvalues: list
    iterations: int = 0

    @property
    def mu(self) -> float:
        return self.hopf.mu if self.hopf is not None else float("nan")

    @property
    def omega(self) -> float:
        return self.hopf.omega if self.hopf is not None else float("nan")


@dataclass
class BifurcationPoint:
    alpha_star: float
    omega0: float
    mu_prime: float
    x0_star: np.ndarray
    lyapunov_re_c1: float
    criticality: str
    equilibrium: Equilibrium
    normal_form: object = None  # NormalFormData at alpha_star


def _classify(lams, hopf):
    if max(z.real for z in lams) < 0:
        return STABLE
    if hopf is not None and hopf.mu >= 0 and all(z.real < 0 for z in hopf.other_eigenvalues):
        return HOPF_UNSTABLE
    return OTHER_UNSTABLE


def _polish(model, alpha, x, res):
    # one extra full step once converged: drives x to rounding level so that
    # quantities derived from it (mu in particular) are smooth in alpha
    try:
        x_new = x + np.linalg.solve(jacobian(model, x, alpha), -eval_rhs(model, x, alpha))
        res_new = float(np.linalg.norm(eval_rhs(model, x_new, alpha), np.inf))
    except (np.linalg.LinAlgError, FloatingPointError, ValueError):
        return x, res
    return (x_new, res_new) if res_new <= res else (x, res)


def _newton(model, alpha, x, max_iter=100):
    fscale = 1e-12 * max(1.0, float(np.max(model.scale)))
    f = eval_rhs(model, x, alpha)
    res = float(np.linalg.norm(f, np.inf))
    for it in range(1, max_iter + 1):
        if res <= fscale:
            return (*_polish(model, alpha, x, res), it - 1)
        J = jacobian(model, x, alpha)
        try:
            if np.linalg.cond(J) > 1e14:
                raise np.linalg.LinAlgError("ill-conditioned")
            dx = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            raise SingularJacobianError(f"singular Jacobian at alpha={alpha}, x={x}") from None
        t = 1.0
        for _ in range(21):
            x_new = x + t * dx
            try:
                f_new = eval_rhs(model, x_new, alpha)
                res_new = float(np.linalg.norm(f_new, np.inf))
            except Exception:
                res_new = np.inf
            if res_new < res or res_new <= fscale:
                break
            t *= 0.5
        else:
            if np.linalg.norm(dx) <= 1e-14 * (1.0 + np.linalg.norm(x)):
                return x, res, it
            raise ConvergenceError(f"damped Newton stalled at alpha={alpha} (|f|={res:.3g})")
        step = t * float(np.linalg.norm(dx))
        x, f, res = x_new, f_new, res_new
        if step <= 1e-14 * (1.0 + float(np.linalg.norm(x))):
            return x, res, it
    if res <= fscale:
        return x, res, max_iter
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations at alpha={alpha} (|f|={res:.3g})")


def solve_equilibrium(model: VectorFieldModel, alpha: float, x_guess, previous: Optional[HopfPair] = None) -> Equilibrium:
    """Damped Newton solve of ``f(x; alpha) = 0`` with the Hopf pair attached.

    Each Newton step is halved up to 20 times until the residual drops.
    Converges when ``||f||_inf <= 1e-12`` (times the model scale) or the
    step falls below ``1e-14`` relative.
    """
    x = np.array(x_guess, float)
    if x.shape != (model.dimension,) or not np.all(np.isfinite(x)):
        raise ValueError("initial guess must be a finite vector of the model dimension")
    x, res, iters = _newton(model, float(alpha), x)
    J = jacobian(model, x, alpha)
    lams = [z for z, _ in eigen_all(J)]
    try:
        hp = hopf_pair(J, previous)
    except NoComplexPairError:
        hp = None
    return Equilibrium(float(alpha), x, res, hp, _classify(lams, hp), J, lams, iters)


def continue_equilibria(model: VectorFieldModel, alpha_grid, x_guess) -> list:
    """Natural-parameter continuation along an ascending (or descending) grid.

    Runs sequentially: each solve is seeded with the previous solution and
    its Hopf pair.
    """
    grid = [float(a) for a in alpha_grid]
    diffs = np.diff(grid)
    if len(grid) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("alpha grid must be strictly monotone")
    out = []
    x, prev = np.asarray(x_guess, float), None
    for a in grid:
        try:
            eq = solve_equilibrium(model, a, x, prev)
        except (ConvergenceError, SingularJacobianError) as exc:
            raise type(exc)(f"continuation failed at alpha={a}: {exc}") from exc
        out.append(eq)
        x, prev = eq.x0, eq.hopf or prev
    return out


def mu_of_alpha(model: VectorFieldModel, alpha: float, x_guess, previous: Optional[HopfPair] = None):
    """``(mu, omega)`` of the critical eigenvalue at the equilibrium near ``x_guess``."""
    eq = solve_equilibrium(model, alpha, x_guess, previous)
    if eq.hopf is None:
        raise NoComplexPairError(f"no complex eigenvalue pair at alpha={alpha}")
    return eq.hopf.mu, eq.hopf.omega


class _MuTracker:
    """mu(alpha) with every solve seeded from the nearest already-solved alpha."""

    def __init__(self, model, seeds):
        self.model = model
        self.solved = list(seeds)

    def nearest(self, alpha):
        return min(self.solved, key=lambda e: abs(e.alpha - alpha))

    def equilibrium(self, alpha):
        near = self.nearest(alpha)
        if near.alpha == alpha:
            return near
        eq = solve_equilibrium(self.model, alpha, near.x0, near.hopf)
        if eq.hopf is None:
            raise NoComplexPairError(f"no complex eigenvalue pair at alpha={alpha}")
        self.solved.append(eq)
        return eq

    def __call__(self, alpha):
        return self.equilibrium(alpha).hopf.mu


def _criticality(re_c1):
    if abs(re_c1) <= LYAPUNOV_TOL:
        return DEGENERATE
    return SUPERCRITICAL if re_c1 < 0 else SUBCRITICAL


def locate_bifurcation(model: VectorFieldModel, alpha_lo: float, alpha_hi: float, x_guess, steps: int = 8) -> BifurcationPoint:
    """Find ``alpha*`` with ``mu(alpha*) = 0`` inside ``[alpha_lo, alpha_hi]``.

    Both ends are solved first (the upper one by continuation from the
    lower one), the sign change of ``mu`` is checked, and Brent's method
    refines the root. ``mu'`` comes from a central difference with
    ``dalpha = 1e-5 * (1 + |alpha*|)`` and ``Re(c1)`` from the normal form.
    """
    from .normalform import normal_form  # normal form needs Equilibrium

    alpha_lo, alpha_hi = float(alpha_lo), float(alpha_hi)
    if not alpha_lo < alpha_hi:
        raise ValueError("alpha_lo must be below alpha_hi")
    path = continue_equilibria(model, np.linspace(alpha_lo, alpha_hi, max(steps, 2)), x_guess)
    if any(e.hopf is None for e in (path[0], path[-1])):
        raise BracketError("no complex eigenvalue pair at an interval end")
    tracker = _MuTracker(model, [e for e in path if e.hopf is not None])
    mu_lo, mu_hi = path[0].hopf.mu, path[-1].hopf.mu
    if mu_lo == 0.0:
        alpha_star = alpha_lo
    elif mu_hi == 0.0:
        alpha_star = alpha_hi
    elif mu_lo * mu_hi > 0:
        raise BracketError(
            f"mu does not change sign on [{alpha_lo}, {alpha_hi}] (mu={mu_lo:.3g}, {mu_hi:.3g})")
    else:
        # bracket from the continuation path, closest sign change to the lower end
        lo, hi = path[0], path[-1]
        for a, b in zip(path[:-1], path[1:]):
            if a.hopf and b.hopf and a.hopf.mu * b.hopf.mu <= 0:
                lo, hi = a, b
                break
        try:
            alpha_star = brentq(tracker, lo.alpha, hi.alpha, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        except RuntimeError as exc:
            raise ConvergenceError(f"root finder stagnated: {exc}") from exc
    eq = tracker.equilibrium(alpha_star)
    if abs(eq.hopf.mu) > 1e-10:
        raise ConvergenceError(f"|mu(alpha*)| = {abs(eq.hopf.mu):.3g} exceeds 1e-10")
    d = 1e-5 * (1.0 + abs(alpha_star))
    mu_prime = (tracker(alpha_star + d) - tracker(alpha_star - d)) / (2 * d)
    if abs(mu_prime) < 1e-12:
        log.warning("transversality fails at alpha*=%g (mu'=%g)", alpha_star, mu_prime)
    nf = normal_form(model, eq)
    re_c1 = nf.ell1
    return BifurcationPoint(
        alpha_star=float(alpha_star),
        omega0=eq.hopf.omega,
        mu_prime=float(mu_prime),
        x0_star=eq.x0.copy(),
        lyapunov_re_c1=float(re_c1),
        criticality=_criticality(re_c1),
        equilibrium=eq,
        normal_form=nf,
    )


def alpha_for_mu(model: VectorFieldModel, bp: BifurcationPoint, mu_target: float, max_iter: int = 50):
    """Parameter value where ``mu(alpha) = mu_target`` near ``bp``, by secant iteration.

    Returns ``(alpha, equilibrium)``.
    """
    if bp.mu_prime == 0:
        raise ValueError("mu'(alpha*) is zero; cannot step off the bifurcation")
    tracker = _MuTracker(model, [bp.equilibrium])
    a0, r0 = bp.alpha_star, bp.equilibrium.hopf.mu - mu_target
    a1 = a0 + mu_target / bp.mu_prime
    tol = 1e-13 * max(1.0, abs(mu_target))
    for _ in range(max_iter):
        r1 = tracker(a1) - mu_target
        if abs(r1) <= tol:
            return a1, tracker.equilibrium(a1)
        if r1 == r0:
            break
        a0, a1, r0 = a1, a1 - r1 * (a1 - a0) / (r1 - r0), r1
    raise ConvergenceError(f"secant search for mu={mu_target} did not converge")
