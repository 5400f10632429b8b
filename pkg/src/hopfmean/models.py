"""Built-in example systems.

Four registered models, each with its published default parameters:

``predator-prey``
    Time-rescaled Holling-type predator-prey system with polynomial
    right-hand side, bifurcation parameter ``alpha`` (c=2, delta=1.3, beta=2).
``brusselator``
    Brusselator reaction kinetics, bifurcation parameter ``alpha`` (A=1).
``wilson-cowan``
    Excitatory/inhibitory firing-rate model; the bifurcation parameter is
    the input current ``I``. Tensors come from finite differences.
``feedback-control``
    Third-order feedback loop with equilibrium at the origin (beta=1).

Closed-form oracles (equilibrium, critical parameter, eigenvalue parts,
normal-form coefficients) are attached where they are known so tests can
cross-check the generic machinery.
"""

from __future__ import annotations

import math
from functools import partial

import numpy as np

from .field import VectorFieldModel

# -- predator-prey ----------------------------------------------------------


def _pp_rhs(x, p):
    x1, x2 = x
    a, b, c, d = p["alpha"], p["beta"], p["c"], p["delta"]
    return np.array([
        b * x1 * (1.0 - x1) * (1.0 + a * x1) - c * a * x1 * x2,
        -d * x2 * (1.0 + a * x1) + c * a * x1 * x2,
    ])


def _pp_jac(x, p):
    x1, x2 = x
    a, b, c, d = p["alpha"], p["beta"], p["c"], p["delta"]
    return np.array([
        [b * (1.0 + 2.0 * (a - 1.0) * x1 - 3.0 * a * x1 * x1) - c * a * x2, -c * a * x1],
        [a * (c - d) * x2, -d * (1.0 + a * x1) + c * a * x1],
    ])


def _pp_B(x, p, u, v):
    a, b, c, d = p["alpha"], p["beta"], p["c"], p["delta"]
    cross = u[0] * v[1] + u[1] * v[0]
    return np.array([
        b * (2.0 * (a - 1.0) - 6.0 * a * x[0]) * u[0] * v[0] - c * a * cross,
        a * (c - d) * cross,
    ])


def _pp_C(x, p, u, v, w):
    return np.array([-6.0 * p["alpha"] * p["beta"] * u[0] * v[0] * w[0], 0.0 * u[0]])


def _pp_equilibrium(p, alpha):
    c, d, b = p["c"], p["delta"], p["beta"]
    x1 = d / (alpha * (c - d))
    return np.array([x1, b / (alpha * (c - d)) * (1.0 - x1)])


def _pp_alpha_star(p):
    return (p["c"] + p["delta"]) / (p["c"] - p["delta"])


def _pp_mu(p, alpha):
    # published form with its coefficient r read as beta
    c, d, r = p["c"], p["delta"], p["beta"]
    return r * d * (c + d) / (2.0 * alpha * (c - d)) * ((c - d) / (c + d) - 1.0 / alpha)


def _pp_omega(p, alpha=None):
    c, d, b = p["c"], p["delta"], p["beta"]
    return c * math.sqrt(b * d * (c - d)) / (c + d) ** 1.5


def _pp_g(p):
    c, d, b = p["c"], p["delta"], p["beta"]
    w = _pp_omega(p)
    return {
        "g20": (c * d * (c * c - d * d - b * d) + 1j * w * c * (c + d) ** 2) / (c + d),
        "g11": -b * c * d * d / (c + d),
        "g21": -3.0 * b * c * c * d * d,
    }


def predator_prey(c: float = 2.0, delta: float = 1.3, beta: float = 2.0, alpha: float = 4.0) -> VectorFieldModel:
    if c <= delta:
        raise ValueError("predator-prey needs c > delta for a positive equilibrium")
    return VectorFieldModel(
        name="predator-prey",
        dimension=2,
        params={"c": c, "delta": delta, "beta": beta, "alpha": alpha},
        bifurcation_parameter="alpha",
        rhs=_pp_rhs,
        jac=_pp_jac,
        bilinear=_pp_B,
        trilinear=_pp_C,
        oracles={
            "equilibrium": _pp_equilibrium,
            "alpha_star": _pp_alpha_star,
            "mu": _pp_mu,
            "omega": _pp_omega,
            "g_at_star": _pp_g,
        },
    )


# -- Brusselator ------------------------------------------------------------


def _br_rhs(x, p):
    x1, x2 = x
    A, a = p["A"], p["alpha"]
    return np.array([A - (a + 1.0) * x1 + x1 * x1 * x2, a * x1 - x1 * x1 * x2])


def _br_jac(x, p):
    x1, x2 = x
    a = p["alpha"]
    return np.array([
        [-(a + 1.0) + 2.0 * x1 * x2, x1 * x1],
        [a - 2.0 * x1 * x2, -x1 * x1],
    ])


def _br_B(x, p, u, v):
    b1 = 2.0 * x[1] * u[0] * v[0] + 2.0 * x[0] * (u[0] * v[1] + u[1] * v[0])
    return np.array([b1, -b1])


def _br_C(x, p, u, v, w):
    c1 = 2.0 * (u[0] * v[0] * w[1] + u[0] * v[1] * w[0] + u[1] * v[0] * w[0])
    return np.array([c1, -c1])


def _br_equilibrium(p, alpha):
    # x2 from the stationary condition alpha*x1 = x1^2*x2 with x1 = A
    return np.array([p["A"], alpha / p["A"]])


def _br_alpha_star(p):
    return 1.0 + p["A"] ** 2


def _br_mu(p, alpha):
    return 0.5 * (alpha - 1.0 - p["A"] ** 2)


def _br_omega(p, alpha):
    mu = _br_mu(p, alpha)
    return math.sqrt(p["A"] ** 2 - mu * mu)


def _br_g(p):
    A = p["A"]
    return {
        "g20": A - 1j,
        "g11": (A - 1j) * (A * A - 1.0) / (A * A + 1.0),
        "g21": A * (3.0 * A - 1j) / (A * A + 1.0),
    }


def brusselator(A: float = 1.0, alpha: float = 2.0) -> VectorFieldModel:
    if A <= 0:
        raise ValueError("Brusselator needs A > 0")
    return VectorFieldModel(
        name="brusselator",
        dimension=2,
        params={"A": A, "alpha": alpha},
        bifurcation_parameter="alpha",
        rhs=_br_rhs,
        jac=_br_jac,
        bilinear=_br_B,
        trilinear=_br_C,
        oracles={
            "equilibrium": _br_equilibrium,
            "alpha_star": _br_alpha_star,
            "mu": _br_mu,
            "omega": _br_omega,
            "g_at_star": _br_g,
        },
    )


# -- Wilson-Cowan -----------------------------------------------------------


def sigmoid(x, beta):
    return 1.0 / (1.0 + math.exp(-x / beta)) if x > -700 * beta else 0.0


def _wc_inputs(x, p):
    u1, u2 = x
    return (p["w_ee"] * u1 - p["w_ei"] * u2 + p["I"],
            p["w_ie"] * u1 - p["w_ii"] * u2 + p["I"])


def _wc_rhs(x, p):
    s1, s2 = _wc_inputs(x, p)
    b = p["beta"]
    return np.array([
        (-x[0] + sigmoid(s1, b)) / p["tau1"],
        (-x[1] + sigmoid(s2, b)) / p["tau2"],
    ])


def _wc_jac(x, p):
    s1, s2 = _wc_inputs(x, p)
    b = p["beta"]
    d1 = sigmoid(s1, b) * (1.0 - sigmoid(s1, b)) / b
    d2 = sigmoid(s2, b) * (1.0 - sigmoid(s2, b)) / b
    return np.array([
        [(-1.0 + d1 * p["w_ee"]) / p["tau1"], -d1 * p["w_ei"] / p["tau1"]],
        [d2 * p["w_ie"] / p["tau2"], (-1.0 - d2 * p["w_ii"]) / p["tau2"]],
    ])


def wilson_cowan(tau1: float = 4.0, tau2: float = 12.0, beta: float = 0.1, w_ee: float = 3.6,
                 w_ei: float = 8.0, w_ie: float = 4.0, w_ii: float = 8.8, I: float = 0.0) -> VectorFieldModel:
    if beta == 0:
        raise ValueError("Wilson-Cowan sigmoid steepness beta must be non-zero")
    return VectorFieldModel(
        name="wilson-cowan",
        dimension=2,
        params={"tau1": tau1, "tau2": tau2, "beta": beta, "w_ee": w_ee,
                "w_ei": w_ei, "w_ie": w_ie, "w_ii": w_ii, "I": I},
        bifurcation_parameter="I",
        rhs=_wc_rhs,
        jac=_wc_jac,
        # finite-difference steps must resolve the sigmoid's width in state units
        scale=np.full(2, abs(beta) / max(abs(w_ee), abs(w_ei), abs(w_ie), abs(w_ii))),
    )


# -- feedback control -------------------------------------------------------


def _fc_rhs(x, p):
    x1, x2, x3 = x
    return np.array([x2, x3, -p["alpha"] * x3 - p["beta"] * x2 + x1 * (x1 - 1.0)])


def _fc_jac(x, p):
    return np.array([
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [2.0 * x[0] - 1.0, -p["beta"], -p["alpha"]],
    ])


def _fc_B(x, p, u, v):
    zero = 0.0 * u[0]
    return np.array([zero, zero, 2.0 * u[0] * v[0]])


def _fc_C(x, p, u, v, w):
    return np.zeros(3, dtype=np.result_type(u, v, w))


def _fc_equilibrium(p, alpha):
    return np.zeros(3)


def _fc_alpha_star(p):
    return 1.0 / p["beta"]


def _fc_spectrum_at_star(p):
    b = p["beta"]
    return [1j * math.sqrt(b), -1j * math.sqrt(b), -1.0 / b]


def feedback_control(beta: float = 1.0, alpha: float = 1.0) -> VectorFieldModel:
    if beta <= 0 or alpha <= 0:
        raise ValueError("feedback-control needs alpha > 0 and beta > 0")
    return VectorFieldModel(
        name="feedback-control",
        dimension=3,
        params={"beta": beta, "alpha": alpha},
        bifurcation_parameter="alpha",
        rhs=_fc_rhs,
        jac=_fc_jac,
        bilinear=_fc_B,
        trilinear=_fc_C,
        oracles={
            "equilibrium": _fc_equilibrium,
            "alpha_star": _fc_alpha_star,
            "spectrum_at_star": _fc_spectrum_at_star,
        },
    )


# -- linear test field ------------------------------------------------------


def _lin_rhs(x, p, matrix):
    return matrix @ x


def _lin_jac(x, p, matrix):
    return matrix.copy()


def _lin_B(x, p, u, v, matrix):
    return np.zeros(len(matrix), complex)


def _lin_C(x, p, u, v, w, matrix):
    return np.zeros(len(matrix), complex)


def linear(matrix, analytic: bool = True) -> VectorFieldModel:
    """``f(x) = M x`` with a dummy bifurcation parameter; handy for degenerate cases."""
    M = np.array(matrix, float)
    extra = {}
    if analytic:
        extra = dict(jac=partial(_lin_jac, matrix=M), bilinear=partial(_lin_B, matrix=M),
                     trilinear=partial(_lin_C, matrix=M))
    return VectorFieldModel(name="linear", dimension=len(M), params={"alpha": 0.0},
                            bifurcation_parameter="alpha", rhs=partial(_lin_rhs, matrix=M), **extra)


REGISTRY = {
    "predator-prey": predator_prey,
    "brusselator": brusselator,
    "wilson-cowan": wilson_cowan,
    "feedback-control": feedback_control,
}


def get_model(name: str, **params) -> VectorFieldModel:
    """Look up a built-in by registry name, applying parameter overrides."""
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(REGISTRY)}") from None
    return factory(**params)
