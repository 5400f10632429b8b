"""Vector fields f(x; alpha) and their derivative tensors.

Every model exposes the right-hand side; the Jacobian ``A`` and the
multilinear forms ``B(u, v)`` and ``C(u, v, w)`` come from analytic
callbacks when the model registers them and from finite differences
otherwise. The finite-difference forms probe ``f`` along real coordinate
directions only and are then contracted with the (possibly complex)
arguments, so they are exactly multilinear and ``f`` is only ever
evaluated at real states.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import NonFiniteError
from .expr import ModelFile, eval_expression, load_model_file

EPS = np.finfo(float).eps
H_JAC = EPS ** (1 / 3)
# steps balance stencil truncation error against round-off
H_B = EPS ** (1 / 6)
H_C = EPS ** (1 / 9)  # sixth-order stencil for C


@dataclass(frozen=True)
class VectorFieldModel:
    """A parameterised right-hand side ``f(x; params)``.

    Callbacks take ``(x, params)`` where ``params`` is a plain dict that
    already contains the bifurcation parameter. Analytic ``bilinear`` and
    ``trilinear`` callbacks must accept complex direction vectors.
    """

    name: str
    dimension: int
    params: Mapping[str, float]
    bifurcation_parameter: str
    rhs: Callable
    jac: Optional[Callable] = None
    bilinear: Optional[Callable] = None
    trilinear: Optional[Callable] = None
    scale: np.ndarray = None
    oracles: Mapping[str, Callable] = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        scale = np.ones(self.dimension) if self.scale is None else np.asarray(self.scale, float)
        if scale.shape != (self.dimension,) or np.any(scale <= 0):
            raise ValueError("scale must be a positive vector of length dimension")
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "params", dict(self.params))

    def param_values(self, alpha: float) -> dict:
        values = dict(self.params)
        values[self.bifurcation_parameter] = float(alpha)
        return values

    def with_params(self, **overrides) -> "VectorFieldModel":
        unknown = set(overrides) - set(self.params)
        if unknown:
            raise KeyError(f"unknown parameter(s) {sorted(unknown)} for model {self.name!r}")
        params = dict(self.params)
        params.update({k: float(v) for k, v in overrides.items()})
        return replace(self, params=params)

    @property
    def has_analytic_tensors(self) -> bool:
        return self.bilinear is not None and self.trilinear is not None

    @property
    def alpha(self) -> float:
        return self.params.get(self.bifurcation_parameter, math.nan)


class ExpressionRHS:
    """Right-hand side backed by parsed expressions (picklable)."""

    def __init__(self, asts):
        self.asts = tuple(asts)

    def __call__(self, x, params):
        return np.array([eval_expression(a, x, params) for a in self.asts])


def model_from_file(source) -> VectorFieldModel:
    """Build a model from a JSON model file path, mapping or :class:`ModelFile`."""
    mf = source if isinstance(source, ModelFile) else load_model_file(source)
    return VectorFieldModel(
        name=mf.name,
        dimension=mf.dimension,
        params=mf.parameters,
        bifurcation_parameter=mf.bifurcation_parameter,
        rhs=ExpressionRHS(mf.equations),
    )


def _check_vector(x, n):
    x = np.asarray(x)
    if x.shape != (n,):
        raise ValueError(f"expected a vector of length {n}, got shape {x.shape}")
    return x


def _finite(value, what):
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f"non-finite {what}: {value}")
    return value


def eval_rhs(model: VectorFieldModel, x, alpha: float) -> np.ndarray:
    """Return ``f(x; alpha)``; raises :class:`NonFiniteError` on inf/nan."""
    x = _check_vector(np.asarray(x, float), model.dimension)
    out = np.asarray(model.rhs(x, model.param_values(alpha)), float)
    if out.shape != (model.dimension,):
        raise ValueError(f"rhs of {model.name!r} returned shape {out.shape}")
    return _finite(out, f"rhs of {model.name!r} at x={x}")


def jacobian(model: VectorFieldModel, x, alpha: float) -> np.ndarray:
    """Jacobian of ``f`` at ``x``: analytic when available, else central differences."""
    x = _check_vector(np.asarray(x, float), model.dimension)
    params = model.param_values(alpha)
    if model.jac is not None:
        J = np.asarray(model.jac(x, params), float)
        return _finite(J, "analytic Jacobian")
    n = model.dimension
    J = np.empty((n, n))
    for j in range(n):
        h = H_JAC * model.scale[j]
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (np.asarray(model.rhs(xp, params), float) - np.asarray(model.rhs(xm, params), float)) / (xp[j] - xm[j])
    return _finite(J, "finite-difference Jacobian")


@dataclass(frozen=True)
class TensorProbe:
    """Record of one real-direction finite-difference probe."""

    base: np.ndarray
    directions: tuple
    step: float
    result: np.ndarray


class _FD:
    """Finite-difference evaluator of B and C for one (model, x0, alpha)."""

    def __init__(self, model, x0, alpha):
        self.model = model
        self.x0 = np.asarray(x0, float)
        self.params = model.param_values(alpha)
        self.scale = model.scale
        self.f0 = np.asarray(model.rhs(self.x0, self.params), float)
        self.probes = []
        self._B = self._C = None

    def f(self, x):
        return np.asarray(self.model.rhs(x, self.params), float)

    def _unit(self, w):
        size = float(np.linalg.norm(w / self.scale))
        if size == 0.0:
            return None, 0.0
        return w / size, size

    def quad(self, w):
        """B(w, w) for a real direction w (five-point second difference)."""
        u, size = self._unit(w)
        if u is None:
            return np.zeros(self.model.dimension)
        h = H_B
        d = h * u
        x0, f = self.x0, self.f
        val = (16.0 * (f(x0 + d) + f(x0 - d)) - (f(x0 + 2 * d) + f(x0 - 2 * d))
               - 30.0 * self.f0) / (12.0 * h * h)
        out = _finite(val * size * size, "second-difference probe")
        self.probes.append(TensorProbe(self.x0, (w,), h, out))
        return out

    def cube(self, w):
        """C(w, w, w) for a real direction w (nine-point third difference)."""
        u, size = self._unit(w)
        if u is None:
            return np.zeros(self.model.dimension)
        h = H_C
        d = h * u
        x0, f = self.x0, self.f
        diff = [f(x0 + k * d) - f(x0 - k * d) for k in (1, 2, 3, 4)]
        val = (-488.0 * diff[0] + 338.0 * diff[1] - 72.0 * diff[2] + 7.0 * diff[3]) / (240.0 * h ** 3)
        out = _finite(val * size ** 3, "third-difference probe")
        self.probes.append(TensorProbe(self.x0, (w,), h, out))
        return out

    def bilinear_real(self, u, v):
        return 0.25 * (self.quad(u + v) - self.quad(u - v))

    def trilinear_real(self, u, v, w):
        total = np.zeros(self.model.dimension)
        for s2, s3 in itertools.product((1.0, -1.0), repeat=2):
            total = total + (s2 * s3) * self.cube(u + s2 * v + s3 * w)
        return total / 24.0

    def basis_B(self):
        """Entries ``B(e_i, e_j)`` as an array indexed ``[component, i, j]``."""
        if self._B is None:
            n = self.model.dimension
            E = np.diag(self.scale)
            T = np.empty((n, n, n))
            for i, j in itertools.combinations_with_replacement(range(n), 2):
                b = self.quad(E[i]) if i == j else self.bilinear_real(E[i], E[j])
                T[:, i, j] = T[:, j, i] = b / (self.scale[i] * self.scale[j])
            self._B = T
        return self._B

    def basis_C(self):
        """Entries ``C(e_i, e_j, e_k)`` indexed ``[component, i, j, k]``."""
        if self._C is None:
            n = self.model.dimension
            E = np.diag(self.scale)
            T = np.empty((n, n, n, n))
            for idx in itertools.combinations_with_replacement(range(n), 3):
                i, j, k = idx
                c = self.cube(E[i]) if i == j == k else self.trilinear_real(E[i], E[j], E[k])
                c = c / (self.scale[i] * self.scale[j] * self.scale[k])
                for perm in set(itertools.permutations(idx)):
                    T[(slice(None),) + perm] = c
            self._C = T
        return self._C


_FD_CACHE: dict = {}


def _fd_for(model, x0, alpha):
    """Reuse one evaluator per (model, x0, alpha) so repeated contractions share probes."""
    x0 = np.asarray(x0, float)
    key = (id(model), x0.tobytes(), float(alpha))
    hit = _FD_CACHE.get(key)
    if hit is not None and hit.model is model:
        return hit
    if len(_FD_CACHE) >= 64:
        _FD_CACHE.clear()
    fd = _FD_CACHE[key] = _FD(model, x0, alpha)
    return fd


def bilinear_B(model: VectorFieldModel, x0, alpha: float, u, v, *, force_fd: bool = False) -> np.ndarray:
    """Second-order form ``B(u, v)`` of ``f`` at ``x0`` for complex ``u, v``."""
    n = model.dimension
    u = _check_vector(np.asarray(u, complex), n)
    v = _check_vector(np.asarray(v, complex), n)
    if model.bilinear is not None and not force_fd:
        out = np.asarray(model.bilinear(np.asarray(x0, float), model.param_values(alpha), u, v), complex)
        return _finite(out, "analytic B")
    # contracting basis entries keeps B exactly bilinear over the complex numbers
    return np.einsum("kij,i,j->k", _fd_for(model, x0, alpha).basis_B(), u, v)


def trilinear_C(model: VectorFieldModel, x0, alpha: float, u, v, w, *, force_fd: bool = False) -> np.ndarray:
    """Third-order form ``C(u, v, w)`` of ``f`` at ``x0`` for complex arguments."""
    n = model.dimension
    u, v, w = (_check_vector(np.asarray(a, complex), n) for a in (u, v, w))
    if model.trilinear is not None and not force_fd:
        out = np.asarray(model.trilinear(np.asarray(x0, float), model.param_values(alpha), u, v, w), complex)
        return _finite(out, "analytic C")
    return np.einsum("kijl,i,j,l->k", _fd_for(model, x0, alpha).basis_C(), u, v, w)


@dataclass
class TensorReport:
    analytic_present: bool
    trials: int
    max_rel_err_B: float = math.nan
    max_rel_err_C: float = math.nan
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.analytic_present and max(self.max_rel_err_B, self.max_rel_err_C) <= 1e-6


def _rel(a, b):
    denom = float(np.linalg.norm(b))
    err = float(np.linalg.norm(a - b))
    return err / denom if denom > 1e-12 else err


def verify_analytic_tensors(model: VectorFieldModel, x0, alpha: float, trials: int = 100, seed: int = 0) -> TensorReport:
    """Compare analytic B and C against finite differences on random unit directions."""
    if not model.has_analytic_tensors:
        return TensorReport(False, 0, message="analytic tensors absent")
    rng = np.random.default_rng(seed)
    n = model.dimension
    worst_b = worst_c = 0.0
    for _ in range(trials):
        u, v, w = (d / np.linalg.norm(d) for d in rng.standard_normal((3, n)))
        worst_b = max(worst_b, _rel(bilinear_B(model, x0, alpha, u, v, force_fd=True),
                                    bilinear_B(model, x0, alpha, u, v)))
        worst_c = max(worst_c, _rel(trilinear_C(model, x0, alpha, u, v, w, force_fd=True),
                                    trilinear_C(model, x0, alpha, u, v, w)))
    return TensorReport(True, trials, worst_b, worst_c,
                        f"max relative error B={worst_b:.3g}, C={worst_c:.3g}")
