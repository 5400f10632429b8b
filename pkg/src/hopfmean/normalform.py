"""Poincare normal form at a Hopf-type equilibrium and the mean-deviation vector K.

With ``lam = mu + i*omega`` the critical eigenvalue, ``q``/``p`` the right and
left eigenvectors (``<p, q> = 1``) and ``B``, ``C`` the second and third
derivative forms of ``f`` at ``x0``::

    g20 = <p, B(q, q)>      g11 = <p, B(q, conj q)>
    g02 = <p, B(conj q, conj q)>   g21 = <p, C(q, q, conj q)>

The part of each quadratic form outside the critical plane,

    H_jk = B_jk - <p, B_jk> q - <conj p, B_jk> conj q,

drives the quadratic shape ``y = V(z, conj z)`` of the invariant manifold,
``V = eta20 z^2/2 + eta11 |z|^2 + eta02 conj(z)^2/2`` with::

    (2 lam I - A) eta20 = H20
    (2 mu I - A) eta11 = H11
    (2 conj(lam) I - A) eta02 = H02

Feeding ``V`` back into the ``z`` equation shifts the cubic coefficient to::

    g21~ = g21 + 2 <p, B(q, eta11)> + <p, B(conj q, eta20)>

The normal form ``w' = lam w + c1 w^2 conj(w)`` then has a circular cycle of
radius ``r_w = sqrt(-mu / Re c1)``. Averaging the near-identity map
``z = w + h20 w^2/2 + h11 |w|^2 + h02 conj(w)^2/2`` together with ``V`` over
one period leaves only the ``|w|^2`` terms, which gives::

    <x> - x0 = K mu + O(mu^2),
    K = -Re(2 g11 q / (conj(lam) Re c1)) - eta11 / Re c1.

For ``n = 2`` the vectors ``q`` and ``conj q`` span the whole space, so every
``H_jk`` and ``eta_jk`` vanishes and the same code path reduces to the planar
result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateLyapunovError, ImaginaryResidueError, ResonanceError
from .field import VectorFieldModel, bilinear_B, trilinear_C
from .spectral import HopfPair, inner

LYAPUNOV_TOL = 1e-10
IMAG_TOL = 1e-10
RESONANCE_TOL = 1e-8

CORRECTED = "corrected"
AS_PRINTED = "as_printed"


def _real(vec, what, tol=IMAG_TOL):
    """Check-then-truncate for quantities that must be real."""
    vec = np.asarray(vec, complex)
    im = float(np.linalg.norm(vec.imag))
    if im > tol * max(1.0, float(np.linalg.norm(vec.real))):
        raise ImaginaryResidueError(f"{what} has imaginary part {im:.3g}")
    return vec.real.copy()


@dataclass
class NormalFormData:
    g20: complex
    g11: complex
    g02: complex
    g21: complex
    g21_tilde: complex
    H20: np.ndarray
    H11: np.ndarray
    H02: np.ndarray
    eta20: np.ndarray
    eta11: np.ndarray
    eta02: np.ndarray
    h20: complex
    h11: complex
    h02: complex
    c1: complex
    ell1: float
    hopf: HopfPair
    equilibrium: object
    model: VectorFieldModel = None
    variant: str = CORRECTED
    # raw imaginary parts seen before truncation, kept for diagnostics
    residues: dict = field(default_factory=dict)
    _cubic: Optional[dict] = field(default=None, repr=False)

    h21 = 0j

    @property
    def lam(self) -> complex:
        return self.hopf.lam

    @property
    def degenerate(self) -> bool:
        return abs(self.ell1) <= LYAPUNOV_TOL

    def cubic(self) -> dict:
        """g30, g12, g03 and the matching cubic h-coefficients (computed on demand)."""
        if self._cubic is None:
            if self.model is None:
                raise ValueError("cubic coefficients need the model")
            eq, q, p, lam = self.equilibrium, self.hopf.q, self.hopf.p, self.hopf.lam
            qb = np.conj(q)
            C = lambda u, v, w: trilinear_C(self.model, eq.x0, eq.alpha, u, v, w)
            g30 = inner(p, C(q, q, q))
            g12 = inner(p, C(q, qb, qb))
            g03 = inner(p, C(qb, qb, qb))
            lb = np.conj(lam)
            self._cubic = {
                "g30": g30, "g12": g12, "g03": g03,
                "h30": g30 / (2 * lam), "h12": g12 / (2 * lb), "h03": g03 / (3 * lb - lam),
            }
        return self._cubic

    @property
    def h30(self) -> complex:
        return self.cubic()["h30"]

    @property
    def h12(self) -> complex:
        return self.cubic()["h12"]

    @property
    def h03(self) -> complex:
        return self.cubic()["h03"]


@dataclass
class MeanPrediction:
    K: np.ndarray
    mu: float
    r_w: Optional[float]
    omega_w: float
    predicted_mean: np.ndarray
    cycle_predicted: bool
    criticality: str

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega_w


def compute_g_coefficients(model: VectorFieldModel, eq, hopf: Optional[HopfPair] = None):
    """``(g20, g11, g02, g21)`` together with the three quadratic form values.

    Returns ``(g, B)`` where ``g`` is the coefficient tuple and ``B`` maps
    ``"20"``, ``"11"``, ``"02"`` to ``B(q,q)``, ``B(q,conj q)``, ``B(conj q,conj q)``.
    """
    hp = hopf or eq.hopf
    q, p = hp.q, hp.p
    qb = np.conj(q)
    x0, a = eq.x0, eq.alpha
    B = {
        "20": bilinear_B(model, x0, a, q, q),
        "11": bilinear_B(model, x0, a, q, qb),
        "02": bilinear_B(model, x0, a, qb, qb),
    }
    g = (inner(p, B["20"]), inner(p, B["11"]), inner(p, B["02"]),
         inner(p, trilinear_C(model, x0, a, q, q, qb)))
    return g, B


def _shifted_solve(A, shift, rhs, label, spectrum):
    n = len(A)
    norm_a = max(np.linalg.norm(A, 2), 1e-300)
    gap = min(abs(shift - z) for z in spectrum)
    if gap <= RESONANCE_TOL * norm_a:
        raise ResonanceError(f"{label} = {shift:.6g} is (nearly) an eigenvalue of A (gap {gap:.3g})")
    return np.linalg.solve(shift * np.eye(n) - A, rhs)


def compute_H_and_eta(eq, hopf: HopfPair, Bq: dict):
    """Centre-plane complements ``H_jk`` and manifold coefficients ``eta_jk``.

    Raises :class:`ResonanceError` when ``2 lam``, ``2 mu`` or ``2 conj(lam)``
    sits within ``1e-8 ||A||`` of the spectrum.
    """
    q, p, lam = hopf.q, hopf.p, hopf.lam
    qb, pb = np.conj(q), np.conj(p)
    H = {k: b - inner(p, b) * q - inner(pb, b) * qb for k, b in Bq.items()}
    A = eq.jacobian
    spectrum = [lam, np.conj(lam), *hopf.other_eigenvalues]
    eta = {
        "20": _shifted_solve(A, 2 * lam, H["20"], "2*lam", spectrum),
        "11": _shifted_solve(A, complex(2 * lam.real), H["11"], "2*Re(lam)", spectrum),
        "02": _shifted_solve(A, 2 * np.conj(lam), H["02"], "2*conj(lam)", spectrum),
    }
    return H, eta


def compute_c1(g20: complex, g11: complex, g02: complex, g21_tilde: complex, lam: complex) -> complex:
    lam = complex(lam)
    lb = lam.conjugate()
    if lam == 0 or 2 * lam == lb:
        raise ZeroDivisionError("c1 needs lam != 0 and 2*lam != conj(lam)")
    return ((2 * lam + lb) / (2 * abs(lam) ** 2) * g20 * g11
            + abs(g11) ** 2 / lam
            + abs(g02) ** 2 / (2 * (2 * lam - lb))
            + g21_tilde / 2)


def normal_form(model: VectorFieldModel, eq, hopf: Optional[HopfPair] = None, variant: str = CORRECTED) -> NormalFormData:
    """Assemble all normal-form data at the equilibrium ``eq``.

    ``hopf`` overrides the eigenpair attached to ``eq`` (any gauge with
    ``<p, q> = 1`` is accepted). ``variant="as_printed"`` evaluates the
    manifold feedback term with ``B(q, eta20)`` instead of ``B(conj q, eta20)``;
    it exists for comparison only.
    """
    if variant not in (CORRECTED, AS_PRINTED):
        raise ValueError(f"unknown variant {variant!r}")
    hp = hopf or eq.hopf
    if hp is None:
        raise ValueError("equilibrium has no Hopf pair")
    lam, q, p = hp.lam, hp.q, hp.p
    (g20, g11, g02, g21), Bq = compute_g_coefficients(model, eq, hp)
    residues = {"B11": float(np.linalg.norm(Bq["11"].imag))}
    Bq["11"] = _real(Bq["11"], "B(q, conj q)").astype(complex)
    H, eta = compute_H_and_eta(eq, hp, Bq)
    residues["H11"] = float(np.linalg.norm(H["11"].imag))
    residues["eta11"] = float(np.linalg.norm(eta["11"].imag))
    residues["H02_conj_H20"] = float(np.linalg.norm(np.conj(H["02"]) - H["20"]))
    residues.update({f"p_eta{k}": abs(inner(p, v)) for k, v in eta.items()})
    H11 = _real(H["11"], "H11")
    eta11 = _real(eta["11"], "eta11", tol=1e-9)

    x0, a = eq.x0, eq.alpha
    partner = q if variant == AS_PRINTED else np.conj(q)
    if np.any(eta["20"]) or np.any(eta11):
        g21_tilde = (g21 + 2 * inner(p, bilinear_B(model, x0, a, q, eta11))
                     + inner(p, bilinear_B(model, x0, a, partner, eta["20"])))
    else:
        g21_tilde = g21
    c1 = compute_c1(g20, g11, g02, g21_tilde, lam)
    lb = np.conj(lam)
    return NormalFormData(
        g20=g20, g11=g11, g02=g02, g21=g21, g21_tilde=g21_tilde,
        H20=H["20"], H11=H11.astype(complex), H02=H["02"],
        eta20=eta["20"], eta11=eta11.astype(complex), eta02=eta["02"],
        h20=g20 / lam, h11=g11 / lb, h02=g02 / (2 * lb - lam),
        c1=c1, ell1=float(c1.real), hopf=hp, equilibrium=eq, model=model,
        variant=variant, residues=residues,
    )


def compute_K(nf: NormalFormData, include_eta: bool = True) -> np.ndarray:
    """Mean-deviation vector ``K``; ``include_eta=False`` drops the manifold term."""
    if nf.degenerate:
        raise DegenerateLyapunovError(f"|Re c1| = {abs(nf.ell1):.3g} is below {LYAPUNOV_TOL}", nf.ell1)
    lam, q, l1 = nf.hopf.lam, nf.hopf.q, nf.ell1
    k = 2 * nf.g11 / (np.conj(lam) * l1)
    K = -k.real * q.real + k.imag * q.imag
    if include_eta:
        K = K - nf.eta11 / l1
    return _real(K, "K")


def _criticality(ell1):
    if abs(ell1) <= LYAPUNOV_TOL:
        return "degenerate"
    return "supercritical" if ell1 < 0 else "subcritical"


def predict_mean(eq, nf: NormalFormData) -> MeanPrediction:
    """Predicted cycle mean ``x0 + K mu``, or ``x0`` itself when no cycle is predicted."""
    K = compute_K(nf)
    mu, l1 = nf.hopf.mu, nf.ell1
    omega_w = nf.hopf.omega - nf.c1.imag / l1 * mu
    ratio = -mu / l1
    x0 = np.array(eq.x0, float)
    if ratio > 0:
        return MeanPrediction(K, mu, float(np.sqrt(ratio)), omega_w, x0 + K * mu, True, _criticality(l1))
    return MeanPrediction(K, mu, None, omega_w, x0, False, _criticality(l1))


def predict_orbit(eq, nf: NormalFormData, samples: int = 256, cubic: bool = False) -> np.ndarray:
    """One period of the predicted cycle, shape ``(samples, n)``.

    ``w = r_w exp(i omega_w t)`` is mapped through the near-identity
    transform to ``z`` and then to ``x = x0 + 2 Re(z q) + V(z, conj z)``.
    """
    pred = predict_mean(eq, nf)
    if not pred.cycle_predicted:
        raise ValueError("no cycle predicted at this parameter value")
    if samples < 1:
        raise ValueError("samples must be positive")
    t = np.arange(samples) * (pred.period / samples)
    w = pred.r_w * np.exp(1j * pred.omega_w * t)
    wb = np.conj(w)
    z = w + nf.h20 / 2 * w * w + nf.h11 * w * wb + nf.h02 / 2 * wb * wb
    if cubic:
        c = nf.cubic()
        z = z + c["h30"] / 6 * w ** 3 + c["h12"] / 2 * w * wb * wb + c["h03"] / 6 * wb ** 3
    q = nf.hopf.q
    x = np.outer(np.ones(samples), eq.x0) + 2 * np.real(np.outer(z, q))
    V = np.real(np.outer(z * z, nf.eta20)) + np.outer(np.abs(z) ** 2, nf.eta11.real)
    return x + V


def oigm_gain_jump(bp, nf: Optional[NormalFormData] = None) -> np.ndarray:
    """Jump of ``d<x>/dalpha`` across ``alpha*``: ``K(alpha*) * mu'(alpha*)``."""
    nf = nf or bp.normal_form
    if nf is None:
        raise DegenerateLyapunovError("no normal form at the bifurcation point", bp.lyapunov_re_c1)
    if abs(bp.mu_prime) < 1e-12:
        raise ValueError(f"transversality fails: mu'(alpha*) = {bp.mu_prime:.3g}")
    return compute_K(nf) * bp.mu_prime
