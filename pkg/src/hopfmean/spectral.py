"""Critical eigenpair of an equilibrium Jacobian.

For a Jacobian ``A`` this finds the complex eigenvalue
``lam = mu + i*omega`` (``omega > 0``) that drives the Hopf instability,
its right eigenvector ``q`` and the left eigenvector ``p`` with
``A^T p = conj(lam) p`` normalised so that ``<p, q> = 1`` under
``<u, v> = sum(conj(u_k) * v_k)``.

Phase convention: the largest-magnitude component of ``q`` is real and
positive and ``||q|| = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConvergenceError, NoComplexPairError, NonSimpleEigenvalueError

SIMPLE_TOL = 1e-8


def inner(u, v) -> complex:
    """``<u, v> = sum(conj(u) * v)``."""
    return complex(np.vdot(u, v))


@dataclass
class HopfPair:
    lam: complex
    q: np.ndarray
    p: np.ndarray
    other_eigenvalues: list
    residual_right: float = 0.0
    residual_left: float = 0.0
    sigma: Optional[float] = None
    delta: Optional[float] = None
    warnings: list = field(default_factory=list)

    @property
    def mu(self) -> float:
        return self.lam.real

    @property
    def omega(self) -> float:
        return self.lam.imag

    @property
    def pq(self) -> complex:
        return inner(self.p, self.q)

    @property
    def pqbar(self) -> complex:
        return inner(self.p, np.conj(self.q))

    def regauged(self, factor: complex) -> "HopfPair":
        """Return the pair with ``q -> factor*q`` and ``p -> p/conj(factor)``."""
        factor = complex(factor)
        return HopfPair(self.lam, self.q * factor, self.p / np.conj(factor), list(self.other_eigenvalues),
                        self.residual_right, self.residual_left, self.sigma, self.delta, list(self.warnings))


def _eig2(A):
    a, b = A[0]
    c, d = A[1]
    sigma = a + d
    delta = a * d - b * c
    disc = 0.25 * sigma * sigma - delta
    if disc < 0:
        root = 1j * np.sqrt(-disc)
        lams = [0.5 * sigma + root, 0.5 * sigma - root]
    else:
        # avoid cancellation in the smaller root
        big = 0.5 * sigma + np.copysign(np.sqrt(disc), sigma if sigma != 0 else 1.0)
        small = delta / big if big != 0 else 0.0
        lams = [big + 0j, small + 0j]
    out = []
    for lam in lams:
        v1 = np.array([b, lam - a], complex)
        v2 = np.array([lam - d, c], complex)
        v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
        nv = np.linalg.norm(v)
        if nv == 0:  # A = lam*I
            v = np.array([1.0, 0.0], complex) if not out else np.array([0.0, 1.0], complex)
            nv = 1.0
        out.append((complex(lam), v / nv))
    return out


def eigen_all(A) -> list:
    """All eigenvalues of ``A`` with unit right eigenvectors, as ``(lam, v)`` pairs.

    2x2 matrices use the characteristic polynomial ``lam^2 - sigma*lam + delta``
    directly; larger ones go through LAPACK's Hessenberg/QR solver.
    """
    A = np.asarray(A, float)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if A.shape == (2, 2):
        return _eig2(A)
    try:
        lams, vecs = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration failed: {exc}") from exc
    return [(complex(lams[k]), vecs[:, k].astype(complex)) for k in range(len(lams))]


def select_hopf_pair(eigen_list, previous: Optional[HopfPair] = None, scale: float = 1.0):
    """Pick the critical eigenvalue (positive imaginary part).

    Without ``previous`` the complex eigenvalue with the largest real part
    wins; with ``previous`` the one closest to ``previous.lam``.

    Returns ``(lam, others, warnings)``.
    """
    lams = [lam for lam, _ in eigen_list]
    tol = 1e-12 * max(scale, 1e-300)
    candidates = [lam for lam in lams if lam.imag > tol]
    if not candidates:
        raise NoComplexPairError(f"no complex-conjugate eigenvalue pair among {lams}")
    if previous is None:
        chosen = max(candidates, key=lambda z: (z.real, z.imag))
    else:
        chosen = min(candidates, key=lambda z: abs(z - previous.lam))
    others = list(lams)
    others.remove(chosen)
    conj_idx = min(range(len(others)), key=lambda k: abs(others[k] - chosen.conjugate()))
    others.pop(conj_idx)
    warnings = []
    if chosen.real >= 0 and any(z.real >= 0 for z in others):
        warnings.append("other eigenvalues with non-negative real part")
    return chosen, others, warnings


def _null_vector(M):
    _, _, vh = np.linalg.svd(M)
    return np.conj(vh[-1])


def left_right_eigenvectors(A, lam: complex, spectrum=None):
    """Normalised ``(p, q)`` for the simple eigenvalue ``lam`` of ``A``."""
    A = np.asarray(A, float)
    n = len(A)
    norm_a = max(np.linalg.norm(A, 2), 1e-300)
    if spectrum is None:
        spectrum = [z for z, _ in eigen_all(A)]
    gaps = sorted(abs(z - lam) for z in spectrum)
    # gaps[0] is lam itself
    if len(gaps) > 1 and gaps[1] <= SIMPLE_TOL * norm_a:
        raise NonSimpleEigenvalueError(f"eigenvalue {lam} is not simple (gap {gaps[1]:.3g})")
    eye = np.eye(n)
    q = _null_vector(A - lam * eye)
    p = _null_vector(A.T - np.conj(lam) * eye)
    mags = np.abs(q)
    k = int(np.flatnonzero(mags >= (1.0 - 1e-9) * mags.max())[0])
    q = q * (abs(q[k]) / q[k])
    q = q / np.linalg.norm(q)
    q[k] = q[k].real
    pq = inner(p, q)
    if abs(pq) < 1e-14:
        raise NonSimpleEigenvalueError(f"left and right eigenvectors of {lam} are orthogonal")
    p = p / np.conj(pq)
    return p, q


def hopf_pair(A, previous: Optional[HopfPair] = None) -> HopfPair:
    """Critical eigenvalue and normalised eigenvectors of ``A``."""
    A = np.asarray(A, float)
    eig = eigen_all(A)
    norm_a = max(np.linalg.norm(A, 2), 1e-300)
    lam, others, warnings = select_hopf_pair(eig, previous, norm_a)
    p, q = left_right_eigenvectors(A, lam, [z for z, _ in eig])
    res_r = float(np.linalg.norm(A @ q - lam * q))
    res_l = float(np.linalg.norm(A.T @ p - np.conj(lam) * p))
    sigma = delta = None
    if A.shape == (2, 2):
        sigma = float(np.trace(A))
        delta = float(np.linalg.det(A))
    return HopfPair(lam, q, p, others, res_r, res_l, sigma, delta, warnings)
