"""Eigenstructure of the intensity matrix.

Spectral projections are computed through a generalized-eigenvector basis:
the eigenvalues are clustered, for each cluster of multiplicity ``m`` the
``m`` smallest right singular vectors of ``(A - lam I)^m`` span the
generalized eigenspace, and ``P_lam = S E_lam S^-1``. Jordan indices come
from rank deficiencies of powers of the restricted nilpotent part.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "SpectralError",
    "SpectralComponent",
    "Spectrum",
    "UrnClassification",
    "PrincipalPair",
    "eigen_decompose",
    "eigen_decompose_exact",
    "classify_urn",
    "principal_pair",
    "verify_spectral_identities",
]

CLUSTER_RTOL = 1e-8
RANK_RTOL = 1e-10
MAX_COND = 1e10
IDENTITY_RTOL = 1e-8


class SpectralError(ArithmeticError):
    """Eigenstructure could not be determined reliably."""


@dataclass
class SpectralComponent:
    lam: complex
    alg_mult: int
    nu: int
    P: np.ndarray
    N: np.ndarray


@dataclass
class Spectrum:
    components: list
    ordered_eigenvalues: list
    tol: float
    b_check: bool | None = None
    cond: float = 1.0

    def component(self, lam) -> SpectralComponent:
        """Component whose eigenvalue is closest to ``lam``."""
        return min(self.components, key=lambda c: abs(c.lam - lam))

    @property
    def lambda1(self) -> SpectralComponent:
        return self.components[0]

    @property
    def diagonalizable(self) -> bool:
        return all(c.nu == 0 for c in self.components)


@dataclass(frozen=True)
class UrnClassification:
    kind: str  # small_strict | critical | large | degenerate_Reλ2_eq_λ1
    ratio: float
    nu2: int
    lambda1: complex = field(default=0j)
    lambda2: complex = field(default=0j)

    @property
    def short(self) -> str:
        return {"small_strict": "small", "critical": "critical (small)", "large": "large"}.get(
            self.kind, "degenerate (Re lambda2 = lambda1)")


@dataclass
class PrincipalPair:
    u1: np.ndarray
    v1: np.ndarray


def _norm(A) -> float:
    return float(np.linalg.norm(A, 2))


def _cluster(eigs: np.ndarray, tol: float) -> list:
    """Single-linkage clusters of eigenvalues closer than ``tol``."""
    n = len(eigs)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(eigs[i] - eigs[j]) <= tol:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [eigs[idx] for idx in groups.values()]


def _rank(M: np.ndarray, thresh: float) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > thresh))


def _sort_components(comps: list, tol: float) -> list:
    """Decreasing real part; real parts within ``tol`` tie and are ordered
    by decreasing ``nu``, then decreasing imaginary part."""
    comps = sorted(comps, key=lambda c: (-c.lam.real, -c.lam.imag))
    groups = []
    for c in comps:
        if groups and abs(groups[-1][0].lam.real - c.lam.real) <= tol:
            groups[-1].append(c)
        else:
            groups.append([c])
    return [c for g in groups for c in sorted(g, key=lambda c: (-c.nu, -c.lam.imag, -c.lam.real))]


def _decompose(A: np.ndarray, tol: float, rank_tol: float, max_cond: float):
    q = A.shape[0]
    eigs = scipy.linalg.eigvals(A)
    clusters = _cluster(eigs, tol)
    bases = []
    for cl in clusters:
        m = len(cl)
        lam = complex(np.mean(cl))
        M = np.linalg.matrix_power(A - lam * np.eye(q), m)
        _, s, vh = np.linalg.svd(M)
        basis = vh[q - m:].conj().T  # right singular vectors of the m smallest values
        bases.append((lam, m, basis))
    S = np.hstack([b for _, _, b in bases])
    cond = float(np.linalg.cond(S))
    if not np.isfinite(cond) or cond > max_cond:
        raise SpectralError(f"generalized eigenbasis is ill-conditioned (cond={cond:.3g})")
    Sinv = np.linalg.inv(S)
    comps = []
    col = 0
    for lam, m, basis in bases:
        rows = Sinv[col:col + m]
        col += m
        P = basis @ rows
        # restriction of A to the generalized eigenspace
        B = rows @ A @ basis
        lam = complex(np.trace(B) / m)
        T = B - lam * np.eye(m)
        nu = 0
        Tk = np.eye(m)
        for k in range(1, m + 1):
            Tk = Tk @ T
            if _rank(Tk, rank_tol * max(1.0, _norm(A)) ** k) == 0:
                nu = k - 1
                break
        else:
            nu = m - 1
        N = (A - lam * np.eye(q)) @ P
        if nu == 0:
            N = np.zeros_like(N)
        comps.append(SpectralComponent(lam, m, nu, P, N))
    return comps, cond


def eigen_decompose(A, tol: float | None = None, *, b: float | None = None,
                    rank_tol: float = RANK_RTOL, max_cond: float = MAX_COND,
                    escalate: bool = True) -> Spectrum:
    """Spectral components ``(lam, mult, nu, P_lam, N_lam)`` of ``A``.

    Parameters
    ----------
    A : (q, q) array_like
    tol : float, optional
        Eigenvalue clustering distance; default ``1e-8 * (1 + ||A||)``.
    b : float, optional
        When given, ``Spectrum.b_check`` records whether ``lambda_1 == b``.
    escalate : bool
        If the basis for ``tol`` is ill-conditioned or the projections
        violate their identities (typically a defective eigenvalue split by
        rounding), retry with a coarser tolerance up to
        ``1e-5 * (1 + ||A||)`` before giving up.

    Raises
    ------
    SpectralError
        If no tolerance yields a well-conditioned basis whose projections
        satisfy the identities to ``1e-8 * (1 + ||A||)``.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.all(np.isfinite(A)):
        raise ValueError("A must be a finite square matrix")
    scale = 1.0 + _norm(A)
    tol = CLUSTER_RTOL * scale if tol is None else float(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")
    last = None
    tols = [tol]
    if escalate:
        while tols[-1] < 1e-5 * scale:
            tols.append(tols[-1] * 10)
    for t in tols:
        try:
            comps, cond = _decompose(A, t, rank_tol, max_cond)
        except SpectralError as exc:
            last = exc
            continue
        # rounding can split a defective eigenvalue into near-parallel
        # eigenvectors; the identities then fail even though cond(S) is finite
        worst = max(verify_spectral_identities(Spectrum(comps, [], t), A).values())
        if worst <= IDENTITY_RTOL * scale:
            break
        last = SpectralError(f"spectral identities fail at tol={t:.3g} (residual {worst:.3g})")
    else:
        raise last
    comps = _sort_components(comps, t)
    ordered = [c.lam for c in comps for _ in range(c.alg_mult)]
    spec = Spectrum(comps, ordered, t, cond=cond)
    if b is not None:
        spec.b_check = abs(ordered[0] - b) <= t
    return spec


def eigen_decompose_exact(A) -> Spectrum:
    """Exact-arithmetic decomposition for integer or rational matrices.

    Uses sympy's Jordan form, so eigenvalues are algebraic numbers and the
    Jordan structure is decided without tolerances. Intended as an oracle
    for the floating-point path on small matrices.
    """
    import sympy

    M = sympy.Matrix(np.asarray(A).tolist()).applyfunc(sympy.nsimplify)
    q = M.shape[0]
    Pm, J = M.jordan_form()
    Pinv = Pm.inv()
    blocks = []
    i = 0
    while i < q:
        lam = J[i, i]
        size = 1
        while i + size < q and J[i + size - 1, i + size] == 1 and J[i + size, i + size] == lam:
            size += 1
        blocks.append((lam, i, size))
        i += size
    comps = {}
    for lam, start, size in blocks:
        key = sympy.simplify(lam)
        entry = next((k for k in comps if sympy.simplify(k - key) == 0), None)
        if entry is None:
            comps[key] = []
            entry = key
        comps[entry].append((start, size))
    out = []
    for lam, blks in comps.items():
        E = sympy.zeros(q, q)
        for start, size in blks:
            for k in range(start, start + size):
                E[k, k] = 1
        P = sympy.simplify(Pm * E * Pinv)
        N = sympy.simplify((M - lam * sympy.eye(q)) * P)
        Pn = np.array(P.evalf(30).tolist(), dtype=complex)
        Nn = np.array(N.evalf(30).tolist(), dtype=complex)
        out.append(SpectralComponent(complex(sympy.N(lam, 30)), sum(s for _, s in blks),
                                     max(s for _, s in blks) - 1, Pn, Nn))
    tol = 1e-12
    out = _sort_components(out, tol)
    ordered = [c.lam for c in out for _ in range(c.alg_mult)]
    return Spectrum(out, ordered, tol)


def classify_urn(spectrum: Spectrum, b: float) -> UrnClassification:
    """Small / critical / large classification from ``Re lambda2 / lambda1``.

    Raises
    ------
    SpectralError
        If the leading eigenvalue differs from ``b``.
    """
    lam1 = spectrum.ordered_eigenvalues[0]
    tol = spectrum.tol
    if abs(lam1 - b) > max(tol, 1e-9 * max(1.0, abs(b))):
        raise SpectralError(f"lambda1={lam1:.6g} differs from b={b:.6g}")
    lam1 = float(b)
    if len(spectrum.ordered_eigenvalues) < 2:
        raise SpectralError("need at least two eigenvalues")
    # the lambda2 class: leading component if lambda1 is multiple, else the next one
    first = spectrum.components[0]
    comp2 = first if first.alg_mult > 1 else spectrum.components[1]
    lam2 = comp2.lam
    ratio = lam2.real / lam1
    if abs(lam2.real - lam1) <= tol:
        kind = "degenerate_Reλ2_eq_λ1"
    elif abs(lam2.real - lam1 / 2) <= tol:
        kind = "critical"
    elif lam2.real < lam1 / 2:
        kind = "small_strict"
    else:
        kind = "large"
    return UrnClassification(kind, float(ratio), comp2.nu, complex(lam1), lam2)


def principal_pair(A, a, b: float, spectrum: Spectrum | None = None, tol: float = 1e-8) -> PrincipalPair:
    """Right eigenvector ``v1`` for ``lambda1 = b`` normalized by ``a.v1 = 1``.

    Also checks ``P_lambda1 = v1 a'``.

    Raises
    ------
    SpectralError
        If ``b`` is not a simple eigenvalue.
    """
    A = np.asarray(A, dtype=float)
    a = np.asarray(a, dtype=float)
    q = A.shape[0]
    if spectrum is None:
        spectrum = eigen_decompose(A)
    comp = spectrum.component(b)
    if abs(comp.lam - b) > spectrum.tol:
        raise SpectralError(f"b={b} is not an eigenvalue")
    if comp.alg_mult != 1:
        raise SpectralError(f"lambda1 multiple (multiplicity {comp.alg_mult})")
    _, _, vh = np.linalg.svd(A - b * np.eye(q))
    v = vh[-1].conj()
    v = v.real if np.allclose(v.imag, 0) else v
    s = a @ v
    if abs(s) == 0:
        raise SpectralError("a is orthogonal to the right eigenvector")
    v1 = v / s
    scale = 1.0 + _norm(A)
    if np.max(np.abs(A @ v1 - b * v1)) > tol * scale * max(1.0, np.max(np.abs(v1))):
        raise SpectralError("right eigenvector residual too large")
    if np.max(np.abs(comp.P - np.outer(v1, a))) > tol * scale:
        raise SpectralError("P_lambda1 differs from v1 a'")
    return PrincipalPair(u1=a.copy(), v1=np.real_if_close(v1))


def verify_spectral_identities(spectrum: Spectrum, A) -> dict:
    """Max residuals of the projection identities.

    Keys: ``sum_P`` (sum P - I), ``orthogonal`` (P_l P_m), ``commute``
    (A P - P A), ``nilpotent_part`` ((A - l) P - N), ``nilpotency``
    (N^(nu+1)), ``idempotent`` (P^2 - P), ``reconstruct``
    (sum l P + N - A).
    """
    A = np.asarray(A, dtype=complex)
    q = A.shape[0]
    I = np.eye(q)
    comps = spectrum.components
    r = {}
    r["sum_P"] = float(np.max(np.abs(sum(c.P for c in comps) - I)))
    r["orthogonal"] = max((float(np.max(np.abs(c.P @ d.P))) for c in comps for d in comps if c is not d),
                          default=0.0)
    r["commute"] = max(float(np.max(np.abs(A @ c.P - c.P @ A))) for c in comps)
    r["nilpotent_part"] = max(float(np.max(np.abs((A - c.lam * I) @ c.P - c.N))) for c in comps)
    r["nilpotency"] = max(float(np.max(np.abs(np.linalg.matrix_power(c.N, c.nu + 1)))) for c in comps)
    r["idempotent"] = max(float(np.max(np.abs(c.P @ c.P - c.P))) for c in comps)
    r["reconstruct"] = float(np.max(np.abs(sum(c.lam * c.P + c.N for c in comps) - A)))
    return r
