"""Deterministic matrix products ``F_{i,j} = prod_{i<=k<j} (I + A/w_k)``.

These propagate both the mean of the urn and its martingale increments.
This module also checks the growth estimates of the projected products
numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import Spectrum, SpectralComponent
from .urn_core import UrnSpec, intensity_matrix, require_balanced

__all__ = [
    "ProductChain",
    "BoundVerdict",
    "transition_factor",
    "product",
    "exact_mean",
    "projected_product_norm",
    "lsoff_sum",
    "lsoff_case",
    "default_lsof_grid",
    "verify_lsof",
    "fit_loglog_slope",
]


class ProductChain:
    """Factors ``I + A/w_k`` with ``w_k = w0 + k b`` and cached ``F_{0,n}``.

    Build from an urn with :meth:`from_spec`, or directly from any complex
    matrix and positive ``w0``, ``b``.
    """

    def __init__(self, A, w0: float, b: float, x0=None):
        self.A = np.asarray(A)
        if w0 <= 0 or b <= 0:
            raise ValueError("w0 and b must be positive")
        self.w0 = float(w0)
        self.b = float(b)
        self.q = self.A.shape[0]
        self.x0 = None if x0 is None else np.asarray(x0, dtype=float)
        self._I = np.eye(self.q)
        # F_{0,n} for n = 0.._cache_n; extended on demand
        self._prefix = {0: self._I.copy()}
        self._last = 0

    @classmethod
    def from_spec(cls, spec: UrnSpec) -> "ProductChain":
        b = require_balanced(spec)
        return cls(intensity_matrix(spec), spec.w0, b, spec.x0)

    def weight(self, k):
        return self.w0 + k * self.b

    def factor(self, k: int) -> np.ndarray:
        return self._I + self.A / self.weight(k)

    def product(self, i: int, j: int) -> np.ndarray:
        if not 0 <= i <= j:
            raise ValueError(f"need 0 <= i <= j, got {i}, {j}")
        if i == 0:
            return self.prefix(j)
        F = self._I.copy()
        for k in range(i, j):
            F = self.factor(k) @ F
        return F

    def prefix(self, n: int) -> np.ndarray:
        """``F_{0,n}``, cached at every ``n`` already visited by a query."""
        if n in self._prefix:
            return self._prefix[n]
        start = max(k for k in self._prefix if k <= n)
        F = self._prefix[start]
        for k in range(start, n):
            F = self.factor(k) @ F
        self._prefix[n] = F
        return F

    def backward_products(self, n: int, start: int = 1) -> np.ndarray:
        """Stack of ``F_{i,n}`` for ``i = start..n`` (index ``i - start``).

        Built from ``F_{n,n} = I`` by right-multiplying one factor at a time.
        """
        out = np.empty((n - start + 1, self.q, self.q), dtype=np.result_type(self.A, float))
        G = self._I.astype(out.dtype)
        out[n - start] = G
        for i in range(n - 1, start - 1, -1):
            G = G @ self.factor(i)
            out[i - start] = G
        return out


def _chain(obj) -> ProductChain:
    if isinstance(obj, ProductChain):
        return obj
    return ProductChain.from_spec(obj)


def transition_factor(spec, k: int) -> np.ndarray:
    """``I + A / w_k``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return _chain(spec).factor(k)


def product(spec, i: int, j: int) -> np.ndarray:
    """``F_{i,j}``; the empty product ``F_{i,i}`` is the identity."""
    return _chain(spec).product(i, j)


def exact_mean(spec, n: int, chain: ProductChain | None = None) -> np.ndarray:
    """``E X_n = F_{0,n} X_0``.

    Also asserts that the total activity of the mean equals ``w_n``.
    """
    if chain is None:
        chain = _chain(spec)
    x0 = spec.x0 if isinstance(spec, UrnSpec) else chain.x0
    m = chain.prefix(n) @ x0
    if isinstance(spec, UrnSpec):
        wn = chain.weight(n)
        got = float(spec.a @ m)
        if abs(got - wn) > 1e-10 * wn:
            raise ArithmeticError(f"a.E X_n = {got!r} differs from w_n = {wn!r}")
    return m


def exact_mean_series(spec, grid, chain: ProductChain | None = None) -> np.ndarray:
    chain = _chain(spec) if chain is None else chain
    return np.array([exact_mean(spec, int(n), chain) for n in grid])


def _op_norms(M: np.ndarray) -> np.ndarray:
    return np.linalg.norm(M, ord=2, axis=(-2, -1))


def _component(spectrum: Spectrum, lam) -> SpectralComponent:
    comp = spectrum.component(lam)
    if abs(comp.lam - lam) > max(spectrum.tol, 1e-9 * (1 + abs(lam))):
        raise ValueError(f"{lam} is not an eigenvalue of A")
    return comp


def projected_product_norm(spectrum: Spectrum, spec, lam, i: int, j: int) -> float:
    """Operator 2-norm of ``P_lam F_{i,j}``."""
    if not 1 <= i <= j:
        raise ValueError("need 1 <= i <= j")
    P = _component(spectrum, lam).P
    return float(np.linalg.norm(P @ _chain(spec).product(i, j), 2))


def lsoff_sum(spectrum: Spectrum, spec, lam, n: int) -> float:
    """``sum_{i=1}^n ||P_lam F_{i,n}||^2`` in O(n) small matrix products."""
    if n < 2:
        raise ValueError("n must be at least 2")
    P = _component(spectrum, lam).P
    Fs = _chain(spec).backward_products(n, start=1)
    return float(np.sum(_op_norms(P @ Fs) ** 2))


def lsoff_case(lam, b: float, nu: int, tol: float = 1e-9):
    """Growth shape of the projected square sum: ``(power of n, power of log n)``."""
    g = complex(lam).real / b
    if abs(g - 0.5) <= tol:
        return 1.0, 1 + 2 * nu
    if g < 0.5:
        return 1.0, 0
    return 2 * g, 2 * nu


def fit_loglog_slope(x, y, log_power: float = 0.0):
    """Least-squares slope of ``log y - log_power * log log x`` on ``log x``.

    Returns ``(slope, intercept, stderr)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lx = np.log(x)
    ly = np.log(y) - log_power * np.log(lx)
    X = np.column_stack([lx, np.ones_like(lx)])
    coef, res, *_ = np.linalg.lstsq(X, ly, rcond=None)
    dof = max(1, len(x) - 2)
    resid = ly - X @ coef
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return float(coef[0]), float(coef[1]), float(math.sqrt(cov[0, 0]))


@dataclass
class BoundVerdict:
    lam: complex
    exponent_theoretical: float
    log_power_theoretical: int
    exponent_fitted: float
    constant_estimate: float
    constant_spread: float
    passed: bool
    tolerance: float = 0.05

    @property
    def pass_(self) -> bool:
        return self.passed


def default_lsof_grid(chain: ProductChain, lam, decades: float = 3.0, starts=3, points: int = 12):
    """Pairs ``(i, j)`` with ``w_i >= 2|lam|`` and ``j/i`` spanning ``decades``."""
    i0 = 1
    while chain.weight(i0) < 2 * abs(lam):
        i0 += 1
    i_vals = [i0 * 4**s for s in range(starts)]
    ratios = np.unique(np.round(np.logspace(0, decades, points)).astype(int))
    return [(i, i * int(r)) for i in i_vals for r in ratios]


def verify_lsof(spectrum: Spectrum, spec, lam, grid=None, *, tolerance: float = 0.05,
                include_log_power: bool = True, max_spread: float = 10.0) -> BoundVerdict:
    """Fit ``log ||P F_{i,j}||`` against ``(Re lam / b) log r``.

    The model is ``slope * log r + nu * log(1 + log r) + const`` with the
    log power fixed at ``nu`` (or 0 with ``include_log_power=False``).
    The ratio is taken in weight time, ``r = w_j / w_i``. It differs from
    ``j/i`` by a bounded factor, but for small ``i`` the plain index ratio
    bends the fitted slope away from its limit. Passes when the fitted
    slope is at most the theoretical one plus ``tolerance`` and the
    implied constant varies by at most ``max_spread`` over the grid.
    """
    chain = _chain(spec)
    comp = _component(spectrum, lam)
    if grid is None:
        grid = default_lsof_grid(chain, lam)
    grid = [(int(i), int(j)) for i, j in grid]
    if min(i for i, _ in grid) < 1:
        raise ValueError("grid indices must start at 1")
    ratios = np.array([chain.weight(j) / chain.weight(i) for i, j in grid], dtype=float)
    if ratios.max() / ratios.min() < 100:
        raise ValueError("degenerate grid: j/i must span at least two decades")
    norms = np.array([float(np.linalg.norm(comp.P @ chain.product(i, j), 2)) for i, j in grid])
    if np.any(norms <= 0):
        raise ValueError("projected product vanished on the grid")
    theo = comp.lam.real / chain.b
    lp = comp.nu if include_log_power else 0
    lr = np.log(ratios)
    target = np.log(norms) - lp * np.log1p(lr)
    X = np.column_stack([lr, np.ones_like(lr)])
    coef, *_ = np.linalg.lstsq(X, target, rcond=None)
    slope = float(coef[0])
    shape = ratios**theo * (1 + lr) ** comp.nu
    c = norms / shape
    spread = float(c.max() / c.min())
    ok = slope <= theo + tolerance and spread <= max_spread
    return BoundVerdict(comp.lam, theo, comp.nu, slope, float(c.max()), spread, bool(ok), tolerance)
