"""Central moments of the urn: exact enumeration, Monte Carlo, growth fits.

Monte Carlo estimates are always centred at the exact mean ``F_{0,n} X_0``
rather than the sample mean, and standard errors come from a
nonparametric bootstrap over replicates.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .mean_engine import ProductChain, exact_mean, exact_mean_series, fit_loglog_slope
from .rng import spawn_generator
from .simulator import Batch, TenabilityError, run_batch
from .spectral import Spectrum, UrnClassification
from .urn_core import UrnSpec, rational_data, require_balanced

__all__ = [
    "ExactDistribution",
    "CentralMoment",
    "MomentReport",
    "GrowthFit",
    "T3Verdict",
    "BurkholderVerdict",
    "exact_distribution",
    "exact_central_moment",
    "mc_central_moment",
    "projected_moment",
    "fit_growth",
    "theorem_t2_case",
    "theorem_t3_check",
    "burkholder_check",
    "coin_flip_differences",
    "urn_martingale_differences",
]

STATE_CAP = 10**6
MIN_REPLICATES = 100
N_BOOT = 200


class StateSpaceError(RuntimeError):
    """Too many reachable states for exact enumeration."""


@dataclass
class ExactDistribution:
    n: int
    support: dict  # state tuple -> probability
    exact: bool = True

    def total_probability(self):
        return sum(self.support.values(), Fraction(0) if self.exact else 0.0)

    def mean(self) -> list:
        q = len(next(iter(self.support)))
        zero = Fraction(0) if self.exact else 0.0
        m = [zero] * q
        for x, p in self.support.items():
            for i in range(q):
                m[i] += p * x[i]
        return m

    def marginal(self, i: int) -> dict:
        out = defaultdict(Fraction if self.exact else float)
        for x, p in self.support.items():
            out[x[i]] += p
        return dict(sorted(out.items()))


def exact_distribution(spec: UrnSpec, n: int, *, cap: int = STATE_CAP, exact: bool = True) -> ExactDistribution:
    """Law of ``X_n`` by forward enumeration of reachable states.

    Requires integer initial state and replacement atoms. With
    ``exact=True`` probabilities are :class:`fractions.Fraction`.

    Raises
    ------
    StateSpaceError
        If more than ``cap`` states are reachable at some step.
    TenabilityError
        If a reachable state has a negative count or no activity.
    """
    if not spec.is_integer_valued():
        raise ValueError("exact enumeration needs integer initial state and atoms")
    a, x0, atoms = rational_data(spec)
    if not exact:
        a = [float(v) for v in a]
        atoms = [[(float(p), v) for p, v in col] for col in atoms]
    q = spec.q
    dist = {tuple(x0): Fraction(1) if exact else 1.0}
    for step in range(n):
        new = defaultdict(Fraction if exact else float)
        for x, px in dist.items():
            w = sum(a[j] * x[j] for j in range(q))
            if not w > 0:
                raise TenabilityError(f"zero total activity at step {step} in state {x}")
            for j in range(q):
                if a[j] == 0 or x[j] == 0:
                    continue
                pj = px * a[j] * x[j] / w
                for pa, v in atoms[j]:
                    y = tuple(x[i] + v[i] for i in range(q))
                    if min(y) < 0:
                        raise TenabilityError(f"negative count reachable at step {step + 1}: {y}")
                    new[y] += pj * pa
        if len(new) > cap:
            raise StateSpaceError(f"{len(new)} states at step {step + 1} exceed cap {cap}")
        dist = dict(new)
    return ExactDistribution(n, dist, exact)


@dataclass
class CentralMoment:
    p: float
    norm: float  # (E|X - EX|^p)^(1/p), Euclidean |.|
    pth_moment: object  # exact Fraction for even integer p
    variance: list  # componentwise
    mean: list


def exact_central_moment(dist: ExactDistribution, mean=None, p: float = 2) -> CentralMoment:
    """``(sum prob |X - E X_n|^p)^(1/p)`` plus componentwise variances.

    If ``mean`` is given (normally the product-formula mean) it must agree
    with the mean of ``dist`` to 1e-10 relative.
    """
    m = dist.mean()
    if mean is not None:
        mean = np.asarray(mean, dtype=float)
        mf = np.array([float(v) for v in m])
        if np.max(np.abs(mf - mean)) > 1e-10 * max(1.0, float(np.max(np.abs(mean)))):
            raise ArithmeticError(f"enumerated mean {mf} differs from exact mean {mean}")
    q = len(m)
    even = float(p).is_integer() and int(p) % 2 == 0
    zero = Fraction(0) if dist.exact else 0.0
    var = [zero] * q
    acc = zero if even else 0.0
    for x, px in dist.support.items():
        d = [x[i] - m[i] for i in range(q)]
        sq = sum(di * di for di in d)
        for i in range(q):
            var[i] += px * d[i] * d[i]
        if even:
            acc += px * sq ** (int(p) // 2)
        else:
            acc += float(px) * float(sq) ** (p / 2)
    norm = float(acc) ** (1.0 / p)
    return CentralMoment(p, norm, acc, var, m)


@dataclass
class MomentReport:
    p: float
    n: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    covariance: np.ndarray  # (K, q, q), centred at the exact mean
    covariance_stderr: np.ndarray
    replicates: int
    lam: complex | None = None
    reference_sigma: np.ndarray | None = None

    def rows(self):
        return list(zip(self.n.tolist(), self.estimate.tolist(), self.stderr.tolist()))


def _bootstrap_weights(R: int, n_boot: int, seed: int, chunk: int = 25):
    rng = spawn_generator(seed, 0xB007)
    probs = np.full(R, 1.0 / R)
    done = 0
    while done < n_boot:
        m = min(chunk, n_boot - done)
        yield rng.multinomial(R, probs, size=m).astype(float) / R
        done += m


def _centred(batch: Batch, mean_series) -> np.ndarray:
    mean_series = np.asarray(mean_series)
    if mean_series.shape != batch.states.shape[1:]:
        raise ValueError("mean series does not match the batch checkpoints")
    ok = batch.ok
    if not np.all(ok):
        raise TenabilityError(f"{int(np.sum(~ok))} replicates violated tenability")
    return batch.states - mean_series[None]


def mc_central_moment(batch: Batch, mean_series, p: float = 2, *, projector=None,
                      n_boot: int = N_BOOT, seed: int | None = None) -> MomentReport:
    """``(mean_r |X_n - E X_n|^p)^(1/p)`` at each checkpoint, with bootstrap SEs.

    ``projector`` (a q x q matrix) is applied to the centred states first;
    the modulus of the complex result is used.

    Raises
    ------
    ValueError
        With fewer than 100 replicates.
    """
    R = len(batch)
    if R < MIN_REPLICATES:
        raise ValueError(f"need at least {MIN_REPLICATES} replicates, got {R}")
    D = _centred(batch, mean_series)
    cov = np.einsum("rki,rkj->rkij", D, D)
    if projector is not None:
        D = np.einsum("ij,rkj->rki", np.asarray(projector), D)
    mag = np.sqrt(np.sum(np.abs(D) ** 2, axis=-1)) ** p  # (R, K)
    est = np.mean(mag, axis=0) ** (1.0 / p)
    cov_mean = cov.mean(axis=0)
    seed = batch.master_seed if seed is None else seed
    boots = []
    cboots = []
    flat_cov = cov.reshape(R, -1)
    for W in _bootstrap_weights(R, n_boot, seed):
        boots.append((W @ mag) ** (1.0 / p))
        cboots.append(W @ flat_cov)
    boots = np.vstack(boots)
    cboots = np.vstack(cboots)
    K, q = D.shape[1], batch.states.shape[2]
    return MomentReport(
        p=p,
        n=np.asarray(batch.grid),
        estimate=est,
        stderr=boots.std(axis=0, ddof=1),
        covariance=cov_mean,
        covariance_stderr=cboots.std(axis=0, ddof=1).reshape(K, q, q),
        replicates=R,
    )


def projected_moment(batch: Batch, spectrum: Spectrum, lam, mean_series, p: float = 2, **kw) -> MomentReport:
    """Same estimator applied to ``P_lam (X_n - E X_n)``."""
    comp = spectrum.component(lam)
    rep = mc_central_moment(batch, mean_series, p, projector=comp.P, **kw)
    rep.lam = comp.lam
    return rep


@dataclass
class GrowthFit:
    alpha_hat: float
    beta_fixed: float
    stderr: float
    window: tuple
    intercept: float = 0.0
    points: int = 0


def fit_growth(n, m, beta_fixed: float = 0.0, *, n_min=None, n_max=None) -> GrowthFit:
    """Fit ``log m_n = alpha log n + beta_fixed log log n + c``.

    Raises
    ------
    ValueError
        Fewer than 5 points or less than two decades in the window, or a
        nonpositive series value.
    """
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    sel = np.ones(n.shape, dtype=bool)
    if n_min is not None:
        sel &= n >= n_min
    if n_max is not None:
        sel &= n <= n_max
    n, m = n[sel], m[sel]
    if len(n) < 5 or n.max() / n.min() < 100:
        raise ValueError("degenerate grid: need at least 5 points spanning two decades")
    if np.any(m <= 0) or np.any(n <= 1):
        raise ValueError("series values and n must be positive (n > 1)")
    slope, icpt, se = fit_loglog_slope(n, m, beta_fixed)
    return GrowthFit(slope, beta_fixed, se, (int(n.min()), int(n.max())), icpt, len(n))


def theorem_t2_case(classification: UrnClassification, p: float = 2):
    """``(power of n, power of log n)`` in the moment bound for ``||X_n - E X_n||_p``."""
    if classification.kind == "small_strict":
        return 0.5, 0.0
    if classification.kind == "critical":
        return 0.5, classification.nu2 + 0.5
    return float(classification.ratio), float(classification.nu2)


def lambda_case(lam, b: float, nu: int, tol: float = 1e-9):
    """Bound shape for ``||P_lam (X_n - E X_n)||_p``."""
    g = complex(lam).real / b
    if abs(g - 0.5) <= tol:
        return 0.5, nu + 0.5
    if g < 0.5:
        return 0.5, 0.0
    return g, float(nu)


@dataclass
class T3Verdict:
    passed: bool
    normalizer: str
    relative_change: float
    normalized_cov: np.ndarray
    n_pair: tuple
    sigma_agrees: bool | None = None
    max_sigma_z: float | None = None


def theorem_t3_check(report: MomentReport, classification: UrnClassification, *,
                     reference_sigma=None, rtol: float = 0.10, z: float = 3.0) -> T3Verdict:
    """Check that the normalized covariance settles down.

    Compares ``Cov[X_n] / norm(n)`` at the last checkpoint with the
    checkpoint closest to one decade earlier; ``norm(n) = n`` for small
    urns and ``n (log n)^(2 nu2 + 1)`` in the critical case.
    """
    if classification.kind == "small_strict":
        def norm(n):
            return n
        label = "n"
    elif classification.kind == "critical":
        k = 2 * classification.nu2 + 1

        def norm(n):
            return n * math.log(n) ** k
        label = f"n (log n)^{k}"
    else:
        raise ValueError(f"covariance normalization undefined for a {classification.kind} urn "
                         "(large/degenerate classification)")
    ns = np.asarray(report.n, dtype=float)
    last = len(ns) - 1
    earlier = int(np.argmin(np.abs(np.log(ns) - (np.log(ns[last]) - math.log(10)))))
    a = report.covariance[last] / norm(ns[last])
    b = report.covariance[earlier] / norm(ns[earlier])
    rel = float(np.linalg.norm(a - b) / np.linalg.norm(a))
    passed = rel <= rtol
    agrees = zmax = None
    sigma = reference_sigma if reference_sigma is not None else report.reference_sigma
    if sigma is not None:
        se = report.covariance_stderr[last] / norm(ns[last])
        diff = np.abs(a - np.asarray(sigma))
        zs = np.where(se > 0, diff / np.where(se > 0, se, 1), np.where(diff > 0, np.inf, 0))
        zmax = float(np.max(zs))
        agrees = zmax <= z
        passed = passed and agrees
    return T3Verdict(passed, label, rel, a, (int(ns[earlier]), int(ns[last])), agrees, zmax)


@dataclass
class BurkholderVerdict:
    p: float
    x_norm: float
    s_norm: float
    x_se: float
    s_se: float
    diff_se: float
    passed: bool
    constant: float = field(default=None)  # empirical C_p of the weighted-sum bound
    weights_l2: float | None = None
    y_sup: float | None = None

    @property
    def ratio(self) -> float:
        return self.x_norm / self.s_norm


def burkholder_check(differences, p: float = 2, *, Y=None, weight_sq_sum: float | None = None,
                     n_boot: int = N_BOOT, seed: int = 0, z: float = 4.0) -> BurkholderVerdict:
    """Compare ``||X_n||_p`` with ``(p - 1) ||S_n(X)||_p`` by Monte Carlo.

    Parameters
    ----------
    differences : (R, n, q) array
        Martingale differences ``A_i Y_i`` for ``R`` independent paths.
    Y : (R, n, q) array, optional
        Unweighted differences; with ``weight_sq_sum = sum ||A_i||^2`` this
        gives the empirical constant in
        ``||sum A_i Y_i||_p <= C (sum ||A_i||^2)^(1/2) sup_i ||Y_i||_p``.
    """
    D = np.asarray(differences)
    if D.ndim == 2:
        D = D[:, :, None]
    R = D.shape[0]
    xp = np.sqrt(np.sum(np.abs(D.sum(axis=1)) ** 2, axis=-1)) ** p
    sp = np.sum(np.abs(D) ** 2, axis=(1, 2)) ** (p / 2)
    x_norm = float(np.mean(xp) ** (1 / p))
    s_norm = float(np.mean(sp) ** (1 / p))
    bx, bs = [], []
    for W in _bootstrap_weights(R, n_boot, seed):
        bx.append((W @ xp) ** (1 / p))
        bs.append((W @ sp) ** (1 / p))
    bx = np.concatenate(bx)
    bs = np.concatenate(bs)
    diff_se = float(np.std(bx - (p - 1) * bs, ddof=1))
    passed = x_norm <= (p - 1) * s_norm + z * diff_se
    const = wl2 = ysup = None
    if Y is not None and weight_sq_sum is not None:
        Y = np.asarray(Y)
        ysup = float(np.max(np.mean(np.sum(np.abs(Y) ** 2, axis=-1) ** (p / 2), axis=0)) ** (1 / p))
        wl2 = math.sqrt(weight_sq_sum)
        const = x_norm / (wl2 * ysup)
    return BurkholderVerdict(p, x_norm, s_norm, float(np.std(bx, ddof=1)), float(np.std(bs, ddof=1)),
                             diff_se, bool(passed), const, wl2, ysup)


def coin_flip_differences(n: int, replicates: int, seed: int) -> np.ndarray:
    """Independent fair +-1 steps, shape ``(replicates, n, 1)``."""
    rng = spawn_generator(seed, 0xC017)
    return (2.0 * rng.integers(0, 2, size=(replicates, n, 1)) - 1.0)


def urn_martingale_differences(spec: UrnSpec, n: int, replicates: int, seed: int, *, workers: int = 1):
    """Weighted urn increments ``A_i Y_i`` for ``i = 1..n``.

    ``A_i = F_{i,n} (I - P_lambda1) / s`` when ``lambda1`` is simple (the
    projection annihilates every ``Y_i``, so the sum is
    ``(X_n - E X_n) / s``), and ``F_{i,n} / s`` otherwise; ``s`` makes
    ``sum ||A_i||^2 = 1``.

    Returns ``(differences, Y, weight_sq_sum)``.
    """
    from .spectral import eigen_decompose

    b = require_balanced(spec)
    batch = run_batch(spec, n, replicates, seed, record_increments=True, grid=[n], workers=workers)
    Y = batch.increments()
    chain = ProductChain.from_spec(spec)
    F = chain.backward_products(n, start=1)  # F_{i,n}, i = 1..n
    sp = eigen_decompose(chain.A, b=b)
    lead = sp.components[0]
    if lead.alg_mult == 1:
        F = F @ (np.eye(spec.q) - lead.P)
    norms2 = np.linalg.norm(F, ord=2, axis=(1, 2)) ** 2
    scale = math.sqrt(float(norms2.sum()))
    weights = F / scale
    D = np.einsum("iab,rib->ria", weights, Y)
    if not np.iscomplexobj(Y):
        D = D.real
    return D, Y, float(np.sum(norms2) / scale**2)
