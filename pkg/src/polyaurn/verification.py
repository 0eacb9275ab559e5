"""End-to-end verification of one urn: every check becomes a verdict line."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import analysis, mean_engine, simulator, spectral
from .rng import StreamKey
from .urn_core import UrnSpec, check_balanced, intensity_matrix, require_balanced, static_tenability_check

__all__ = ["Verdict", "UrnAnalysis", "analyse_urn", "verify_urn", "bound_rows", "is_irreducible", "fit_window"]

EXPONENT_TOL = 0.05
IDENTITY_TOL = 1e-8


@dataclass
class Verdict:
    name: str
    status: str  # PASS | FAIL | INFO
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == "FAIL"

    def line(self) -> str:
        return f"{self.status} {self.name}: {self.detail}"


def _verdict(name, ok, detail) -> Verdict:
    return Verdict(name, "PASS" if ok else "FAIL", detail)


def is_irreducible(A) -> bool:
    """Whether the colour graph of ``A`` (edge j -> i when ``A[i, j] != 0``) is strongly connected."""
    G = (np.abs(np.asarray(A)) > 0).astype(int)
    n, _ = connected_components(G, directed=True, connection="strong")
    return n == 1


def fit_window(grid, fit_min: int | None = None):
    """Default lower end of the growth fit: 128, or n_max/100 for short runs."""
    nmax = int(np.max(grid))
    if fit_min is not None:
        return int(fit_min)
    return 128 if nmax >= 128 * 100 else max(1, nmax // 100)


@dataclass
class UrnAnalysis:
    """Everything computed for one urn, shared between CLI sections."""

    spec: UrnSpec
    A: np.ndarray
    b: float
    chain: mean_engine.ProductChain
    spectrum: spectral.Spectrum
    classification: spectral.UrnClassification
    batch: simulator.Batch | None = None
    mean_series: np.ndarray | None = None
    reports: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)


def analyse_urn(spec: UrnSpec, *, n_max: int, replicates: int, seed: int, ps=(2,),
                checkpoint_ratio: float = 2.0, workers: int = 1, fit_min=None,
                simulate: bool = True) -> UrnAnalysis:
    b = require_balanced(spec)
    A = intensity_matrix(spec)
    chain = mean_engine.ProductChain.from_spec(spec)
    spec_ = spectral.eigen_decompose(A, b=b)
    cls = spectral.classify_urn(spec_, b)
    ua = UrnAnalysis(spec, A, b, chain, spec_, cls)
    if not simulate:
        return ua
    batch = simulator.run_batch(spec, n_max, replicates, seed, checkpoint_ratio=checkpoint_ratio,
                                workers=workers)
    ua.batch = batch
    ua.mean_series = mean_engine.exact_mean_series(spec, batch.grid, chain)
    exp, lp = analysis.theorem_t2_case(cls)
    lo = fit_window(batch.grid, fit_min)
    for p in ps:
        rep = analysis.mc_central_moment(batch, ua.mean_series, p, seed=seed)
        ua.reports[p] = rep
        try:
            ua.fits[p] = analysis.fit_growth(rep.n, rep.estimate, lp, n_min=lo)
        except ValueError:
            ua.fits[p] = None
    return ua


def verify_urn(spec: UrnSpec, *, n_max: int, replicates: int, seed: int, ps=(2,),
               checkpoint_ratio: float = 2.0, workers: int = 1, fit_min=None,
               ua: UrnAnalysis | None = None, burkholder_n: int = 256,
               exponent_tol: float = EXPONENT_TOL) -> list:
    """Run every check and return the verdicts in a fixed order."""
    out = []
    cert = check_balanced(spec)
    out.append(_verdict("balance", cert.balanced, str(cert)))
    out.append(Verdict("tenability", "INFO", static_tenability_check(spec).replace("_", " ")))
    if not cert.balanced:
        return out
    if ua is None:
        ua = analyse_urn(spec, n_max=n_max, replicates=replicates, seed=seed, ps=ps,
                         checkpoint_ratio=checkpoint_ratio, workers=workers, fit_min=fit_min)
    A, b, sp, cls, chain = ua.A, ua.b, ua.spectrum, ua.classification, ua.chain
    scale = 1.0 + float(np.linalg.norm(A, 2))
    irreducible = is_irreducible(A)

    res = spectral.verify_spectral_identities(sp, A)
    worst = max(res.values())
    detail = f"max residual {worst:.2e} (bound {IDENTITY_TOL * scale:.2e})"
    ok = worst <= IDENTITY_TOL * scale
    lam1 = sp.components[0]
    if lam1.alg_mult == 1:
        pair = spectral.principal_pair(A, spec.a, b, sp)
        r1 = float(np.max(np.abs(lam1.P - np.outer(pair.v1, spec.a))))
        ok = ok and r1 <= IDENTITY_TOL * scale
        detail += f"; |P_lambda1 - v1 a'| = {r1:.2e}"
    out.append(_verdict("spectral-identities", ok, detail))

    bad = [c for c in sp.components if c.lam.real > b + sp.tol or (abs(c.lam.real - b) <= sp.tol and c.nu > 0)]
    out.append(_verdict("leading-eigenvalue", not bad and abs(sp.ordered_eigenvalues[0] - b) <= sp.tol,
                        f"lambda1 = {_c(sp.ordered_eigenvalues[0])}, b = {_g(b)}, "
                        f"classification {cls.kind} (ratio {cls.ratio:.6g}, nu2 = {cls.nu2})"))

    # pathwise decomposition on one recorded path
    n_path = min(n_max, 1000)
    traj = simulator.run_path(spec, n_path, StreamKey(seed, 0), record_increments=True)
    if traj.tenability_ok:
        r = simulator.martingale_residual(traj, chain)
        out.append(_verdict("decomposition-identity", r <= IDENTITY_TOL, f"n = {n_path}, relative residual {r:.2e}"))
    else:
        out.append(Verdict("decomposition-identity", "FAIL", f"tenability violated at step {traj.failed_at}"))

    batch, ms = ua.batch, ua.mean_series
    if not np.all(batch.ok):
        out.append(Verdict("tenability-runtime", "FAIL", f"{int(np.sum(~batch.ok))} replicates violated tenability"))
        return out
    out.append(Verdict("tenability-runtime", "PASS", f"{len(batch)} replicates, no violation"))
    dev = batch.states - ms[None]
    w = chain.weight(batch.grid.astype(float))
    t0 = float(np.max(np.abs(dev @ spec.a) / w[None, :]))
    detail = f"max |a.(X_n - E X_n)| / w_n = {t0:.2e}"
    ok = t0 <= IDENTITY_TOL
    if lam1.alg_mult == 1:
        proj = np.einsum("ij,rkj->rki", lam1.P, dev)
        t0p = float(np.max(np.linalg.norm(proj, axis=-1) / w[None, :]))
        ok = ok and t0p <= IDENTITY_TOL
        detail += f"; max |P_lambda1 (X_n - E X_n)| / w_n = {t0p:.2e}"
    out.append(_verdict("theorem-T0", ok, detail))

    for c in sp.components:
        try:
            v = mean_engine.verify_lsof(sp, chain, c.lam, tolerance=exponent_tol)
        except ValueError as exc:
            out.append(Verdict(f"lemma-Lsof[{_c(c.lam)}]", "INFO", str(exc)))
            continue
        out.append(_verdict(f"lemma-Lsof[{_c(c.lam)}]", v.passed,
                            f"fitted {v.exponent_fitted:.4f} vs {v.exponent_theoretical:.4f} (+{exponent_tol:g}), "
                            f"nu = {v.log_power_theoretical}, C ~ {v.constant_estimate:.4g}, spread {v.constant_spread:.3g}"))

    # fit high enough that the n^{2g-1} correction of the large case is small
    ns = 2 ** np.arange(9, 17)
    for c in sp.components:
        sums = np.array([mean_engine.lsoff_sum(sp, chain, c.lam, int(n)) for n in ns])
        e, lp = mean_engine.lsoff_case(c.lam, b, c.nu)
        if np.all(sums > 0):
            s, _, _ = mean_engine.fit_loglog_slope(ns, sums, lp)
            out.append(_verdict(f"lemma-Lsoff[{_c(c.lam)}]", s <= e + exponent_tol,
                                f"slope {s:.4f} vs bound {e:.4f} (log power {lp}), n = 2^9..2^16"))
        else:
            out.append(Verdict(f"lemma-Lsoff[{_c(c.lam)}]", "PASS", "projected products vanish"))

    exp, lp = analysis.theorem_t2_case(cls)
    lo = fit_window(batch.grid, fit_min)
    for p in ps:
        f = ua.fits.get(p)
        if f is None:
            out.append(Verdict(f"theorem-T2[p={_g(p)}]", "INFO", "grid too short for a growth fit"))
            continue
        out.append(_verdict(f"theorem-T2[p={_g(p)}]", f.alpha_hat <= exp + exponent_tol,
                            f"fitted {f.alpha_hat:.4f} +- {f.stderr:.4f} vs {exp:.4f} (log power {lp:g}), "
                            f"n in [{f.window[0]}, {f.window[1]}]"))

    for c in sp.components:
        name = f"theorem-T1[{_c(c.lam)}, p=2]"
        rep = analysis.projected_moment(batch, sp, c.lam, ms, 2, seed=seed)
        if c is lam1 and c.alg_mult == 1:
            m = float(np.max(rep.estimate / w))
            out.append(_verdict(name, m <= IDENTITY_TOL, f"simple lambda1: max series / w_n = {m:.2e}"))
            continue
        ce, clp = analysis.lambda_case(c.lam, b, c.nu)
        if np.all(rep.estimate[batch.grid >= lo] > 0):
            try:
                f = analysis.fit_growth(rep.n, rep.estimate, clp, n_min=lo)
            except ValueError as exc:
                out.append(Verdict(name, "INFO", str(exc)))
                continue
            out.append(_verdict(name, f.alpha_hat <= ce + exponent_tol,
                                f"fitted {f.alpha_hat:.4f} +- {f.stderr:.4f} vs {ce:.4f} (log power {clp:g})"))
        else:
            out.append(Verdict(name, "PASS", "projection vanishes on the fit window"))

    if cls.kind in ("small_strict", "critical"):
        rep = ua.reports.get(2) or analysis.mc_central_moment(batch, ms, 2, seed=seed)
        v = analysis.theorem_t3_check(rep, cls)
        detail = (f"Cov/({v.normalizer}) relative change {v.relative_change:.4f} between n = {v.n_pair[0]} "
                  f"and {v.n_pair[1]}")
        if irreducible:
            out.append(_verdict("theorem-T3", v.passed, detail))
        else:
            out.append(Verdict("theorem-T3", "INFO", detail + " (reducible urn: limit law not assumed)"))
    else:
        out.append(Verdict("theorem-T3", "INFO", f"not applicable to a {cls.kind} urn"))

    nb = min(burkholder_n, n_max)
    rb = min(replicates, 10_000)
    if rb >= analysis.MIN_REPLICATES:
        D, Y, wsum = analysis.urn_martingale_differences(spec, nb, rb, seed + 1, workers=workers)
        for p in ps:
            v = analysis.burkholder_check(D, p, Y=Y, weight_sq_sum=wsum, seed=seed)
            out.append(_verdict(f"burkholder[p={_g(p)}]", v.passed,
                                f"||X_n||_p = {v.x_norm:.4f} <= (p-1) ||S_n||_p = {(p - 1) * v.s_norm:.4f} "
                                f"(+4 SE, SE {v.diff_se:.2g}); empirical C_p = {v.constant:.4f}"))
    return out


def bound_rows(spec: UrnSpec, *, exponent_tol: float = EXPONENT_TOL):
    """Per-eigenvalue product-norm verdicts.

    Yields ``(component, BoundVerdict or None, lsoff slope, lsoff bound, lsoff log power)``.
    """
    b = require_balanced(spec)
    A = intensity_matrix(spec)
    chain = mean_engine.ProductChain.from_spec(spec)
    sp = spectral.eigen_decompose(A, b=b)
    ns = 2 ** np.arange(9, 17)
    for c in sp.components:
        try:
            v = mean_engine.verify_lsof(sp, chain, c.lam, tolerance=exponent_tol)
        except ValueError:
            v = None
        sums = np.array([mean_engine.lsoff_sum(sp, chain, c.lam, int(n)) for n in ns])
        e, lp = mean_engine.lsoff_case(c.lam, b, c.nu)
        slope = mean_engine.fit_loglog_slope(ns, sums, lp)[0] if np.all(sums > 0) else None
        yield c, v, slope, e, lp


def _g(x) -> str:
    return f"{float(x):g}"


def _c(z) -> str:
    z = complex(z)
    if abs(z.imag) < 1e-12 * max(1.0, abs(z)):
        return f"{z.real:.6g}"
    return f"{z.real:.6g}{z.imag:+.6g}i"
