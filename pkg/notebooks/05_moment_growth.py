"""Moment growth of X_n - E X_n for small, critical and large urns."""

import numpy as np

from polyaurn import corpus
from polyaurn.analysis import fit_growth, mc_central_moment, projected_moment, theorem_t2_case, theorem_t3_check
from polyaurn.mean_engine import exact_mean_series
from polyaurn.simulator import run_batch
from polyaurn.spectral import classify_urn, eigen_decompose
from polyaurn.urn_core import check_balanced, intensity_matrix

# Modest sizes so the script runs in seconds; the acceptance tests use
# R = 10^4 and n up to 2^17.
N, R = 2**14, 2000

for name in ("friedman", "critical", "large"):
    spec = corpus.load(name)
    b = check_balanced(spec).b
    sp = eigen_decompose(intensity_matrix(spec), b=b)
    cls = classify_urn(sp, b)
    batch = run_batch(spec, N, R, 42)
    ms = exact_mean_series(spec, batch.grid)  # centre at the exact mean, never the sample mean
    exp, lp = theorem_t2_case(cls)
    rep = mc_central_moment(batch, ms, 2)
    f = fit_growth(rep.n, rep.estimate, lp, n_min=128)
    print(f"{name:9s} {cls.short:16s} bound n^{exp:.2f} (log n)^{lp:g}: fitted {f.alpha_hat:.3f} +- {f.stderr:.3f}")
    if cls.kind == "large":
        pr = projected_moment(batch, sp, sp.components[1].lam, ms, 2)
        fp = fit_growth(pr.n, pr.estimate, n_min=128)
        print(f"          projection on lambda2 = {sp.components[1].lam.real:g}: fitted {fp.alpha_hat:.3f}")
    else:
        v = theorem_t3_check(rep, cls)
        print(f"          Cov / {v.normalizer} at n={v.n_pair[1]}:\n{np.round(v.normalized_cov, 4)}"
              f"\n          relative change over a decade {v.relative_change:.3f}")
# For the Friedman urn the limit covariance is (1/12) [[1, -1], [-1, 1]].
