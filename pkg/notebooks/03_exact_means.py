"""Exact means from matrix products, and how the projected products grow."""

import numpy as np

from polyaurn import corpus
from polyaurn.mean_engine import (
    ProductChain,
    exact_mean,
    fit_loglog_slope,
    lsoff_case,
    lsoff_sum,
    verify_lsof,
)
from polyaurn.spectral import eigen_decompose
from polyaurn.urn_core import UrnSpec, intensity_matrix

# E X_n = F_{0,n} X_0 with F a product of (I + A/w_k).
spec = UrnSpec.deterministic((1, 1), [(0, 1), (1, 0)], (2, 1))
print("Friedman urn from (2, 1): E X_2 =", exact_mean(spec, 2), "(exact 11/4, 9/4)")
for n in (10, 100, 1000):
    print(f"  E X_{n} = {exact_mean(spec, n)}")

# Projected products decay or grow like (w_j/w_i)^(Re lambda / b).
large = corpus.load("large")
sp = eigen_decompose(intensity_matrix(large))
for c in sp.components:
    v = verify_lsof(sp, large, c.lam)
    print(f"\nlarge urn, lambda={c.lam.real:g}: fitted {v.exponent_fitted:.4f} "
          f"vs {v.exponent_theoretical:.4f}, constant ~ {v.constant_estimate:.3f}, pass={v.passed}")

# Square sums of the projected products over i <= n.
ns = 2 ** np.arange(7, 15)
for name, lam in (("friedman", -1), ("critical", 2), ("large", 3)):
    urn = corpus.load(name)
    chain = ProductChain.from_spec(urn)
    spn = eigen_decompose(intensity_matrix(urn))
    c = spn.component(lam)
    e, lp = lsoff_case(c.lam, chain.b, c.nu)
    sums = [lsoff_sum(spn, chain, lam, int(n)) for n in ns]
    s = fit_loglog_slope(ns, sums, lp)[0]
    print(f"{name:9s} lambda={lam:2d}: square-sum slope {s:.4f} (shape n^{e:g} log^{lp} n)")
# The large urn approaches its rate from above: the next term is smaller by
# only n^(-0.2), so the local slope is still visibly above 1.2 at n = 2^14.
