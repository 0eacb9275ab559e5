"""Exact laws by enumeration, and Monte Carlo checked against them."""

import numpy as np

from polyaurn import corpus
from polyaurn.analysis import exact_central_moment, exact_distribution, mc_central_moment
from polyaurn.mean_engine import exact_mean, exact_mean_series
from polyaurn.simulator import run_batch

polya = corpus.load("polya")
d = exact_distribution(polya, 2)
print("classical urn after 2 draws, white count:", d.marginal(0))

# White count is uniform on {1, ..., n+1}, so its variance is (n^2 + 2n)/12.
for n in (3, 7, 12):
    cm = exact_central_moment(exact_distribution(polya, n), exact_mean(polya, n))
    print(f"n={n:2d}: Var = {cm.variance[0]}  ((n^2+2n)/12 = {(n * n + 2 * n) / 12:.4f})")

# Monte Carlo with bootstrap errors against the exact p-norms.
batch = run_batch(polya, 12, 100_000, 1, grid=[12])
ms = exact_mean_series(polya, batch.grid)
exact = exact_distribution(polya, 12)
for p in (2, 3, 4):
    rep = mc_central_moment(batch, ms, p)
    e = exact_central_moment(exact, p=p).norm
    print(f"p={p}: MC {rep.estimate[0]:.4f} +- {rep.stderr[0]:.4f}, exact {e:.4f}")

# Any integer urn works, including random replacements and removals.
tri = exact_distribution(corpus.load("three_colour"), 6)
print("\nthree-colour urn, 6 draws:", len(tri.support), "states, total probability", tri.total_probability())
