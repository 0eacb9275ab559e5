"""Eigenstructure of the intensity matrix and the small/critical/large split."""

import numpy as np

from polyaurn import corpus
from polyaurn.spectral import (
    classify_urn,
    eigen_decompose,
    eigen_decompose_exact,
    principal_pair,
    verify_spectral_identities,
)
from polyaurn.urn_core import check_balanced, intensity_matrix

for name in ("friedman", "critical", "large", "triangular", "three_colour"):
    spec = corpus.load(name)
    b = check_balanced(spec).b
    A = intensity_matrix(spec)
    sp = eigen_decompose(A, b=b)
    cls = classify_urn(sp, b)
    lams = ", ".join(f"{c.lam.real:.4g}" for c in sp.components)
    print(f"{name:13s} b={b:g}  eigenvalues {lams:22s} -> {cls.short} (ratio {cls.ratio:.3f})")

# Projections sum to the identity and reproduce A together with the nilpotent parts.
A = intensity_matrix(corpus.load("three_colour"))
sp = eigen_decompose(A)
print("\nidentity residuals:", {k: f"{v:.1e}" for k, v in verify_spectral_identities(sp, A).items()})

# The leading projection is v1 a' with a.v1 = 1.
spec = corpus.load("random_replacement")
pair = principal_pair(intensity_matrix(spec), spec.a, 2)
print("right eigenvector for lambda1:", pair.v1)

# Jordan blocks are found even when hidden by a change of basis.
S = np.array([[1.0, 2.0], [3.0, 7.0]])
hidden = S @ np.array([[2.0, 1.0], [0.0, 2.0]]) @ np.linalg.inv(S)
c = eigen_decompose(hidden).components[0]
print(f"\nhidden Jordan block: lambda={c.lam.real:.6f}, multiplicity {c.alg_mult}, nu={c.nu}")

# Integer matrices can be cross-checked in exact arithmetic.
ex = eigen_decompose_exact(np.array([[2, 1], [0, 2]]))
print("exact path:", [(c.lam, c.nu) for c in ex.components])
