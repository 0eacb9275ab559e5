"""Square-function inequality for martingales built from urn increments."""

from polyaurn import corpus
from polyaurn.analysis import burkholder_check, coin_flip_differences, urn_martingale_differences

# Fair coin flips: ||X_n||_2 = ||S_n||_2 = sqrt(n), the constant 1 is attained.
coin = burkholder_check(coin_flip_differences(256, 10_000, 0), 2)
print(f"coin flips: ||X||_2 = {coin.x_norm:.3f}, ||S||_2 = {coin.s_norm:.3f}")

# Weighted urn increments F_{i,n}(I - P_lambda1) Y_i, normalized to unit square sum.
for name in ("friedman", "critical", "large"):
    D, Y, wsum = urn_martingale_differences(corpus.load(name), 256, 5000, 3)
    for p in (2, 4):
        v = burkholder_check(D, p, Y=Y, weight_sq_sum=wsum)
        # at p = 2 both sides agree in expectation, so either may come out ahead
        print(f"{name:9s} p={p}: ||X||_p = {v.x_norm:.3f} vs (p-1)||S||_p = {(p - 1) * v.s_norm:.3f}  "
              f"holds within 4 SE: {v.passed}  (empirical constant {v.constant:.3f})")
