# # Cone similarity on a pair of points
#
# Two points in the upper half-plane, their lowest common cone root, and
# how the logit changes as the points move apart.

import numpy as np

from cone_attention import HalfSpacePoint, KernelConfig, cone_logit, penumbral_height, umbral_height
from cone_attention.oracle import oracle_bruteforce_root, oracle_sup2_penumbral

u = HalfSpacePoint([0.0], 0.6)
v = HalfSpacePoint([0.3], 0.8)

# ## Closed form against the oracles

height, root = oracle_sup2_penumbral(u, v, tol=1e-12)
print("closed form   ", penumbral_height(u, v))
print("semi-analytic ", height, "root at x =", root.horizontal[0])
print("brute force   ", oracle_bruteforce_root(u, v, KernelConfig())[0])

# ## Sweeping the horizontal gap
#
# Umbral heights grow linearly with the gap once neither point contains the
# other. Penumbral heights bend towards the light source and then jump to the
# out-of-cone branch, which is continuous with it.

gaps = np.linspace(0.0, 2.5, 11)
for gap in gaps:
    w = HalfSpacePoint([gap], 0.3)
    a = HalfSpacePoint([0.0], 0.3)
    print(f"gap {gap:4.2f}  penumbral {penumbral_height(a, w):.4f}  umbral {umbral_height(a, w):.4f}")

# ## Logits
#
# The logit is minus gamma times the root height, so deeper common ancestors
# mean larger similarity.

for gamma in (0.5, 1.0, 2.0):
    cfg = KernelConfig(kind="umbral", gamma=gamma)
    print(gamma, cone_logit(u, v, cfg))
