# # Cone attention as a drop-in softmax kernel
#
# Same queries, keys and values under each kernel, then timings against the
# number of tokens.

import numpy as np

from cone_attention import AttentionBatch, KernelConfig, attend, multi_head
from cone_attention.kernels import KINDS
from cone_attention.bench import measure_throughput, scaling_exponent

rng = np.random.default_rng(1)
batch = AttentionBatch(0.3 * rng.normal(size=(6, 8)), 0.3 * rng.normal(size=(10, 8)), rng.normal(size=(10, 4)))

for kind in KINDS:
    out = attend(batch, KernelConfig(kind=kind))
    print(f"{kind:17s}", np.round(out[0], 3))

# Two heads split the feature dimensions in half.

print(multi_head(batch, KernelConfig(kind="umbral"), heads=2).shape)

# ## Scaling
#
# Every kernel costs O(n^2 d); the cone kernels pay a larger constant.

sizes = [64, 128, 256]
for kind in ("penumbral", "umbral", "dot"):
    times = [measure_throughput(n, n, 32, KernelConfig(kind=kind), repetitions=3).median_seconds for n in sizes]
    print(f"{kind:10s} slope {scaling_exponent(times, sizes):.2f}  n=256 {1e3 * times[-1]:.1f} ms")
