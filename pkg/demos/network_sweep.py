"""
Predicting the frequency with a small ReLU network
==================================================

Train the smallest network reaching a sup-norm target on one parameter
function and compare reconstruction errors under predicted and exact
frequencies.
"""

from hpsplinet.harness import SweepConfig, run_table1
from hpsplinet.net import MlpSpec, complexity

# parameter count of the narrowest architectures on 32 samples
for L in (3, 4, 5):
    print(L, [complexity(MlpSpec(32, L, W)) for W in range(1, 6)])

# reduced sweep so the script finishes in under a minute
cfg = SweepConfig(n_train=300, n_val=50, n_test=50, max_width=3, max_epochs=3000)
for row in run_table1("a1", eps_list=(0.10,), depth_list=(3,), cfg=cfg):
    print(row)
    # propagation stays at the scale of the reconstruction error itself
    print("propagation / reconstruction:", row.mse_propagation / max(row.mse_rec_pred, 1e-300))
