# State growth on a 2D lattice: MDLSTM cells with open forget gates add up the
# states of both predecessors, so |s| grows like a binomial coefficient along
# the diagonal. The leaky cell mixes them with weights that sum to one.
import numpy as np

from argus_htr.cells import MDLEAKY, MDLSTM, lattice_forward, lattice_states

n = 16
# gate order is input, forget 1, forget 2, output, cell input
bias = np.tile([20.0, 20.0, 20.0, 0.0, 1.0], (4, 1))
w_in, w_rec1, w_rec2 = np.zeros((4, 1, 5)), np.zeros((4, 1, 5)), np.zeros((4, 1, 5))
x = np.zeros((n, n, 1))

for variant in (MDLSTM, MDLEAKY):
    _, cache = lattice_forward(x, w_in, w_rec1, w_rec2, bias, variant)
    s = lattice_states(cache)[0, :, :, 0]
    print(f"{variant:8s} |s| along the diagonal:", " ".join(f"{abs(s[i, i]):.3g}" for i in range(0, n, 3)))

# random weights up to 1e3: the leaky states never leave [-1, 1]
rng = np.random.default_rng(0)
worst = 0.0
for _ in range(200):
    ws = [rng.uniform(-1e3, 1e3, s) for s in ((4, 2, 10), (4, 2, 10), (4, 2, 10), (4, 10))]
    _, cache = lattice_forward(rng.normal(size=(24, 24, 2)), *ws, MDLEAKY)
    worst = max(worst, np.abs(lattice_states(cache)).max())
print("largest leaky |s| over 200 random lattices:", worst)
