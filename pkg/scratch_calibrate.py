"""Scratch calibration for the reference-run orderings (not part of the package)."""
import time

import numpy as np

from pairlab.dataset import Dataset, compute_normalization
from pairlab.diagnostics import ood_metrics, rre
from pairlab.forward import build_radon, generate_phantoms, simulate_observations
from pairlab.lbfgs import LbfgsConfig
from pairlab.lsi import lsi_observation_space, model_space_lsi
from pairlab.masks import make_mask
from pairlab.pair_net import PairSpec, TrainConfig, init_model, save_model, train

t0 = time.time()
op = build_radon(32, 60, 47)
x_train = generate_phantoms(32, 2000, seed=101)
y_train = simulate_observations(op, x_train, 0.1, seed=1101)
norm = compute_normalization(x_train, y_train)
ds = Dataset(x=x_train, y=y_train, normalization=norm)
x_test = generate_phantoms(32, 100, seed=102)
y_test = simulate_observations(op, x_test, 0.1, seed=1102)

spec = PairSpec.default(1024, 2820)
model = init_model(spec, norm, seed=3)
EPOCHS = 30
model, trace = train(model, ds, TrainConfig(epochs=EPOCHS, batch_size=32, seed=5))
print(f"train {EPOCHS} epochs: {time.time()-t0:.0f}s, loss {trace[0]:.1f} -> {trace[-1]:.3f}", flush=True)
save_model(model, "/tmp/desk_model.json")

shape = (47, 60)
cfg = LbfgsConfig(max_iterations=10)
mean_x = x_train.mean(axis=0)

for name, mask in [
    ("identity", make_mask("identity", shape, 0.0, 7)),
    ("random", make_mask("random-columns", shape, 0.25, 7)),
    ("block", make_mask("block-columns", shape, 0.25, 7)),
]:
    rre_pair, rre_lsi = [], []
    t1 = time.time()
    for i in range(100):
        y_sub = mask(y_test[i])
        x_pair = model.apply("end_to_end", y_sub)
        run = lsi_observation_space(model, mask, y_sub, cfg)
        rre_pair.append(rre(x_pair, x_test[i]))
        rre_lsi.append(rre(run.x, x_test[i]))
    print(
        f"{name}: pair {np.mean(rre_pair):.4f}  lsi-zy {np.mean(rre_lsi):.4f}"
        f"  ({time.time()-t1:.0f}s)", flush=True
    )

# OOD metric populations with block mask (criterion 9)
mask = make_mask("block-columns", shape, 0.25, 7)
ae_full, ae_mask, ae_lsi = [], [], []
for i in range(100):
    y_full = y_test[i]
    y_sub = mask(y_full)
    z_full = model.encode_y(model.norm_y(y_full))
    x_full = model.apply("end_to_end", y_full)
    ae_full.append(ood_metrics(model, x_full, z_full, y_full)[1])
    z_m = model.encode_y(model.norm_y(y_sub))
    x_m = model.apply("end_to_end", y_sub)
    ae_mask.append(ood_metrics(model, x_m, z_m, y_sub)[1])
    run = lsi_observation_space(model, mask, y_sub, cfg)
    ae_lsi.append(ood_metrics(model, run.x, run.z, y_sub)[1])
print(
    f"ood autoencode_diff means: full {np.mean(ae_full):.4f} masked {np.mean(ae_mask):.4f} "
    f"lsi {np.mean(ae_lsi):.4f} ratio {np.mean(ae_mask)/np.mean(ae_full):.2f}", flush=True
)

# sweep (criterion 8): random-entries masks, 32 samples
cfg25 = LbfgsConfig(max_iterations=25)
cfg100 = LbfgsConfig(max_iterations=100)
for frac in (0.0, 0.3, 0.6, 0.9):
    mask = make_mask("random-entries", (47, 60), frac, 7)
    d_lsi, r_lsi, r_pair, r_mlsi = [], [], [], []
    t1 = time.time()
    for i in range(32):
        y_full = y_test[i]
        y_sub = mask(y_full)
        run = lsi_observation_space(model, mask, y_sub, cfg25)
        y_rec = model.denorm_y(model.decode_y(run.z))
        d_lsi.append(np.linalg.norm(y_rec - y_full) / np.linalg.norm(y_full))
        r_lsi.append(rre(run.x, x_test[i]))
        r_pair.append(rre(model.apply("end_to_end", y_sub), x_test[i]))
        mruns = model_space_lsi(model, op, mask, y_sub, cfg100, ensemble=2, seed=11, mean_x=mean_x)
        r_mlsi.append(rre(np.mean([r.x for r in mruns], axis=0), x_test[i]))
    print(
        f"frac {frac}: lsi data_err {np.mean(d_lsi):.4f}  rre lsi {np.mean(r_lsi):.4f} "
        f"pair {np.mean(r_pair):.4f} mlsi {np.mean(r_mlsi):.4f} ({time.time()-t1:.0f}s)", flush=True
    )
print(f"total {time.time()-t0:.0f}s")
