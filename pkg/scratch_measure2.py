"""Second calibration pass on the saved desk model (no retraining)."""
import time

import numpy as np

from pairlab.diagnostics import ood_metrics, rre
from pairlab.forward import build_radon, generate_phantoms, simulate_observations
from pairlab.lbfgs import LbfgsConfig
from pairlab.lsi import lsi_observation_space, model_space_lsi
from pairlab.masks import make_mask
from pairlab.pair_net import load_model

model = load_model("/tmp/desk_model.json")
op = build_radon(32, 60, 47)
x_train = generate_phantoms(32, 2000, seed=101)
x_test = generate_phantoms(32, 100, seed=102)
y_test = simulate_observations(op, x_test, 0.1, seed=1102)
mean_x = x_train.mean(axis=0)
shape = (47, 60)
cfg10 = LbfgsConfig(max_iterations=10)
cfg100 = LbfgsConfig(max_iterations=100)

# Criterion 9 variant: metrics against FULL y for all three populations
mask = make_mask("block-columns", shape, 0.25, 7)
cols = {"full": [], "masked": [], "lsi": []}
res_cols = {"full": [], "masked": [], "lsi": []}
for i in range(100):
    y_full = y_test[i]
    y_sub = mask(y_full)
    z_full = model.encode_y(model.norm_y(y_full))
    x_full = model.apply("end_to_end", y_full)
    r, a = ood_metrics(model, x_full, z_full, y_full)
    cols["full"].append(a); res_cols["full"].append(r)
    z_m = model.encode_y(model.norm_y(y_sub))
    x_m = model.apply("end_to_end", y_sub)
    r, a = ood_metrics(model, x_m, z_m, y_full)
    cols["masked"].append(a); res_cols["masked"].append(r)
    run = lsi_observation_space(model, mask, y_sub, cfg10)
    r, a = ood_metrics(model, run.x, run.z, y_full)
    cols["lsi"].append(a); res_cols["lsi"].append(r)
mf, mm, ml = (np.mean(cols[k]) for k in ("full", "masked", "lsi"))
print(f"ood vs FULL y: autoencode_diff full {mf:.4f} masked {mm:.4f} lsi {ml:.4f} "
      f"ratio {mm/mf:.2f} between={mf < ml < mm}", flush=True)
rf, rm, rl = (np.mean(res_cols[k]) for k in ("full", "masked", "lsi"))
print(f"ood vs FULL y: residual_est full {rf:.4f} masked {rm:.4f} lsi {rl:.4f}", flush=True)

# Criterion 8 variants: mask kind x fractions, lsi 10 iters
for kind in ("random-entries", "random-columns"):
    for frac in (0.0, 0.3, 0.9):
        mask = make_mask(kind, shape, frac, 7)
        d_lsi, r_lsi, r_pair, r_mlsi = [], [], [], []
        t1 = time.time()
        for i in range(32):
            y_full = y_test[i]
            y_sub = mask(y_full)
            run = lsi_observation_space(model, mask, y_sub, cfg10)
            y_rec = model.denorm_y(model.decode_y(run.z))
            d_lsi.append(np.linalg.norm(y_rec - y_full) / np.linalg.norm(y_full))
            r_lsi.append(rre(run.x, x_test[i]))
            r_pair.append(rre(model.apply("end_to_end", y_sub), x_test[i]))
            mruns = model_space_lsi(model, op, mask, y_sub, cfg100, ensemble=2, seed=11, mean_x=mean_x)
            r_mlsi.append(rre(np.mean([r.x for r in mruns], axis=0), x_test[i]))
        print(f"{kind} frac {frac}: lsi data_err {np.mean(d_lsi):.4f} | rre lsi {np.mean(r_lsi):.4f} "
              f"pair {np.mean(r_pair):.4f} mlsi {np.mean(r_mlsi):.4f} ({time.time()-t1:.0f}s)", flush=True)
