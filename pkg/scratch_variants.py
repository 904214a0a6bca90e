"""Variant study: latent size / epochs vs criterion orderings."""
import sys
import time

import numpy as np

from pairlab.dataset import Dataset, compute_normalization
from pairlab.diagnostics import ood_metrics, rre
from pairlab.forward import build_radon, generate_phantoms, simulate_observations
from pairlab.lbfgs import LbfgsConfig
from pairlab.lsi import lsi_observation_space, model_space_lsi
from pairlab.masks import make_mask
from pairlab.pair_net import PairSpec, TrainConfig, init_model, save_model, train

LAT = int(sys.argv[1])
EPOCHS = int(sys.argv[2])

t0 = time.time()
op = build_radon(32, 60, 47)
x_train = generate_phantoms(32, 2000, seed=101)
y_train = simulate_observations(op, x_train, 0.1, seed=1101)
norm = compute_normalization(x_train, y_train)
ds = Dataset(x=x_train, y=y_train, normalization=norm)
x_test = generate_phantoms(32, 100, seed=102)
y_test = simulate_observations(op, x_test, 0.1, seed=1102)

spec = PairSpec.default(1024, 2820, latent_x=LAT, latent_y=LAT)
model = init_model(spec, norm, seed=3)
model, trace = train(model, ds, TrainConfig(epochs=EPOCHS, batch_size=32, seed=5))
print(f"[lat={LAT} ep={EPOCHS}] train {time.time()-t0:.0f}s loss {trace[0]:.0f}->{trace[-1]:.1f}", flush=True)
save_model(model, f"/tmp/desk_model_l{LAT}_e{EPOCHS}.json")

shape = (47, 60)
cfg10 = LbfgsConfig(max_iterations=10)
cfg100 = LbfgsConfig(max_iterations=100)
mean_x = x_train.mean(axis=0)

for name, mask in [
    ("identity", make_mask("identity", shape, 0.0, 7)),
    ("random", make_mask("random-columns", shape, 0.25, 7)),
    ("block", make_mask("block-columns", shape, 0.25, 7)),
]:
    rre_pair, rre_lsi = [], []
    for i in range(100):
        y_sub = mask(y_test[i])
        rre_pair.append(rre(model.apply("end_to_end", y_sub), x_test[i]))
        rre_lsi.append(rre(lsi_observation_space(model, mask, y_sub, cfg10).x, x_test[i]))
    ok = np.mean(rre_pair) <= np.mean(rre_lsi) if name == "identity" else np.mean(rre_lsi) < np.mean(rre_pair)
    print(f"[lat={LAT}] {name}: pair {np.mean(rre_pair):.4f} lsi {np.mean(rre_lsi):.4f} ok={ok}", flush=True)

mask = make_mask("block-columns", shape, 0.25, 7)
ae = {"full": [], "masked": [], "lsi": []}
for i in range(100):
    y_full = y_test[i]
    y_sub = mask(y_full)
    z_f = model.encode_y(model.norm_y(y_full))
    ae["full"].append(ood_metrics(model, model.apply("end_to_end", y_full), z_f, y_full)[1])
    z_m = model.encode_y(model.norm_y(y_sub))
    ae["masked"].append(ood_metrics(model, model.apply("end_to_end", y_sub), z_m, y_full)[1])
    run = lsi_observation_space(model, mask, y_sub, cfg10)
    ae["lsi"].append(ood_metrics(model, run.x, run.z, y_full)[1])
mf, mm, ml = np.mean(ae["full"]), np.mean(ae["masked"]), np.mean(ae["lsi"])
print(f"[lat={LAT}] ood-A: full {mf:.4f} masked {mm:.4f} lsi {ml:.4f} ratio {mm/mf:.2f} between={mf < ml < mm}", flush=True)

for kind in ("block-columns", "random-entries"):
    for frac in (0.0, 0.3, 0.9):
        mask = make_mask(kind, shape, frac, 7)
        d_lsi, r_lsi, r_pair, r_mlsi = [], [], [], []
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
        print(f"[lat={LAT}] {kind} f={frac}: data {np.mean(d_lsi):.4f} | lsi {np.mean(r_lsi):.4f} "
              f"pair {np.mean(r_pair):.4f} mlsi {np.mean(r_mlsi):.4f}", flush=True)
print(f"[lat={LAT}] total {time.time()-t0:.0f}s", flush=True)
