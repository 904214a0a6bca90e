"""Command-line harness: reproducible desk-scale experiments.

    pairlab <gen|train|invert|sweep|ood|certify> [--config FILE] [--out DIR]
            [--section.key=value ...]

Every command is a pure function of its config and input files; output CSVs
start with a '#' provenance comment carrying the config hash and seeds.
Exit codes: 0 success, 2 usage error, 3 input-file error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, linear_pair, lsi
from .config import ExperimentConfig, apply_overrides, load_config
from .dataset import (
    Dataset,
    DatasetFormatError,
    compute_normalization,
    load_dataset,
    save_dataset,
)
from .forward import build_radon, generate_phantoms, simulate_observations
from .linalg import NumericalError
from .masks import make_mask
from .pair_net import (
    ModelFormatError,
    TrainingDivergedError,
    init_model,
    load_model,
    save_model,
    train,
)

METHODS = ("pair", "lsi-zy", "lsi-zx", "mlsi", "tikhonov")
MASK_CHOICES = ("identity", "random-columns", "block-columns", "random-entries")

METRICS_COLUMNS = (
    "sample_id",
    "method",
    "mask_kind",
    "missing_fraction",
    "rre",
    "ssim",
    "residual_estimate",
    "autoencode_diff",
    "bound_predicted",
    "bound_actual",
    "bound_ok",
)


def main(argv=None) -> int:
    parser = _build_parser()
    args, unknown = parser.parse_known_args(argv)
    for item in unknown:
        # dotted overrides arrive as --section.key=value
        if item.startswith("--") and "=" in item:
            args.override.append(item[2:])
        else:
            parser.error(f"unrecognized argument: {item}")
    try:
        config = _resolve_config(args)
        out = Path(args.out) if args.out else Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        args.func(config, out, args)
    except (FileNotFoundError, DatasetFormatError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, TrainingDivergedError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (defaults used if omitted)")
        p.add_argument("--out", help="output directory (default: config output_dir)")
        p.add_argument(
            "override", nargs="*", metavar="key=value",
            help="dotted config overrides, e.g. train.epochs=5",
        )

    p_gen = sub.add_parser("gen", help="generate train/test/OOD dataset files")
    common(p_gen)
    p_gen.set_defaults(func=cmd_gen)

    p_train = sub.add_parser("train", help="train the paired model")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_inv = sub.add_parser("invert", help="reconstruct the test set with one method")
    p_inv.add_argument("--method", required=True, choices=METHODS)
    p_inv.add_argument("--mask", default="identity", choices=MASK_CHOICES)
    p_inv.add_argument(
        "--mask-variant", default="primary", choices=("primary", "alternate"),
        help="alternate uses the config's alternate mask seed",
    )
    common(p_inv)
    p_inv.set_defaults(func=cmd_invert)

    p_sweep = sub.add_parser("sweep", help="error statistics vs missing fraction")
    p_sweep.add_argument("--fractions", help="comma-separated override, e.g. 0,0.5,0.9")
    common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_ood = sub.add_parser("ood", help="emit the OOD-metric scatter populations")
    p_ood.add_argument("--mask", default="block-columns", choices=MASK_CHOICES[1:])
    common(p_ood)
    p_ood.set_defaults(func=cmd_ood)

    p_cert = sub.add_parser("certify", help="evaluate the stability-bound certificate")
    p_cert.add_argument(
        "--linear", action="store_true",
        help="certify the optimal linear pair (spectral constants) instead of the trained model",
    )
    p_cert.add_argument("--mask", default=None, choices=MASK_CHOICES)
    common(p_cert)
    p_cert.set_defaults(func=cmd_certify)
    return parser


def _resolve_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    return apply_overrides(config, args.override)


def _provenance(config: ExperimentConfig, command: str) -> str:
    seeds = (
        f"data:{config.data.seed},mask:{config.masks.seed},"
        f"alt_mask:{config.masks.alternate_seed},init:{config.model.init_seed},"
        f"train:{config.train.seed},mlsi:{config.mlsi.seed},certify:{config.certify.seed}"
    )
    return f"# config_hash={config.hash()} command={command} seeds={seeds}\n"


def _write_csv(path: Path, provenance: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(provenance)
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _operator(config: ExperimentConfig):
    g = config.geometry
    return build_radon(g.grid_side, g.angle_count, g.detector_count, g.detector_spacing)


def _mask_from_config(config: ExperimentConfig, kind: str, variant: str = "primary"):
    seed = config.masks.seed if variant == "primary" else config.masks.alternate_seed
    return make_mask(kind, config.observation_shape(), config.masks.fraction, seed)


def _dataset_path(out: Path, split: str) -> Path:
    return out / f"{split}.pairds"


def _require(path: Path) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"missing input file {path} (run the upstream command first)")
    return path


# -- commands -----------------------------------------------------------------

def cmd_gen(config: ExperimentConfig, out: Path, args) -> None:
    op = _operator(config)
    g = config.geometry
    d = config.data
    shapes = {"x": [g.grid_side, g.grid_side], "y": [g.detector_count, g.angle_count]}

    def make_split(count, seed_offset, ellipse_count, intensity):
        x = generate_phantoms(
            g.grid_side, count, d.seed + seed_offset,
            ellipse_count=ellipse_count, intensity=intensity,
        )
        y = simulate_observations(op, x, d.noise_fraction, d.seed + seed_offset + 1000)
        return x, y

    x_train, y_train = make_split(d.train_count, 0, (2, 6), (0.2, 0.6))
    normalization = compute_normalization(x_train, y_train)

    def save_split(split, x, y, kind):
        ds = Dataset(
            x=x, y=y, normalization=normalization, shapes=shapes,
            provenance={
                "split": split, "seed": d.seed, "noise_fraction": d.noise_fraction,
                "generator": kind, "config_hash": config.hash(),
            },
        )
        save_dataset(ds, _dataset_path(out, split))

    save_split("train", x_train, y_train, "ellipse-phantoms")
    x_test, y_test = make_split(d.test_count, 1, (2, 6), (0.2, 0.6))
    save_split("test", x_test, y_test, "ellipse-phantoms")
    if d.make_ood:
        # shifted distribution standing in for an out-of-distribution corpus
        x_ood, y_ood = make_split(d.ood_count, 2, (5, 9), (0.5, 0.9))
        save_split("ood", x_ood, y_ood, "ellipse-phantoms-shifted")


def cmd_train(config: ExperimentConfig, out: Path, args) -> None:
    ds = load_dataset(_require(_dataset_path(out, "train")))
    spec = config.pair_spec(ds.x.shape[1], ds.y.shape[1])
    model = init_model(spec, ds.normalization, config.model.init_seed)
    model, trace = train(model, ds, config.train_config())
    save_model(model, out / "model.json")
    _write_csv(
        out / "loss_trace.csv",
        _provenance(config, "train"),
        ("epoch", "mean_loss"),
        [(i, v) for i, v in enumerate(trace)],
    )


def _reconstruct(config, model, op, mask, method, y_sub, mean_x):
    """One reconstruction; returns (x_hat, z_y_for_metrics)."""
    if method == "pair":
        x_hat = model.apply("end_to_end", y_sub)
        z_y = model.encode_y(model.norm_y(y_sub))
    elif method == "lsi-zy":
        run = lsi.lsi_observation_space(
            model, mask, y_sub, config.lsi_config(),
            latent_penalty=config.lsi.latent_penalty,
        )
        x_hat, z_y = run.x, run.z
    elif method == "lsi-zx":
        run = lsi.lsi_parameter_space(
            model, mask, y_sub, config.lsi_config(),
            latent_penalty=config.lsi.latent_penalty,
        )
        x_hat, z_y = run.x, model.map_fwd(run.z)
    elif method == "mlsi":
        runs = lsi.model_space_lsi(
            model, op, mask, y_sub,
            config.lsi_config(config.mlsi.max_iterations),
            ensemble=config.mlsi.ensemble, seed=config.mlsi.seed,
            mean_x=mean_x, perturbation=config.mlsi.perturbation,
        )
        x_hat = np.mean([r.x for r in runs], axis=0)
        z_y = model.encode_y(model.norm_y(y_sub))
    else:
        raise ValueError(f"unknown method {method!r}")
    return x_hat, z_y


def cmd_invert(config: ExperimentConfig, out: Path, args) -> None:
    test = load_dataset(_require(_dataset_path(out, "test")))
    op = _operator(config)
    mask = _mask_from_config(config, args.mask, args.mask_variant)
    mask_name = args.mask if args.mask_variant == "primary" else f"{args.mask}-alt"
    g = config.geometry
    rows = []
    recons = []
    if args.method == "tikhonov":
        design = mask.keep[:, None] * op.matrix
        for i in range(test.count):
            y_sub = mask(test.y[i])
            truth = test.x[i].reshape(g.grid_side, g.grid_side)
            data_range = float(truth.max() - truth.min())
            for lam in config.tikhonov.lambdas:
                x_hat = lsi.tikhonov_baseline(design, y_sub, lam)
                recons.append(x_hat)
                rows.append((
                    i, f"tikhonov(lam={lam})", mask_name, mask.fraction,
                    diagnostics.rre(x_hat, test.x[i]),
                    diagnostics.ssim(x_hat.reshape(truth.shape), truth, data_range),
                    float("nan"), float("nan"), float("nan"), float("nan"), "",
                ))
    else:
        model = load_model(_require(out / "model.json"))
        train_ds = load_dataset(_require(_dataset_path(out, "train")))
        mean_x = train_ds.x.mean(axis=0)
        for i in range(test.count):
            y_sub = mask(test.y[i])
            x_hat, z_y = _reconstruct(config, model, op, mask, args.method, y_sub, mean_x)
            recons.append(x_hat)
            truth = test.x[i].reshape(g.grid_side, g.grid_side)
            data_range = float(truth.max() - truth.min())
            res_est, ae_diff = diagnostics.ood_metrics(model, x_hat, z_y, y_sub)
            rows.append((
                i, args.method, mask_name, mask.fraction,
                diagnostics.rre(x_hat, test.x[i]),
                diagnostics.ssim(x_hat.reshape(truth.shape), truth, data_range),
                res_est, ae_diff, float("nan"), float("nan"), "",
            ))
    rows.sort(key=lambda r: (r[0], r[1]))
    tag = f"{args.method}_{mask_name}"
    _write_csv(out / f"metrics_{tag}.csv", _provenance(config, "invert"), METRICS_COLUMNS, rows)
    np.save(out / f"recon_{tag}.npy", np.array(recons))


def cmd_sweep(config: ExperimentConfig, out: Path, args) -> None:
    test = load_dataset(_require(_dataset_path(out, "test")))
    train_ds = load_dataset(_require(_dataset_path(out, "train")))
    model = load_model(_require(out / "model.json"))
    op = _operator(config)
    mean_x = train_ds.x.mean(axis=0)
    fractions = config.sweep.fractions
    if args.fractions:
        fractions = tuple(float(v) for v in args.fractions.split(","))
    count = min(config.sweep.sample_count, test.count)
    rows = []
    for fraction in fractions:
        mask = make_mask(
            config.sweep.mask_kind, config.observation_shape(), fraction, config.masks.seed
        )
        stats = {m: {"data": [], "rre": []} for m in ("baseline", "pair", "lsi-zy", "mlsi")}
        for i in range(count):
            y_full = test.y[i]
            y_sub = mask(y_full)
            y_norm = np.linalg.norm(y_full)
            stats["baseline"]["data"].append(np.linalg.norm(y_sub - y_full) / y_norm)
            stats["baseline"]["rre"].append(float("nan"))

            x_pair = model.apply("end_to_end", y_sub)
            y_pair = model.denorm_y(model.decode_y(model.encode_y(model.norm_y(y_sub))))
            stats["pair"]["data"].append(np.linalg.norm(y_pair - y_full) / y_norm)
            stats["pair"]["rre"].append(diagnostics.rre(x_pair, test.x[i]))

            run = lsi.lsi_observation_space(
                model, mask, y_sub, config.lsi_config(config.sweep.lsi_iterations)
            )
            y_lsi = model.denorm_y(model.decode_y(run.z))
            stats["lsi-zy"]["data"].append(np.linalg.norm(y_lsi - y_full) / y_norm)
            stats["lsi-zy"]["rre"].append(diagnostics.rre(run.x, test.x[i]))

            mruns = lsi.model_space_lsi(
                model, op, mask, y_sub,
                config.lsi_config(config.mlsi.max_iterations),
                ensemble=config.sweep.mlsi_ensemble, seed=config.mlsi.seed,
                mean_x=mean_x, perturbation=config.mlsi.perturbation,
            )
            x_mlsi = np.mean([r.x for r in mruns], axis=0)
            stats["mlsi"]["data"].append(np.linalg.norm(op(x_mlsi) - y_full) / y_norm)
            stats["mlsi"]["rre"].append(diagnostics.rre(x_mlsi, test.x[i]))
        for method, vals in stats.items():
            rows.append((
                fraction, method,
                float(np.mean(vals["data"])), float(np.std(vals["data"])),
                float(np.mean(vals["rre"])), float(np.std(vals["rre"])),
            ))
    _write_csv(
        out / "sweep.csv",
        _provenance(config, "sweep"),
        ("missing_fraction", "method", "data_err_mean", "data_err_std", "rre_mean", "rre_std"),
        rows,
    )


def cmd_ood(config: ExperimentConfig, out: Path, args) -> None:
    test = load_dataset(_require(_dataset_path(out, "test")))
    model = load_model(_require(out / "model.json"))
    mask = _mask_from_config(config, args.mask)
    rows = []
    for i in range(test.count):
        y_full = test.y[i]
        y_sub = mask(y_full)

        x_full = model.apply("end_to_end", y_full)
        z_full = model.encode_y(model.norm_y(y_full))
        res, ae = diagnostics.ood_metrics(model, x_full, z_full, y_full)
        rows.append((i, "full", res, ae, diagnostics.rre(x_full, test.x[i])))

        x_masked = model.apply("end_to_end", y_sub)
        z_masked = model.encode_y(model.norm_y(y_sub))
        res, ae = diagnostics.ood_metrics(model, x_masked, z_masked, y_sub)
        rows.append((i, "masked", res, ae, diagnostics.rre(x_masked, test.x[i])))

        run = lsi.lsi_observation_space(model, mask, y_sub, config.lsi_config())
        res, ae = diagnostics.ood_metrics(model, run.x, run.z, y_sub)
        rows.append((i, "masked+lsi", res, ae, diagnostics.rre(run.x, test.x[i])))
    _write_csv(
        out / "ood_scatter.csv",
        _provenance(config, "ood"),
        ("sample_id", "population", "residual_estimate", "autoencode_diff", "rre"),
        rows,
    )


def cmd_certify(config: ExperimentConfig, out: Path, args) -> None:
    test = load_dataset(_require(_dataset_path(out, "test")))
    train_ds = load_dataset(_require(_dataset_path(out, "train")))
    op = _operator(config)
    mask_kind = args.mask or config.certify.mask_kind
    mask = _mask_from_config(config, mask_kind)
    if args.linear:
        cov_x = linear_pair.second_moment(train_ds.x)
        residuals = train_ds.y - train_ds.x @ op.matrix.T
        cov_noise = linear_pair.second_moment(residuals)
        latent = min(config.certify.linear_latent, op.n, op.q)
        pair = linear_pair.optimal_linear_pair(op.matrix, cov_x, cov_noise, latent, latent)
        constants = diagnostics.spectral_constants(pair, op, mask, test.x, test.y)
        report = diagnostics.bound_report(constants, pair, op, mask, test.x, test.y)
    else:
        model = load_model(_require(out / "model.json"))
        cal = min(config.certify.calibration_count, train_ds.count)
        constants = diagnostics.estimate_constants(
            model, op, mask,
            train_ds.x[:cal], train_ds.y[:cal],
            pair_count=config.certify.pair_count, seed=config.certify.seed,
        )
        report = diagnostics.bound_report(
            constants, model, op, mask, test.x, test.y, config.lsi_config()
        )
    c = report.constants
    extra = (
        f"# mode={c.mode} mask={mask_kind} eps_x={c.eps_x!r} eps_y={c.eps_y!r} "
        f"gamma_m={c.gamma_m!r} delta={c.delta!r} l_dx={c.l_dx!r} l_mbwd={c.l_mbwd!r} "
        f"l_ey={c.l_ey!r} l_a={c.l_a!r} alpha_p={c.alpha_p!r} beta_p={c.beta_p!r} "
        f"error_rate={report.satisfaction_rate!r} statement1_rate={report.statement1_rate!r}\n"
    )
    _write_csv(
        out / "certificate.csv",
        _provenance(config, "certify") + extra,
        (
            "sample_id", "error_actual", "error_bound", "error_ok",
            "residual_actual", "residual_bound", "residual_ok",
            "statement1_ok", "vacuous",
        ),
        [
            (
                r.sample_id, r.error_actual, r.error_bound, r.error_ok,
                r.residual_actual, r.residual_bound, r.residual_ok,
                r.statement1_ok, r.vacuous,
            )
            for r in report.rows
        ],
    )


if __name__ == "__main__":
    sys.exit(main())
