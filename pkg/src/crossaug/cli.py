"""Command-line front end: ``crossaug <subcommand> [--config FILE] [options]``.

Every subcommand reads an optional YAML config whose keys must appear in
``DEFAULTS`` (see README for the documented tree), applies ``--set
dotted.key=value`` overrides and flags, writes the resolved config to
``<out>/resolved_config.yaml`` and logs one ``event=...`` line per step to
standard error. Exit codes: 0 ok, 1 runtime failure, 2 config/usage error.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from importlib import resources

import yaml

log = logging.getLogger("crossaug")

# values of None mean "derived at run time"; OPEN marks free-form mappings
OPEN = object()

DEFAULTS = {
    "seed": 0,
    "output_dir": "crossaug-out",
    "data": {
        "source": "synthetic-digits",  # synthetic-digits | image-idx | synthetic-pair | tabular-csv
        # synthetic-digits
        "rows": 14000, "size": 28, "channels": 1,
        # image-idx: images is one path or a list of three per-channel paths
        "images": None, "labels": None, "limit": None, "name": None,
        # synthetic-pair
        "rows_a": 522, "rows_b": 5000, "common_width": 27, "unique_a": 41, "unique_b": 51,
        "noise": 1.0,
        # tabular-csv
        "a": None, "b": None, "label_column": "label", "names": ["A", "B"], "common": None,
        "categories": OPEN, "ranges": OPEN,
        # data-generation seed; defaults to the global seed
        "seed": None,
    },
    "mask": {"n": 8, "side": "A"},
    "mapping": {
        "variant": "ae", "beta": 1.0, "sampling": "sample", "hidden": None, "latent_dim": None,
        "train": {"epochs": 50, "batch_size": 32, "learning_rate": 1e-3, "beta1": 0.9,
                  "beta2": 0.999, "eps": 1e-8, "loss": "mse", "validation_fraction": 0.0},
    },
    "classifier": {
        "kind": None, "arch": OPEN,
        "train": {"epochs": None, "batch_size": None, "learning_rate": 1e-3,
                  "validation_fraction": 0.0},
    },
    "experiment": {
        "grid": [8], "variants": ["baseline", "ae", "vae"], "directions": ["A"], "folds": 5,
        "test_fraction": 0.2, "test_rows": None, "averaging": None,
    },
    "report": {"formats": ["csv", "svg"], "title": None},
}

SUBCOMMANDS = ("mask-images", "fit-mapping", "augment", "experiment", "report", "gradcheck",
               "synth-pair")


class ConfigError(ValueError):
    pass


def _materialise(tree):
    return {k: ({} if v is OPEN else _materialise(v) if isinstance(v, dict) else copy.deepcopy(v))
            for k, v in tree.items()}


def _merge(base: dict, defaults: dict, override: dict, prefix: str = ""):
    if not isinstance(override, dict):
        raise ConfigError(f"{prefix.rstrip('.') or 'config'}: expected a mapping")
    for key, value in override.items():
        dotted = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown config key {dotted!r}")
        d = defaults[key]
        if d is OPEN:
            if not isinstance(value, dict):
                raise ConfigError(f"{dotted}: expected a mapping")
            base[key] = copy.deepcopy(value)
        elif isinstance(d, dict):
            _merge(base[key], d, value or {}, dotted + ".")
        else:
            if value is not None and d is not None and not _compatible(d, value):
                raise ConfigError(f"{dotted}: expected {type(d).__name__}, got {value!r}")
            base[key] = value


def _compatible(default, value) -> bool:
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, list):
        return isinstance(value, list)
    return isinstance(value, type(default))


def resolve_config(doc: dict | None = None, overrides: list[str] = ()) -> dict:
    """Defaults <- config document <- ``dotted.key=value`` overrides."""
    cfg = _materialise(DEFAULTS)
    _merge(cfg, DEFAULTS, doc or {})
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        nested = yaml.safe_load(raw)
        for part in reversed(key.split(".")):
            nested = {part: nested}
        _merge(cfg, DEFAULTS, nested)
    return cfg


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            doc = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return doc or {}


def bundled_config(name: str) -> str:
    """Path of a config shipped with the package (``desk-mnist``, ``desk-tabular``)."""
    return str(resources.files("crossaug") / "configs" / f"{name}.yaml")


# config -> domain objects

def _data_dict(cfg) -> dict:
    d = {k: v for k, v in cfg["data"].items() if k != "source" and v not in (None, {})}
    d.setdefault("seed", cfg["seed"])
    return d


def _train_config(section: dict, seed: int):
    from crossaug.nn.train import TrainConfig

    return TrainConfig(**{k: v for k, v in section.items() if v is not None}, seed=seed)


def experiment_spec(cfg):
    from crossaug.eval.experiment import ExperimentSpec

    e = cfg["experiment"]
    clf = {k: v for k, v in cfg["classifier"].items() if v not in (None, {}) and k != "train"}
    clf["train"] = {k: v for k, v in cfg["classifier"]["train"].items() if v is not None}
    m = cfg["mapping"]
    mapping = {"beta": m["beta"], "sampling": m["sampling"], "hidden": m["hidden"],
               "latent_dim": m["latent_dim"], "train": dict(m["train"])}
    return ExperimentSpec(cfg["data"]["source"], _data_dict(cfg), list(e["grid"]),
                          list(e["variants"]), list(e["directions"]), e["folds"], cfg["seed"],
                          e["test_fraction"], e["test_rows"], e["averaging"], clf, mapping)


def augmentation_plan(cfg):
    from crossaug.augment import AugmentationPlan

    m = cfg["mapping"]
    side = cfg["mask"]["side"]
    return AugmentationPlan(donor="B" if side == "A" else "A", recipient=side, variant=m["variant"],
                            beta=m["beta"], train=_train_config(m["train"], cfg["seed"]),
                            sampling=m["sampling"], seed=cfg["seed"], hidden=m["hidden"],
                            latent_dim=m["latent_dim"])


def _is_image(cfg) -> bool:
    from crossaug.eval.experiment import IMAGE_SOURCES

    return cfg["data"]["source"] in IMAGE_SOURCES


def _load(cfg):
    from crossaug.eval.experiment import load_source

    return load_source(experiment_spec(cfg))


def _tabular_pair(cfg):
    """Aligned, encoded pair oriented so that ``pair.a`` is the recipient side."""
    from crossaug.data.partition import undersample
    from crossaug.data.tabular import fit_union_schema
    from crossaug.tensor import Rng

    data = _load(cfg)
    b = data["b"]
    count = cfg["experiment"]["grid"][0] if cfg["experiment"]["grid"] else None
    if count and count < len(b):
        b = undersample(b, int(count), Rng(cfg["seed"]).child(0).child(3))
    _, _, pair = fit_union_schema(data["a"], b, data["common"], data["categories"], data["ranges"])
    return pair.swapped() if cfg["mask"]["side"] == "B" else pair


def _image_halves(cfg):
    from crossaug.data.images import ImageMaskSpec
    from crossaug.data.partition import ab_halves

    images = _load(cfg)
    half_a, half_b = ab_halves(images)
    side = cfg["mask"]["side"]
    spec = ImageMaskSpec.for_images(images.images, cfg["mask"]["n"], side)
    recipient, donor = (half_a, half_b) if side == "A" else (half_b, half_a)
    return recipient, donor, spec


# subcommands

def cmd_mask_images(cfg, args, out):
    from crossaug.data.idx import ImageSet, save_idx_images
    from crossaug.data.images import ImageMaskSpec, mask_images

    if not _is_image(cfg):
        raise ConfigError("data.source: mask-images needs an image source")
    images = _load(cfg)
    spec = ImageMaskSpec.for_images(images.images, cfg["mask"]["n"], cfg["mask"]["side"])
    masked, _ = mask_images(images.images, spec)
    save_idx_images(os.path.join(out, "masked-images.idx"), os.path.join(out, "labels.idx"),
                    ImageSet(images.name, masked, images.labels))
    with open(os.path.join(out, "mask.json"), "w", encoding="utf-8") as f:
        json.dump({"width": spec.width, "n": spec.n, "side": spec.side,
                   "kept": spec.kept.tolist(), "common": spec.common.tolist(),
                   "zeroed": spec.zeroed.tolist()}, f, indent=1)
    log.info("event=masked rows=%d n=%d side=%s", len(images), spec.n, spec.side)
    return 0


def _fit(cfg):
    from crossaug.augment import fit_donor_mapping, fit_image_mapping
    from crossaug.tensor import Rng

    plan = augmentation_plan(cfg)
    rng = Rng(cfg["seed"])
    if _is_image(cfg):
        _, donor, spec = _image_halves(cfg)
        return fit_image_mapping(donor.images, spec.opposite(), plan, rng)
    return fit_donor_mapping(_tabular_pair(cfg), plan, rng)


def cmd_fit_mapping(cfg, args, out):
    from crossaug.autoencoder import save_mapping

    model, history = _fit(cfg)
    path = os.path.join(out, "mapping.json")
    save_mapping(model, path)
    with open(os.path.join(out, "history.json"), "w", encoding="utf-8") as f:
        json.dump({"loss": history.loss, "val_loss": history.val_loss}, f)
    log.info("event=mapping_saved path=%s final_loss=%.6g", path, history.loss[-1] if history.loss else float("nan"))
    return 0


def cmd_augment(cfg, args, out):
    from crossaug.augment import apply_mapping, augment_images
    from crossaug.autoencoder import load_mapping
    from crossaug.data.idx import ImageSet, save_idx_images
    from crossaug.data.images import mask_images
    from crossaug.tensor import Rng

    if args.mapping:
        model = load_mapping(args.mapping)
        if not model.frozen:
            model = model.freeze()
    else:
        model, _ = _fit(cfg)
    plan = augmentation_plan(cfg)
    rng = Rng(cfg["seed"]).child(1)
    if _is_image(cfg):
        recipient, _, spec = _image_halves(cfg)
        masked, _ = mask_images(recipient.images, spec)
        images = augment_images(masked, spec, model, rng, plan.sampling)
        save_idx_images(os.path.join(out, "augmented-images.idx"), os.path.join(out, "labels.idx"),
                        ImageSet(recipient.name, images, recipient.labels))
        log.info("event=augmented rows=%d kind=image", len(images))
        return 0
    pair = _tabular_pair(cfg)
    aug = apply_mapping(pair, pair.a, model, plan, rng)
    aug.write(os.path.join(out, "augmented.csv"))
    log.info("event=augmented rows=%d width=%d synthetic=%d", len(aug), aug.matrix.shape[1],
             len(aug.synthetic_columns))
    return 0


def cmd_experiment(cfg, args, out):
    from crossaug.eval.experiment import run_experiment
    from crossaug.eval.report import emit_report, write_timings

    spec = experiment_spec(cfg)
    results = run_experiment(spec, jobs=args.jobs)
    emit_report(results, out, tuple(cfg["report"]["formats"]), title=cfg["report"]["title"])
    write_timings(results, os.path.join(out, "timings.json"))
    failed = [r.cell for r in results if r.error]
    for r in results:
        log.info("event=result cell=%s means=%s", r.cell, json.dumps(r.mean_f1, sort_keys=True))
    if failed:
        log.error("event=cells_failed cells=%s", ",".join(failed))
        return 1
    return 0


def cmd_report(cfg, args, out):
    from crossaug.eval.report import emit_report, read_csv

    if not args.input:
        raise ConfigError("report needs --input results.csv")
    results = read_csv(args.input)
    for path in emit_report(results, out, tuple(cfg["report"]["formats"]), title=cfg["report"]["title"]):
        log.info("event=written path=%s", path)
    return 0


def cmd_gradcheck(cfg, args, out):
    from crossaug.nn.gradcheck import layer_suite

    worst = layer_suite(range(cfg["seed"], cfg["seed"] + args.seeds))
    ok = True
    for kind, err in worst.items():
        flag = "ok" if err < args.tolerance else "FAIL"
        ok &= err < args.tolerance
        print(f"{kind:<11} {err:.3e} {flag}")
    with open(os.path.join(out, "gradcheck.json"), "w", encoding="utf-8") as f:
        json.dump(worst, f, indent=1)
    return 0 if ok else 1


def cmd_synth_pair(cfg, args, out):
    from crossaug.data.synthetic import make_synthetic_pair
    from crossaug.data.tabular import write_tabular

    d = cfg["data"]
    a, b = make_synthetic_pair(d["rows_a"], d["rows_b"], d["common_width"], d["unique_a"],
                               d["unique_b"], noise=d["noise"],
                               seed=cfg["seed"] if d["seed"] is None else d["seed"])
    for ds in (a, b):
        path = os.path.join(out, f"{ds.name}.csv")
        write_tabular(path, ds, d["label_column"])
        log.info("event=written path=%s rows=%d", path, len(ds.labels))
    return 0


COMMANDS = {"mask-images": cmd_mask_images, "fit-mapping": cmd_fit_mapping, "augment": cmd_augment,
            "experiment": cmd_experiment, "report": cmd_report, "gradcheck": cmd_gradcheck,
            "synth-pair": cmd_synth_pair}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crossaug", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config file; bundled:NAME loads a shipped config")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="global seed (overrides seed)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a dotted config key, e.g. experiment.folds=3")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("mask-images", "fit-mapping", "augment", "experiment"):
            p.add_argument("--side", choices=["A", "B"], help="recipient side (overrides mask.side)")
        if name == "augment":
            p.add_argument("--mapping", help="saved mapping; fitted from the config when omitted")
        if name == "experiment":
            p.add_argument("--jobs", type=int, default=1, help="parallel grid cells (1 = reproducible)")
        if name == "report":
            p.add_argument("--input", help="results csv written by experiment")
        if name == "gradcheck":
            p.add_argument("--seeds", type=int, default=20)
            p.add_argument("--tolerance", type=float, default=1e-4)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(message)s", force=True)
    try:
        path = args.config
        if path and path.startswith("bundled:"):
            path = bundled_config(path.split(":", 1)[1])
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if getattr(args, "side", None):
            overrides.append(f"mask.side={args.side}")
        if args.out:
            overrides.append(f"output_dir={json.dumps(args.out)}")
        cfg = resolve_config(load_config(path), overrides)
        if cfg["mask"]["side"] not in ("A", "B"):
            raise ConfigError(f"mask.side: expected A or B, got {cfg['mask']['side']!r}")
        if getattr(args, "jobs", 1) < 1:
            raise ConfigError("--jobs must be >= 1")
    except ConfigError as exc:
        print(f"crossaug: config error: {exc}", file=sys.stderr)
        return 2
    out = cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "resolved_config.yaml"), "w", encoding="utf-8") as f:
        yaml.safe_dump(cfg, f, sort_keys=True)
    log.info("event=start command=%s seed=%d out=%s", args.command, cfg["seed"], out)
    try:
        code = COMMANDS[args.command](cfg, args, out)
    except ConfigError as exc:
        print(f"crossaug: config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        # constructor validation of config-derived objects
        print(f"crossaug: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.error("event=failed command=%s error=%s: %s", args.command, type(exc).__name__, exc)
        return 1
    log.info("event=done command=%s exit=%d", args.command, code)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
