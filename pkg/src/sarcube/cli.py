"""``cube`` command line: one subcommand per pipeline step."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .errors import SarCubeError

log = logging.getLogger("sarcube")


def _ints(text):
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _names(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _load_json(path):
    return json.loads(Path(path).read_text())


# --- data preparation --------------------------------------------------------

def cmd_synth(args):
    from .synthgen import SceneSpec, gen_scene

    spec = SceneSpec(shape=_ints(args.shape), n_pre=args.pre, n_post=args.post, seed=args.seed,
                     slope_threshold=args.slope_threshold, landslide_drop=args.drop,
                     speckle_looks=args.looks, with_slc=args.slc)
    cube = gen_scene(spec, args.out)
    label = cube.read_var("label")
    print(f"wrote {cube.path} ({spec.n_pre + spec.n_post} timesteps, "
          f"prevalence {float((label == 1).mean()):.4f})")


def cmd_fetch(args):
    from .ingest import fetch_verify, unpack_archive

    out = Path(args.out)
    if not out.suffix:
        out.mkdir(parents=True, exist_ok=True)
    path = fetch_verify(args.url, args.sha256, out)
    print(path)
    if args.unpack:
        print(unpack_archive(path, args.unpack))


def cmd_rasterize(args):
    from .cube_store import RasterVar, open_cube
    from .ingest import load_polygons, rasterize_mask

    cube = open_cube(args.cube)
    polys = load_polygons(args.polygons)
    mask = rasterize_mask(polys, cube.geotransform, (cube.dims["y"], cube.dims["x"]))
    cube.write_var(RasterVar(args.var, ("y", "x"), mask))
    print(f"{len(polys)} polygons -> {int(mask.sum())} positive pixels in {args.var}")


def cmd_terrain(args):
    from .cube_store import open_cube
    from .terrain import write_terrain

    layers = write_terrain(open_cube(args.cube), args.dem_var, args.pixel_size)
    print(f"slope {layers.slope.min():.2f}..{layers.slope.max():.2f} deg")


def cmd_insar(args):
    from .cube_store import open_cube
    from .insar import process_cube

    pairs = args.pairs
    if pairs != "consecutive":
        pairs = [tuple(int(v) for v in p.split("-")) for p in pairs.split(",")]
    done = process_cube(open_cube(args.cube), pairs, _ints(args.window), _ints(args.looks),
                        args.slc_prefix)
    print(f"processed {len(done)} pairs")


def cmd_info(args):
    from .cube_store import open_cube

    cube = open_cube(args.cube)
    print(json.dumps({"dims": cube.dims, "geotransform": cube.geotransform.to_string(),
                      "attrs": cube.attrs,
                      "variables": {n: {"dims": list(v.dims), "shape": list(v.shape),
                                        "dtype": v.dtype, "chunks": list(v.chunks)}
                                    for n, v in ((n, cube.var_info(n)) for n in cube.variables)}},
                     indent=2))


# --- chips, training, inference ------------------------------------------------

def _input_config(cube, config, k):
    from .preprocess import InputConfig

    channel_set = config
    if config and Path(config).is_file():
        cfg = _load_json(config)
        channel_set = cfg.get("channel_set", cfg.get("set"))
        k = int(cfg.get("k", k))
    return InputConfig.for_cube(cube, channel_set, k)


def cmd_chips(args):
    from .chipper import extract_chips, filter_positive, save_chips, split_chips, tile_grid
    from .cube_store import open_cube
    from .preprocess import ChannelStats, raw_channels, standardize

    cube = open_cube(args.cube)
    config = _input_config(cube, args.config, args.k)
    raw = raw_channels(cube, config)
    mask = cube.read_var(args.label_var)
    chips = filter_positive(extract_chips(raw, mask, tile_grid(mask.shape, args.chip), args.chip))
    split_chips(chips, args.test_fraction, args.seed)
    train = [c for c in chips if c.split == "train"]
    test = [c for c in chips if c.split == "test"]
    stats = ChannelStats.from_data(config.channels, np.stack([c.inputs for c in train]))
    for c in chips:
        c.inputs = standardize(c.inputs, stats)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    extra = {"channel_set": config.channel_set.value, "k": config.k_timesteps,
             "pre_indices": list(config.pre_indices), "post_indices": list(config.post_indices),
             "seed": args.seed, "test_fraction": args.test_fraction}
    save_chips(out / "train", train, config.channels, cube.geotransform, extra)
    save_chips(out / "test", test, config.channels, cube.geotransform, extra)
    stats.save(out / "stats.json")
    print(f"{len(chips)} positive chips: {len(train)} train, {len(test)} test -> {out}")


def _chip_dir(path, split):
    path = Path(path)
    return path / split if (path / split / "index.json").exists() else path


def _train_settings(cfg):
    from .segmodel import TrainConfig

    names = {f.name for f in fields(TrainConfig)}
    return TrainConfig(**{k: v for k, v in cfg.items() if k in names})


def cmd_train(args):
    from .chipper import load_chips
    from .preprocess import ChannelStats
    from .segmodel import ModelConfig, build_model, train

    cfg = _load_json(args.config) if args.config else {}
    chips, index = load_chips(_chip_dir(args.chips, "train"))
    chips = [c for c in chips if c.split in (None, "train")]
    tcfg = _train_settings(cfg)
    model = build_model(ModelConfig(len(index["channels"]), cfg.get("base_width", 16),
                                    cfg.get("depth", 4)), seed=tcfg.seed)
    stats_path = Path(args.chips) / "stats.json"
    stats = ChannelStats.load(stats_path) if stats_path.exists() else None
    res = train(model, chips, tcfg, checkpoint=args.out, stats=stats,
                on_epoch=lambda e: print(f"epoch {e.epoch} loss {e.loss:.5f} lr {e.lr:.3g}",
                                         flush=True))
    print(f"final loss {res.final_loss:.5f}; checkpoint {res.checkpoint}")


def _score_chips(ckpt, chips_dir):
    from .chipper import load_chips
    from .segmodel import load_model, predict_batch

    model, _ = load_model(ckpt)
    chips, index = load_chips(_chip_dir(chips_dir, "test"))
    scores = predict_batch(model, np.stack([c.inputs for c in chips]))
    return chips, index, scores


def cmd_predict(args):
    from .cube_store import CHIP_DIMS, RasterVar, create_cube
    from .pgm import mask_image, score_image, write_pgm

    chips, _, scores = _score_chips(args.ckpt, args.chips)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for c, s in zip(chips, scores):
        stem = f"chip_{c.origin[0]:05d}_{c.origin[1]:05d}"
        write_pgm(out / f"{stem}_score.pgm", score_image(s))
        write_pgm(out / f"{stem}_mask.pgm", mask_image(c.mask))
    n, h, w = scores.shape
    store = create_cube(out / "scores", [("chip", n), ("y", h), ("x", w)], dim_order=CHIP_DIMS,
                        attrs={"origins": json.dumps([list(c.origin) for c in chips])})
    store.write_var(RasterVar("score", ("chip", "y", "x"), scores.astype(np.float32), (1, h, w)))
    print(f"wrote {n} score maps to {out}")


def cmd_eval(args):
    from .metrics import evaluate_chips, write_curve_csv

    chips, _, scores = _score_chips(args.ckpt, args.chips)
    curve = evaluate_chips(list(scores), [c.mask for c in chips])
    write_curve_csv(curve, args.out)
    print(f"auprc {curve.auprc:.4f} prevalence {curve.prevalence:.4f} -> {args.out}")


# --- ablation -----------------------------------------------------------------

ABLATE_DEFAULTS = {
    "sets": "vv,vh,vvvh,sardem,dem", "ks": "1,2,3,4", "seeds": 5, "epochs": 100,
    "batch_size": 8, "lr0": 0.01, "width": 16, "depth": 4, "test_fraction": 61 / 277,
    "chip": 128, "workers": 1, "time_limit": None,
}


def cmd_ablate(args):
    from .experiment import CellSettings, emit_report, run_ablation, summarize
    from .segmodel import TrainConfig

    seeds = args.seeds
    seeds = list(range(seeds)) if isinstance(seeds, int) else [int(s) for s in _names(seeds)]
    tcfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr0=args.lr0,
                       time_limit=args.time_limit)
    settings = CellSettings(model_width=args.width, model_depth=args.depth,
                            test_fraction=args.test_fraction, chip=args.chip, train=tcfg)
    result = run_ablation(args.cube, _names(args.sets), list(_ints(args.ks)), seeds,
                          out_dir=args.out, settings=settings, workers=args.workers)
    emit_report(result, args.out)
    for row in summarize(result):
        print(f"{row['channel_set']:>9} k={row['k']}  auprc {row['mean']:.4f} "
              f"+- {row['std']:.4f}  (n={row['n']})")


def _seeds_arg(text):
    text = str(text)
    return int(text) if text.isdigit() else text


def build_parser():
    from .synthgen import SceneSpec

    scene = SceneSpec()
    p = argparse.ArgumentParser(prog="cube", description="SAR datacube landslide pipeline")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic scene cube")
    s.add_argument("--shape", default="1024,1024")
    s.add_argument("--pre", type=int, default=4)
    s.add_argument("--post", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--slope-threshold", type=float, default=scene.slope_threshold)
    s.add_argument("--drop", type=float, default=scene.landslide_drop)
    s.add_argument("--looks", type=int, default=scene.speckle_looks)
    s.add_argument("--slc", action="store_true", help="also write complex SLC layers")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("fetch", help="download and verify an archive")
    s.add_argument("--url", required=True)
    s.add_argument("--sha256", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--unpack", help="extract into this directory")
    s.set_defaults(func=cmd_fetch)

    s = sub.add_parser("rasterize", help="burn label polygons into a cube variable")
    s.add_argument("--cube", required=True)
    s.add_argument("--polygons", required=True)
    s.add_argument("--var", default="label")
    s.set_defaults(func=cmd_rasterize)

    s = sub.add_parser("terrain", help="derive slope, aspect and curvature")
    s.add_argument("--cube", required=True)
    s.add_argument("--dem-var", default="dem")
    s.add_argument("--pixel-size", type=float)
    s.set_defaults(func=cmd_terrain)

    s = sub.add_parser("insar", help="interferograms and coherence for timestep pairs")
    s.add_argument("--cube", required=True)
    s.add_argument("--pairs", default="consecutive", help="'consecutive' or e.g. 0-1,1-2")
    s.add_argument("--window", default="5,5")
    s.add_argument("--looks", default="1,5")
    s.add_argument("--slc-prefix", default="slc")
    s.set_defaults(func=cmd_insar)

    s = sub.add_parser("info", help="print cube metadata")
    s.add_argument("--cube", required=True)
    s.set_defaults(func=cmd_info)

    s = sub.add_parser("chips", help="assemble inputs, cut chips and split train/test")
    s.add_argument("--cube", required=True)
    s.add_argument("--config", default="sardem", help="channel set name or JSON {channel_set, k}")
    s.add_argument("--k", type=int, default=4)
    s.add_argument("--test-fraction", type=float, default=61 / 277)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--chip", type=int, default=128)
    s.add_argument("--label-var", default="label")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_chips)

    s = sub.add_parser("train", help="train a model on chips")
    s.add_argument("--chips", required=True)
    s.add_argument("--config", help="JSON with TrainConfig fields plus base_width/depth")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="write score maps for chips")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--chips", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", help="precision-recall curve and AUPRC")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--chips", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("ablate", help="run the channel-set x timestep grid")
    s.add_argument("--config", help="JSON file whose keys mirror the long flags")
    s.add_argument("--cube")
    s.add_argument("--sets")
    s.add_argument("--ks")
    s.add_argument("--seeds", type=_seeds_arg, help="count N (seeds 0..N-1) or a list a,b,c")
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--lr0", type=float)
    s.add_argument("--width", type=int)
    s.add_argument("--depth", type=int)
    s.add_argument("--test-fraction", type=float)
    s.add_argument("--chip", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--time-limit", type=float, help="seconds per cell")
    s.add_argument("--out")
    s.set_defaults(func=cmd_ablate)
    return p


def _merge_ablate_config(args, parser):
    merged = dict(ABLATE_DEFAULTS)
    if args.config:
        cfg = _load_json(args.config)
        unknown = set(cfg) - set(merged) - {"cube", "out"}
        if unknown:
            parser.error(f"unknown keys in {args.config}: {sorted(unknown)}")
        merged.update({k.replace("-", "_"): v for k, v in cfg.items()})
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "func", "command", "verbose"):
            merged[key] = value
    for key in ("cube", "out"):
        if not merged.get(key):
            parser.error(f"ablate needs --{key} (flag or config key)")
    for key, value in merged.items():
        setattr(args, key, value)
    if isinstance(args.sets, list):
        args.sets = ",".join(args.sets)
    if isinstance(args.ks, list):
        args.ks = ",".join(str(k) for k in args.ks)
    if isinstance(args.seeds, list):
        args.seeds = ",".join(str(s) for s in args.seeds)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if args.command == "ablate":
        _merge_ablate_config(args, parser)
    try:
        args.func(args)
    except (SarCubeError, ValueError, KeyError, OSError) as exc:
        print(f"cube {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
