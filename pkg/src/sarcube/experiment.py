"""Input-ablation grid: channel sets x timestep counts x seeds.

Each cell runs assemble -> chip -> split -> train -> evaluate. Rows are
appended to ``results.csv`` as cells finish, so an interrupted grid resumes
by skipping cells already on disk.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .chipper import extract_chips, filter_positive, split_chips, tile_grid
from .cube_store import open_cube
from .errors import InvalidSpec
from .metrics import evaluate_chips
from .pgm import mask_image, score_image, write_pgm
from .preprocess import ChannelSet, ChannelStats, InputConfig, raw_channels, standardize
from .segmodel import ModelConfig, TrainConfig, build_model, predict_batch, train

log = logging.getLogger(__name__)

CSV_HEADER = ["channel_set", "k", "seed", "auprc", "prevalence", "train_minutes"]
TIMEOUT = "timeout"


@dataclass
class AblationRow:
    channel_set: str
    k: int
    seed: int
    auprc: float            # nan when the cell timed out
    prevalence: float
    train_minutes: float
    status: str = "ok"

    @property
    def key(self):
        return (self.channel_set, self.k, self.seed)


@dataclass
class AblationResult:
    rows: list = field(default_factory=list)
    # (set, k, seed) -> list of (origin, score map, mask) for the test chips
    maps: dict = field(default_factory=dict)

    def get(self, channel_set, k, seed):
        for r in self.rows:
            if r.key == (ChannelSet.parse(channel_set).value, k, seed):
                return r
        raise KeyError((channel_set, k, seed))

    def mean_auprc(self, channel_set, k):
        vals = [r.auprc for r in self.rows
                if r.channel_set == ChannelSet.parse(channel_set).value and r.k == k
                and r.status == "ok"]
        return float(np.mean(vals)) if vals else math.nan


@dataclass
class CellSettings:
    """Everything a cell needs besides (set, k, seed)."""

    model_width: int = 16
    model_depth: int = 4
    test_fraction: float = 61 / 277
    chip: int = 128
    train: TrainConfig = field(default_factory=TrainConfig)
    keep_maps: bool = True


def _prepare_chips(cube, config: InputConfig, seed, settings: CellSettings, mask=None):
    raw = raw_channels(cube, config)
    if mask is None:
        mask = cube.read_var("label")
    chips = extract_chips(raw, mask, tile_grid(mask.shape, settings.chip), settings.chip)
    chips = filter_positive(chips)
    split_chips(chips, settings.test_fraction, seed)
    train_chips = [c for c in chips if c.split == "train"]
    test_chips = [c for c in chips if c.split == "test"]
    stats = ChannelStats.from_data(config.channels, np.stack([c.inputs for c in train_chips]))
    for c in chips:
        c.inputs = standardize(c.inputs, stats)
    return train_chips, test_chips, stats


def run_cell(cube, channel_set, k, seed, settings: CellSettings):
    """Train and evaluate one grid cell; returns (row, maps)."""
    if isinstance(cube, (str, Path)):
        cube = open_cube(cube)
    config = InputConfig.for_cube(cube, channel_set, k)
    train_chips, test_chips, stats = _prepare_chips(cube, config, seed, settings)
    model = build_model(ModelConfig(config.n_channels, settings.model_width, settings.model_depth),
                        seed=seed)
    tcfg = replace(settings.train, seed=seed)
    t0 = time.perf_counter()
    result = train(model, train_chips, tcfg)
    minutes = (time.perf_counter() - t0) / 60.0
    masks = [c.mask for c in test_chips]
    prevalence = float(np.mean(np.concatenate([m.ravel() for m in masks]) == 1))
    name = config.channel_set.value
    if result.timed_out:
        log.warning("cell %s k=%d seed=%d hit the time limit", name, k, seed)
        return AblationRow(name, k, seed, math.nan, prevalence, minutes, TIMEOUT), []
    scores = predict_batch(model, np.stack([c.inputs for c in test_chips]))
    curve = evaluate_chips(list(scores), masks)
    log.info("cell %s k=%d seed=%d auprc=%.4f prevalence=%.4f (%.1f min)",
             name, k, seed, curve.auprc, curve.prevalence, minutes)
    maps = [(c.origin, s, c.mask) for c, s in zip(test_chips, scores)] if settings.keep_maps else []
    return AblationRow(name, k, seed, curve.auprc, curve.prevalence, minutes), maps


def _run_cell_path(args):
    path, set_name, k, seed, settings = args
    return run_cell(open_cube(path), set_name, k, seed, settings)


def run_ablation(cube, sets, ks, seeds, tcfg: TrainConfig | None = None, out_dir=None,
                 settings: CellSettings | None = None, workers: int = 1) -> AblationResult:
    """Run every (set, k, seed) cell; completed rows in ``out_dir`` are reused."""
    if isinstance(cube, (str, Path)):
        cube = open_cube(cube)
    settings = settings or CellSettings()
    if tcfg is not None:
        settings = replace(settings, train=tcfg)
    sets = [ChannelSet.parse(s).value for s in sets]
    ks = [int(k) for k in ks]
    seeds = [int(s) for s in seeds]
    if not ks or not sets or not seeds:
        raise InvalidSpec("sets, ks and seeds must be non-empty")
    event = int(cube.attrs.get("event_index", -1))
    n_t = cube.dims.get("timestep", 0)
    if any(s != ChannelSet.DEM_only.value for s in sets):
        if event < max(ks) or n_t - event < max(ks):
            raise InvalidSpec(
                f"cube has {event} timesteps before and {n_t - event} after the event; need {max(ks)}")

    result = AblationResult()
    csv_path = None
    done = {}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "results.csv"
        if csv_path.exists():
            done = {r.key: r for r in read_results_csv(csv_path)}
        else:
            _write_header(csv_path)

    todo = []
    for s, k, seed in itertools.product(sets, ks, seeds):
        if (s, k, seed) in done:
            result.rows.append(done[(s, k, seed)])
        else:
            todo.append((s, k, seed))
    if todo:
        log.info("running %d cells (%d already done)", len(todo), len(result.rows))

    def record(row, maps):
        result.rows.append(row)
        if maps:
            result.maps[row.key] = maps
        if csv_path is not None:
            _append_row(csv_path, row)

    # DEM channels do not depend on k, so one DEM_only run per seed serves every k
    dem = ChannelSet.DEM_only.value
    first_k = {}
    for s, k, seed in todo:
        if s == dem:
            first_k.setdefault(seed, k)
    reuse = [(s, k, seed) for s, k, seed in todo if s == dem and k != first_k[seed]]
    todo = [cell for cell in todo if cell not in reuse]

    if workers > 1 and len(todo) > 1:
        args = [(cube.path, s, k, seed, settings) for s, k, seed in todo]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for row, maps in pool.map(_run_cell_path, args):
                record(row, maps)
    else:
        for s, k, seed in todo:
            record(*run_cell(cube, s, k, seed, settings))
    for s, k, seed in reuse:
        src = next(r for r in result.rows if r.key == (dem, first_k[seed], seed))
        record(replace(src, k=k), result.maps.get(src.key, []))
    order = {key: i for i, key in enumerate(itertools.product(sets, ks, seeds))}
    result.rows.sort(key=lambda r: order.get(r.key, len(order)))
    return result


def _fmt(row: AblationRow):
    auprc = TIMEOUT if row.status == TIMEOUT else repr(float(row.auprc))
    return [row.channel_set, row.k, row.seed, auprc, repr(float(row.prevalence)),
            repr(float(row.train_minutes))]


def _write_header(path):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerow(CSV_HEADER)


def _append_row(path, row):
    with open(path, "a", newline="") as fh:
        csv.writer(fh).writerow(_fmt(row))


def write_results_csv(result: AblationResult, path) -> Path:
    path = Path(path)
    _write_header(path)
    for row in result.rows:
        _append_row(path, row)
    return path


def read_results_csv(path) -> list[AblationRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise InvalidSpec(f"{path}: unexpected header {reader.fieldnames}")
        for rec in reader:
            timeout = rec["auprc"] == TIMEOUT
            rows.append(AblationRow(
                rec["channel_set"], int(rec["k"]), int(rec["seed"]),
                math.nan if timeout else float(rec["auprc"]),
                float(rec["prevalence"]), float(rec["train_minutes"]),
                TIMEOUT if timeout else "ok"))
    return rows


def summarize(result: AblationResult) -> list[dict]:
    """Mean and std of AUPRC per (set, k) over completed seeds."""
    groups = {}
    for r in result.rows:
        if r.status == "ok":
            groups.setdefault((r.channel_set, r.k), []).append(r.auprc)
    return [{"channel_set": s, "k": k, "n": len(v), "mean": float(np.mean(v)),
             "std": float(np.std(v))} for (s, k), v in sorted(groups.items())]


def emit_report(result: AblationResult, out_dir) -> Path:
    """results.csv, summary.csv, and per-cell score/mask PGMs under maps/."""
    if not result.rows:
        raise InvalidSpec("nothing to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(result, out_dir / "results.csv")
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["channel_set", "k", "n", "mean", "std"])
        w.writeheader()
        w.writerows(summarize(result))
    for (s, k, seed), maps in result.maps.items():
        cell_dir = out_dir / "maps" / f"{s}_k{k}_seed{seed}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        for (y0, x0), score, mask in maps:
            stem = f"chip_{y0:05d}_{x0:05d}"
            write_pgm(cell_dir / f"{stem}_score.pgm", score_image(score))
            write_pgm(cell_dir / f"{stem}_mask.pgm", mask_image(mask))
    return out_dir
