"""Command-line interface: ingest, make-benchmark, train, sample, refine, eval, render.

Every command accepts --config FILE (TOML or JSON, one section per command);
explicit flags override the config file.  Each command echoes its effective
configuration next to its outputs so a run can be reproduced exactly.

Exit codes: 0 success, 2 validation/config error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dataio, diffusion, evaluation
from .bench import BenchmarkSpec, generate_benchmark, write_benchmark_dir
from .dataio import DataError, read_config_file, resolve_out, write_json
from .datasets import DEFAULT_FILTER_THRESHOLD, DatasetManifest, ingest_dataset, load_records
from .encoder import (
    TEXT_GRANULARITIES,
    EmbeddingError,
    SyntheticVocabulary,
    encode_text,
    load_captions,
    load_embeddings,
)
from .geometry import Pose
from .numericnet import (
    CheckpointError,
    NonFiniteActivationError,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
)
from .refine import CameraIntrinsics, RefineConfig, make_histogram_encoder, refine_distribution
from .splat import Camera, PlyError, SyntheticSceneSpec, load_ply, render

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _section(args, name: str) -> dict:
    if not getattr(args, "config", None):
        return {}
    cfg = read_config_file(args.config)
    sect = cfg.get(name, {})
    if not isinstance(sect, dict):
        raise DataError(f"config section [{name}] must be a table")
    return sect


def _merged(defaults: dict, section: dict, cli: dict) -> dict:
    out = dict(defaults)
    for k, v in section.items():
        if k not in defaults:
            raise ValueError(f"unknown config key {k!r}")
        out[k] = v
    for k, v in cli.items():
        if v is not None:
            out[k] = v
    return out


def _echo_config(target, command: str, effective: dict) -> None:
    target = Path(target)
    path = target / "config.json" if target.is_dir() else target.with_name(
        target.name + ".config.json")
    write_json(path, {"command": command, "effective": effective})


# ---------------------------------------------------------------------------
# condition resolution (shared by sample and refine)


def _granularity_condition(manifest: DatasetManifest, caption_id: str, granularity: str):
    ids, _ = dataio.load_pose_table(manifest.path(manifest.poses))
    if caption_id not in ids:
        raise DataError(f"unknown caption id {caption_id!r}")
    i = ids.index(caption_id)
    g = granularity.lower()
    if g in ("max", "image"):
        return load_embeddings(manifest.path(manifest.image_embeddings))[i]
    if g == "low":
        g = "nouns"
    if g in TEXT_GRANULARITIES:
        rel = manifest.text_embeddings.get(g)
        if rel is None:
            raise DataError(f"dataset has no text embeddings for granularity {g!r}")
        return load_embeddings(manifest.path(rel), granularity=g)[i]
    if g == "high":
        vocab = manifest.load_vocab()
        if vocab is None or manifest.captions is None:
            raise DataError("granularity 'high' needs captions and a synthetic vocabulary")
        caps = load_captions(manifest.path(manifest.captions))
        if caption_id not in caps:
            raise DataError(f"caption file has no entry for id {caption_id!r}")
        return encode_text(caps[caption_id].text_for("high"), vocab, "long")
    raise ValueError(f"unknown granularity {granularity!r}")


def _resolve_condition(args):
    """ConditionEmbedding from --text/--caption-id/--embedding-file flags."""
    if getattr(args, "text", None):
        if getattr(args, "vocab", None):
            vocab = SyntheticVocabulary.from_dict(dataio.read_json(args.vocab))
        elif getattr(args, "data", None):
            vocab = DatasetManifest.load(args.data).load_vocab()
            if vocab is None:
                raise DataError("dataset has no synthetic vocabulary; pass --vocab")
        else:
            raise ValueError("--text needs --vocab or --data")
        return encode_text(args.text, vocab, "nouns")
    if getattr(args, "caption_id", None):
        if not getattr(args, "data", None):
            raise ValueError("--caption-id needs --data")
        manifest = DatasetManifest.load(args.data)
        return _granularity_condition(manifest, args.caption_id,
                                      getattr(args, "granularity", None) or "max")
    if getattr(args, "embedding_file", None):
        embs = load_embeddings(args.embedding_file,
                               granularity=getattr(args, "granularity", None) or None)
        row = getattr(args, "row", None) or 0
        if not 0 <= row < len(embs):
            raise DataError(f"embedding row {row} out of range (file has {len(embs)})")
        return embs[row]
    raise ValueError("no condition given: use --text, --caption-id, or --embedding-file")


# ---------------------------------------------------------------------------
# commands


def cmd_make_benchmark(args) -> int:
    defaults = {"seed": 0, "cameras": 200, "classes": ",".join(
        ["tree", "car", "house", "tower"]), "instances": 2,
        "gaussians": 30, "image_size": 64, "embed_dim": 64, "fov_deg": 65.0}
    eff = _merged(defaults, _section(args, "benchmark"), {
        "seed": args.seed, "cameras": args.cameras, "classes": args.classes,
        "instances": args.instances, "gaussians": args.gaussians,
        "image_size": args.image_size, "embed_dim": args.embed_dim,
        "fov_deg": args.fov_deg})
    classes = [c.strip() for c in str(eff["classes"]).split(",") if c.strip()]
    spec = BenchmarkSpec(
        scene=SyntheticSceneSpec(classes, instances_per_class=int(eff["instances"]),
                                 gaussians_per_instance=int(eff["gaussians"])),
        n_cameras=int(eff["cameras"]), image_size=int(eff["image_size"]),
        embed_dim=int(eff["embed_dim"]), fov_deg=float(eff["fov_deg"]))
    out = resolve_out(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = generate_benchmark(spec, int(eff["seed"]))
    write_benchmark_dir(data, out)
    _echo_config(out, "make-benchmark", eff)
    print(f"benchmark written to {out} ({len(data.ids)} cameras, "
          f"{len(data.scene)} gaussians)")
    return EXIT_OK


def cmd_ingest(args) -> int:
    manifest = DatasetManifest.load(args.data)
    eff = _merged({"threshold": DEFAULT_FILTER_THRESHOLD,
                   "split_seed": manifest.split_seed,
                   "val_fraction": manifest.val_fraction},
                  _section(args, "ingest"),
                  {"threshold": args.threshold, "split_seed": args.split_seed,
                   "val_fraction": args.val_fraction})
    manifest.split_seed = int(eff["split_seed"])
    manifest.val_fraction = float(eff["val_fraction"])
    record = ingest_dataset(manifest, float(eff["threshold"]))
    _echo_config(manifest.root / "ingest.json", "ingest", eff)
    print(f"ingested {record['n_records']} records: "
          f"{len(record['train_ids'])} train / {len(record['val_ids'])} val")
    return EXIT_OK


def _load_ingested(data_dir):
    manifest = DatasetManifest.load(data_dir)
    ingest_path = manifest.root / "ingest.json"
    if not ingest_path.exists():
        raise DataError(f"{ingest_path} not found; run `poseloc ingest` first")
    return manifest, dataio.read_json(ingest_path)


def cmd_train(args) -> int:
    defaults = {
        "steps": 3000, "warmup": 100, "batch_size": 64, "arch": "mlp",
        "layers": None, "hidden": 128, "d_psi": 64, "heads": 4,
        "lr": 1e-4, "loss": "l1", "predict": "x0", "seed": 0,
        "beta_swap": 0.7, "timesteps": diffusion.DEFAULT_T,
        "beta_start": diffusion.DEFAULT_BETA_START,
        "beta_end": diffusion.DEFAULT_BETA_END,
        "timestep_mode": "iid", "distinct_timesteps": 90,
    }
    eff = _merged(defaults, _section(args, "train"), {
        "steps": args.steps, "warmup": args.warmup, "batch_size": args.batch_size,
        "arch": args.arch, "layers": args.layers, "hidden": args.hidden,
        "d_psi": args.d_psi, "heads": args.heads, "lr": args.lr, "loss": args.loss,
        "predict": args.predict, "seed": args.seed, "beta_swap": args.beta_swap,
        "timesteps": args.timesteps, "beta_start": args.beta_start,
        "beta_end": args.beta_end, "timestep_mode": args.timestep_mode,
        "distinct_timesteps": args.distinct_timesteps})
    if eff["layers"] is None:
        eff["layers"] = 8 if eff["arch"] == "transformer" else 3

    manifest, ingest = _load_ingested(args.data)
    records = load_records(manifest, ingest, "train")
    if not records:
        raise DataError("no training records after split")
    sched = diffusion.make_schedule(int(eff["timesteps"]), float(eff["beta_start"]),
                                    float(eff["beta_end"]))
    cfg = TrainConfig(
        learning_rate=float(eff["lr"]), warmup_steps=int(eff["warmup"]),
        total_steps=int(eff["steps"]), batch_size=int(eff["batch_size"]),
        layers=int(eff["layers"]), hidden_dim=int(eff["hidden"]),
        d_psi=int(eff["d_psi"]), cond_dim=int(ingest["embedding_dim"]),
        loss_kind=str(eff["loss"]), prediction_target=str(eff["predict"]),
        seed=int(eff["seed"]), arch=str(eff["arch"]), heads=int(eff["heads"]),
        timestep_mode=str(eff["timestep_mode"]),
        distinct_timesteps=int(eff["distinct_timesteps"]))

    params = None
    start_step = 0
    norm = None
    if args.resume:
        params, norm_d, start_step, _extra = load_checkpoint(args.resume)
        if params.config.to_dict() != cfg.to_dict():
            raise ValueError("resume config does not match checkpoint config")
        norm = diffusion.SceneNormalization.from_dict(norm_d)

    out = resolve_out(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params, norm, history = diffusion.train(records, cfg, float(eff["beta_swap"]),
                                            sched, norm, params, start_step)
    extra = {"beta_swap": float(eff["beta_swap"]),
             "schedule": {"T": sched.T, "beta_start": float(eff["beta_start"]),
                          "beta_end": float(eff["beta_end"])}}
    save_checkpoint(out / "checkpoint.ckpt", params, norm, cfg.total_steps, extra)
    diffusion.write_loss_history(out / "loss.csv", history)
    _echo_config(out, "train", eff)
    final = history[-1][2] if history else float("nan")
    print(f"trained {cfg.total_steps - start_step} steps; final loss {final:.6f}; "
          f"checkpoint at {out / 'checkpoint.ckpt'}")
    return EXIT_OK


def cmd_sample(args) -> int:
    params, norm_d, _step, extra = load_checkpoint(args.checkpoint)
    if norm_d is None:
        raise CheckpointError("checkpoint carries no scene normalization")
    norm = diffusion.SceneNormalization.from_dict(norm_d)
    sched_d = extra.get("schedule", {})
    sched = diffusion.make_schedule(
        int(sched_d.get("T", diffusion.DEFAULT_T)),
        float(sched_d.get("beta_start", diffusion.DEFAULT_BETA_START)),
        float(sched_d.get("beta_end", diffusion.DEFAULT_BETA_END)))
    cond = _resolve_condition(args)
    if cond.dim != params.config.cond_dim:
        raise DataError(f"condition dim {cond.dim} does not match model "
                        f"cond_dim {params.config.cond_dim}")
    rng = np.random.default_rng(args.seed)
    poses = diffusion.sample(params, cond, args.count, sched, norm, rng)
    out = resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ids = [f"s{i:04d}" for i in range(len(poses))]
    dataio.save_pose_table(out, ids, poses)
    if args.heatmap:
        if args.data:
            _, dposes = dataio.load_pose_table(
                DatasetManifest.load(args.data).path("poses.csv"))
            pts = np.stack([p.translation for p in dposes])
        else:
            pts = np.stack([p.translation for p in poses])
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        dataio.write_heatmap(resolve_out(args.heatmap),
                             np.stack([p.translation for p in poses]), lo, hi)
    _echo_config(out, "sample", {
        "checkpoint": str(args.checkpoint), "count": args.count, "seed": args.seed,
        "condition": {"text": args.text, "caption_id": args.caption_id,
                      "granularity": args.granularity,
                      "embedding_file": args.embedding_file, "row": args.row}})
    print(f"wrote {len(poses)} samples to {out}")
    return EXIT_OK


def cmd_refine(args) -> int:
    defaults = {"tau1": 0.17, "tau2": 0.2, "iterations": 100, "lr": 5e-3,
                "subset_fraction": 0.1, "delta_rot_deg": 0.5, "delta_trans": None,
                "resolution": 224, "fov_deg": 60.0, "seed": 0, "workers": 1,
                "near": 0.1}
    eff = _merged(defaults, _section(args, "refine"), {
        "tau1": args.tau1, "tau2": args.tau2, "iterations": args.iterations,
        "lr": args.lr, "subset_fraction": args.subset_fraction,
        "delta_rot_deg": args.delta_rot_deg, "delta_trans": args.delta_trans,
        "resolution": args.resolution, "fov_deg": args.fov_deg, "seed": args.seed,
        "workers": args.workers, "near": args.near})

    ids, samples = dataio.load_pose_table(args.samples)
    scene = load_ply(args.scene)
    if scene.landmark_class is None:
        raise DataError("refine needs a landmark-tagged (synthetic) scene PLY")
    if args.vocab:
        vocab = SyntheticVocabulary.from_dict(dataio.read_json(args.vocab))
    elif args.data:
        vocab = DatasetManifest.load(args.data).load_vocab()
        if vocab is None:
            raise DataError("dataset has no synthetic vocabulary; pass --vocab")
    else:
        raise ValueError("refine needs --vocab or --data for the render encoder")
    cond = _resolve_condition(args)

    if eff["delta_trans"] is None:
        span = scene.centroids.max(axis=0) - scene.centroids.min(axis=0)
        eff["delta_trans"] = 0.005 * float(np.linalg.norm(span))
    fov = math.radians(float(eff["fov_deg"]))
    cfg = RefineConfig(
        tau1=float(eff["tau1"]), tau2=float(eff["tau2"]),
        iterations=int(eff["iterations"]), learning_rate=float(eff["lr"]),
        delta_rot=math.radians(float(eff["delta_rot_deg"])),
        delta_trans=float(eff["delta_trans"]),
        subset_fraction=float(eff["subset_fraction"]),
        intrinsics=CameraIntrinsics(fov, fov, int(eff["resolution"]),
                                    int(eff["resolution"])))
    encoder = make_histogram_encoder(vocab, near=float(eff["near"]))
    rng = np.random.default_rng(int(eff["seed"]))
    result = refine_distribution(samples, cond, scene, cfg, rng,
                                 image_encoder=encoder, workers=int(eff["workers"]))

    out = resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    surviving_ids = []
    kept = 0
    refined_map = {o.sample_index: o for o in result.outcomes}
    for i in range(len(samples)):
        if i in refined_map and not refined_map[i].accepted:
            continue
        surviving_ids.append(ids[i])
        kept += 1
    dataio.save_pose_table(out, surviving_ids, result.poses)
    if args.outcomes:
        opath = resolve_out(args.outcomes)
        with open(opath, "w", encoding="utf-8") as f:
            for o in result.outcomes:
                f.write(json.dumps({
                    "sample_id": ids[o.sample_index], "accepted": o.accepted,
                    "sim_init": o.initial_similarity, "sim_final": o.final_similarity,
                    "iters": o.iterations_run}, sort_keys=True) + "\n")
    _echo_config(out, "refine", eff)
    print(f"refined {len(result.outcomes)} of {len(samples)} samples; "
          f"{kept} surviving -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    defaults = {"k": "5,10,15", "translation_unit": 0.10, "rotation_unit": 1.0,
                "trials": 20, "require_rotation": True, "seed": 0}
    eff = _merged(defaults, _section(args, "eval"), {
        "k": args.k, "translation_unit": args.translation_unit,
        "rotation_unit": args.rotation_unit, "trials": args.trials,
        "require_rotation": (False if args.no_rotation else None),
        "seed": args.seed})
    k_values = tuple(float(v) for v in str(eff["k"]).split(","))
    cfg = evaluation.RDAConfig(
        k_values=k_values, translation_unit=float(eff["translation_unit"]),
        rotation_unit=float(eff["rotation_unit"]), random_trials=int(eff["trials"]),
        require_rotation=bool(eff["require_rotation"]))

    gt_ids, gt_poses = dataio.load_pose_table(args.gt)
    gt_index = {rid: p for rid, p in zip(gt_ids, gt_poses)}
    scale_src = args.scale_from or args.gt
    _, scale_poses = dataio.load_pose_table(scale_src)
    scale = evaluation.SceneScale.fit(scale_poses)
    bounds_src = args.bounds_from or scale_src
    _, bounds_poses = dataio.load_pose_table(bounds_src)
    bounds = evaluation.Bounds.fit(bounds_poses)

    groups: dict[str, list] = {}
    for spec in args.samples:
        parts = spec.split(":", 2)
        if len(parts) != 3:
            raise ValueError(f"--samples must be GRANULARITY:GT_ID:PATH, got {spec!r}")
        gran, gt_id, path = parts
        if gt_id not in gt_index:
            raise DataError(f"gt id {gt_id!r} not present in {args.gt}")
        _, poses = dataio.load_pose_table(path)
        if not poses:
            raise DataError(f"{path}: empty sample file")
        groups.setdefault(gran, []).append((poses, gt_index[gt_id]))

    rng = np.random.default_rng(int(eff["seed"]))
    entries = []
    for gran in sorted(groups):
        sets = [s for s, _ in groups[gran]]
        gts = [g for _, g in groups[gran]]
        for k in cfg.k_values:
            entries.append(evaluation.rda_pooled(sets, gts, k, cfg, scale, bounds,
                                                 rng, granularity=gran))
    out = resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    evaluation.write_report(out, entries)
    _echo_config(out, "eval", {**eff, "samples": list(args.samples),
                               "gt": str(args.gt)})
    for e in entries:
        rda_s = "undefined" if e.rda is None else f"{e.rda:.3f}"
        print(f"granularity={e.granularity} k={e.k:g} acc_pred={e.acc_pred:.4f} "
              f"acc_rand={e.acc_rand_mean:.6f} rda={rda_s}")
    return EXIT_OK


def cmd_render(args) -> int:
    scene = load_ply(args.scene)
    if args.pose:
        vals = [float(v) for v in args.pose.split(",")]
        if len(vals) != 7:
            raise ValueError("--pose needs 7 comma-separated values qw,qx,qy,qz,tx,ty,tz")
        pose = Pose(np.array(vals[:4]), np.array(vals[4:]))
    elif args.poses and args.pose_id:
        ids, poses = dataio.load_pose_table(args.poses)
        if args.pose_id not in ids:
            raise DataError(f"pose id {args.pose_id!r} not in {args.poses}")
        pose = poses[ids.index(args.pose_id)]
    else:
        raise ValueError("give --pose or (--poses and --pose-id)")
    fov_x = math.radians(args.fov_x_deg if args.fov_x_deg else args.fov_deg)
    fov_y = math.radians(args.fov_y_deg if args.fov_y_deg else args.fov_deg)
    cam = Camera(pose, fov_x, fov_y, args.width, args.height)
    bg = tuple(float(v) for v in args.bg.split(","))
    img = render(scene, cam, background=bg, sh_degree=args.sh_degree, near=args.near)
    out = resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataio.write_image(out, img.pixels)
    _echo_config(out, "render", {
        "scene": str(args.scene), "width": args.width, "height": args.height,
        "fov_x": fov_x, "fov_y": fov_y, "bg": args.bg, "sh_degree": args.sh_degree,
        "near": args.near})
    print(f"rendered {args.width}x{args.height} image to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="poseloc",
        description="Text/image-conditioned 6DoF pose distributions over Gaussian scenes")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="TOML/JSON config file with per-command sections")

    p = sub.add_parser("make-benchmark", help="generate a synthetic landmark benchmark")
    add_config(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--cameras", type=int)
    p.add_argument("--classes", help="comma-separated landmark class names")
    p.add_argument("--instances", type=int, help="instances per class")
    p.add_argument("--gaussians", type=int, help="gaussians per instance")
    p.add_argument("--image-size", type=int, dest="image_size")
    p.add_argument("--embed-dim", type=int, dest="embed_dim")
    p.add_argument("--fov-deg", type=float, dest="fov_deg")
    p.set_defaults(func=cmd_make_benchmark)

    p = sub.add_parser("ingest", help="validate a dataset, filter captions, write the split")
    add_config(p)
    p.add_argument("--data", required=True, help="dataset dir or manifest.json")
    p.add_argument("--threshold", type=float, help="caption filter cosine threshold")
    p.add_argument("--split-seed", type=int, dest="split_seed")
    p.add_argument("--val-fraction", type=float, dest="val_fraction")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train the conditional pose diffusion model")
    add_config(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--arch", choices=["transformer", "mlp"])
    p.add_argument("--layers", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--d-psi", type=int, dest="d_psi")
    p.add_argument("--heads", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--loss", choices=["l1", "l2"])
    p.add_argument("--predict", choices=["x0", "noise"])
    p.add_argument("--seed", type=int)
    p.add_argument("--beta-swap", type=float, dest="beta_swap")
    p.add_argument("--timesteps", type=int)
    p.add_argument("--beta-start", type=float, dest="beta_start")
    p.add_argument("--beta-end", type=float, dest="beta_end")
    p.add_argument("--timestep-mode", choices=["iid", "distinct"], dest="timestep_mode")
    p.add_argument("--distinct-timesteps", type=int, dest="distinct_timesteps")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="draw pose samples from a trained model")
    add_config(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--text", help="raw text condition (synthetic encoder)")
    p.add_argument("--vocab", help="vocab.json for --text")
    p.add_argument("--data", help="dataset dir (for --caption-id or --text)")
    p.add_argument("--caption-id", dest="caption_id")
    p.add_argument("--granularity",
                   help="low|high|max or nouns|short|mid|long|image (default max)")
    p.add_argument("--embedding-file", dest="embedding_file")
    p.add_argument("--row", type=int)
    p.add_argument("--heatmap", help="write a top-down density image here")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("refine", help="render-and-compare refinement of a sample file")
    add_config(p)
    p.add_argument("--samples", required=True)
    p.add_argument("--scene", required=True, help="landmark-tagged scene PLY")
    p.add_argument("--out", required=True)
    p.add_argument("--outcomes", help="JSON-lines outcome log")
    p.add_argument("--vocab")
    p.add_argument("--data")
    p.add_argument("--text")
    p.add_argument("--caption-id", dest="caption_id")
    p.add_argument("--granularity")
    p.add_argument("--embedding-file", dest="embedding_file")
    p.add_argument("--row", type=int)
    p.add_argument("--tau1", type=float)
    p.add_argument("--tau2", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--subset-fraction", type=float, dest="subset_fraction")
    p.add_argument("--delta-rot-deg", type=float, dest="delta_rot_deg")
    p.add_argument("--delta-trans", type=float, dest="delta_trans")
    p.add_argument("--resolution", type=int)
    p.add_argument("--fov-deg", type=float, dest="fov_deg")
    p.add_argument("--near", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", help="RDA report for sample files against ground truth")
    add_config(p)
    p.add_argument("--gt", required=True, help="ground-truth pose table")
    p.add_argument("--samples", action="append", required=True,
                   metavar="GRANULARITY:GT_ID:PATH")
    p.add_argument("--out", required=True)
    p.add_argument("--k")
    p.add_argument("--translation-unit", type=float, dest="translation_unit")
    p.add_argument("--rotation-unit", type=float, dest="rotation_unit")
    p.add_argument("--trials", type=int)
    p.add_argument("--no-rotation", action="store_true", dest="no_rotation")
    p.add_argument("--scale-from", dest="scale_from",
                   help="pose table defining the scene scale (default: --gt)")
    p.add_argument("--bounds-from", dest="bounds_from",
                   help="pose table defining random-pose bounds (default: scale table)")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="rasterize a scene from a pose")
    add_config(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True, help=".ppm or .png")
    p.add_argument("--pose", help="qw,qx,qy,qz,tx,ty,tz")
    p.add_argument("--poses", help="pose table")
    p.add_argument("--pose-id", dest="pose_id")
    p.add_argument("--width", type=int, default=224)
    p.add_argument("--height", type=int, default=224)
    p.add_argument("--fov-deg", type=float, default=60.0, dest="fov_deg")
    p.add_argument("--fov-x-deg", type=float, dest="fov_x_deg")
    p.add_argument("--fov-y-deg", type=float, dest="fov_y_deg")
    p.add_argument("--bg", default="0,0,0")
    p.add_argument("--sh-degree", type=int, default=0, dest="sh_degree")
    p.add_argument("--near", type=float, default=0.1)
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataError, PlyError, EmbeddingError, CheckpointError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (diffusion.TrainingDivergedError, NonFiniteActivationError,
            FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
