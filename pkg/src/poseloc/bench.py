"""Synthetic desk-scale benchmark: landmark scene + cameras + captions + embeddings.

Cameras orbit landmark instances and look at them; each view is summarized
as a visible-class histogram which drives both the image embedding and the
caption templates, so text and image conditions live in one embedding space.
Caption sentences embed exact counts ("... 12 tree ...") so the text parser
can reconstruct the histogram at the granularity the sentence carries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .encoder import (
    CaptionSet,
    MAX_NOUNS,
    SyntheticVocabulary,
    encode_text,
    ranked_base_classes,
    synthetic_encode,
)
from .splat import Camera, SyntheticSceneSpec, look_at, make_synthetic_scene, \
    visible_landmark_histogram

DEFAULT_CLASSES = ["tree", "car", "house", "tower"]


@dataclass
class BenchmarkSpec:
    scene: SyntheticSceneSpec = field(
        default_factory=lambda: SyntheticSceneSpec(DEFAULT_CLASSES))
    n_cameras: int = 200
    radius_range: tuple = (2.5, 5.0)
    height_range: tuple = (1.0, 2.5)
    fov_deg: float = 65.0
    image_size: int = 64
    embed_dim: int = 64
    target_jitter: float = 0.3

    def __post_init__(self):
        if self.n_cameras < 1:
            raise ValueError("benchmark needs at least one camera")

    def intrinsics_dict(self) -> dict:
        fov = math.radians(self.fov_deg)
        return {"fov_x": fov, "fov_y": fov,
                "width": self.image_size, "height": self.image_size}

    def to_dict(self) -> dict:
        return {
            "scene": self.scene.to_dict(),
            "n_cameras": self.n_cameras,
            "radius_range": list(self.radius_range),
            "height_range": list(self.height_range),
            "fov_deg": self.fov_deg,
            "image_size": self.image_size,
            "embed_dim": self.embed_dim,
            "target_jitter": self.target_jitter,
        }

    @staticmethod
    def from_dict(d: dict) -> "BenchmarkSpec":
        out = BenchmarkSpec()
        if "scene" in d:
            out.scene = SyntheticSceneSpec.from_dict(d["scene"])
        for k in ("n_cameras", "image_size", "embed_dim"):
            if k in d:
                setattr(out, k, int(d[k]))
        for k in ("fov_deg", "target_jitter"):
            if k in d:
                setattr(out, k, float(d[k]))
        for k in ("radius_range", "height_range"):
            if k in d:
                setattr(out, k, tuple(d[k]))
        return out


def caption_from_histogram(hist, vocab: SyntheticVocabulary) -> CaptionSet:
    """Noun list (presence) plus 1/2/3-sentence captions ranking the most
    visible base classes with parser-recognized quantifiers.  Captions never
    distinguish instances of a class."""
    ranked = [b for b, _ in ranked_base_classes(hist, vocab)]
    if not ranked:
        raise ValueError("empty histogram has no caption")
    nouns = ranked[:MAX_NOUNS]
    s1 = f"A scene dominated by {ranked[0]}."
    s2 = (f"There are several {ranked[1]} nearby."
          if len(ranked) >= 2 else "The surrounding area is open.")
    s3 = (f"A few {ranked[2]} appear in the distance."
          if len(ranked) >= 3 else "Nothing else stands out.")
    return CaptionSet(nouns, s1, f"{s1} {s2}", f"{s1} {s2} {s3}")


@dataclass
class BenchmarkData:
    spec: BenchmarkSpec
    seed: int
    scene: object
    instance_centers: np.ndarray
    vocab: SyntheticVocabulary
    ids: list
    poses: list
    histograms: list
    captions: dict  # id -> CaptionSet
    image_embeddings: list
    text_embeddings: dict  # granularity -> list aligned with ids


def generate_benchmark(spec: BenchmarkSpec, seed: int) -> BenchmarkData:
    """Deterministic benchmark synthesis; same (spec, seed) => identical data.

    Vocabulary channels are instance-level ("tree#0", "tree#1", ...): image
    embeddings are instance-specific while any text condition spreads its
    weight across all instances of the classes it mentions."""
    scene, centers = make_synthetic_scene(spec.scene, seed)
    channels = [f"{name}#{k}" for name in spec.scene.classes
                for k in range(spec.scene.instances_per_class)]
    vocab = SyntheticVocabulary(channels, spec.embed_dim, seed + 1)
    rng = np.random.default_rng([seed, 2])
    fov = math.radians(spec.fov_deg)
    target_z = 0.5 * (spec.scene.z_range[0] + spec.scene.z_range[1])

    ids, poses, hists = [], [], []
    for i in range(spec.n_cameras):
        hist = None
        for _ in range(40):
            inst = int(rng.integers(len(centers)))
            theta = rng.uniform(0.0, 2.0 * math.pi)
            radius = rng.uniform(*spec.radius_range)
            height = rng.uniform(*spec.height_range)
            center = centers[inst]
            position = center + np.array(
                [radius * math.cos(theta), radius * math.sin(theta), height])
            target = center + np.concatenate(
                [rng.normal(0.0, spec.target_jitter, 2), [target_z]])
            pose = look_at(position, target)
            cam = Camera(pose, fov, fov, spec.image_size, spec.image_size)
            h = visible_landmark_histogram(scene, cam, vocab.n_classes)
            if h.sum() > 0:
                hist = h
                break
        if hist is None:
            raise RuntimeError(f"camera {i}: no landmark visible after 40 attempts")
        ids.append(f"cam{i:04d}")
        poses.append(pose)
        hists.append(hist)

    captions = {}
    image_embs = []
    text_embs = {g: [] for g in ("nouns", "short", "mid", "long")}
    for rid, hist in zip(ids, hists):
        cap = caption_from_histogram(hist, vocab)
        captions[rid] = cap
        image_embs.append(synthetic_encode(hist, vocab, "image", "image"))
        for g in text_embs:
            text_embs[g].append(encode_text(cap.text_for(g), vocab, g))
    return BenchmarkData(spec, seed, scene, centers, vocab, ids, poses, hists,
                         captions, image_embs, text_embs)


def write_benchmark_dir(data: BenchmarkData, out_dir) -> "DatasetManifest":
    """Persist a generated benchmark as a dataset directory with a manifest."""
    from pathlib import Path

    from .dataio import save_pose_table, write_json
    from .datasets import DatasetManifest
    from .encoder import save_captions, save_embeddings
    from .splat import save_ply

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_ply(data.scene, out / "scene.ply")
    write_json(out / "vocab.json", data.vocab.to_dict())
    save_pose_table(out / "poses.csv", data.ids, data.poses)
    save_captions(out / "captions.jsonl", data.captions)
    save_embeddings(out / "emb_image.embf", data.image_embeddings, "image")
    for g, embs in data.text_embeddings.items():
        save_embeddings(out / f"emb_text_{g}.embf", embs, "text")
    write_json(out / "benchmark.json", {"seed": data.seed, "spec": data.spec.to_dict()})
    manifest = DatasetManifest(
        root=out,
        intrinsics=data.spec.intrinsics_dict(),
        split_seed=data.seed,
    )
    manifest.save()
    return manifest
