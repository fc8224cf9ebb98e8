"""Dataset manifests, ingestion (alignment checks, caption filtering, split),
and training-record assembly."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import DataError, load_pose_table, read_json, write_json
from .diffusion import TrainRecord
from .encoder import (
    TEXT_GRANULARITIES,
    SyntheticVocabulary,
    cosine_similarity,
    load_captions,
    load_embeddings,
)

DEFAULT_FILTER_THRESHOLD = 0.2
DEFAULT_VAL_FRACTION = 0.10


@dataclass
class DatasetManifest:
    root: Path
    poses: str = "poses.csv"
    image_embeddings: str = "emb_image.embf"
    captions: str | None = "captions.jsonl"
    text_embeddings: dict = field(
        default_factory=lambda: {g: f"emb_text_{g}.embf" for g in TEXT_GRANULARITIES})
    scene_ply: str | None = "scene.ply"
    vocab: str | None = "vocab.json"
    intrinsics: dict | None = None
    split_seed: int = 0
    val_fraction: float = DEFAULT_VAL_FRACTION

    def __post_init__(self):
        self.root = Path(self.root)
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0,1)")

    def path(self, name: str | None) -> Path | None:
        return None if name is None else self.root / name

    def to_dict(self) -> dict:
        return {
            "poses": self.poses,
            "image_embeddings": self.image_embeddings,
            "captions": self.captions,
            "text_embeddings": dict(self.text_embeddings),
            "scene_ply": self.scene_ply,
            "vocab": self.vocab,
            "intrinsics": self.intrinsics,
            "split_seed": self.split_seed,
            "val_fraction": self.val_fraction,
        }

    def save(self, path=None) -> None:
        write_json(path or self.root / "manifest.json", self.to_dict())

    @staticmethod
    def load(path) -> "DatasetManifest":
        path = Path(path)
        if path.is_dir():
            path = path / "manifest.json"
        d = read_json(path)
        return DatasetManifest(
            root=path.parent,
            poses=d["poses"],
            image_embeddings=d["image_embeddings"],
            captions=d.get("captions"),
            text_embeddings=dict(d.get("text_embeddings", {})),
            scene_ply=d.get("scene_ply"),
            vocab=d.get("vocab"),
            intrinsics=d.get("intrinsics"),
            split_seed=int(d.get("split_seed", 0)),
            val_fraction=float(d.get("val_fraction", DEFAULT_VAL_FRACTION)),
        )

    def load_vocab(self) -> SyntheticVocabulary | None:
        p = self.path(self.vocab)
        if p is None or not p.exists():
            return None
        return SyntheticVocabulary.from_dict(read_json(p))


def _check_row_count(name, n_rows, ids):
    if n_rows < len(ids):
        raise DataError(f"{name}: missing embedding row for id {ids[n_rows]!r} "
                        f"({n_rows} rows for {len(ids)} records)")
    if n_rows > len(ids):
        raise DataError(f"{name}: {n_rows - len(ids)} extra rows beyond the pose table")


def ingest_dataset(manifest: DatasetManifest, threshold: float = DEFAULT_FILTER_THRESHOLD,
                   out_path=None) -> dict:
    """Verify cross-file alignment, filter captions by text/image similarity,
    write the deterministic train/val split.  Returns the ingest record."""
    ids, _poses = load_pose_table(manifest.path(manifest.poses))
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})[:10]
        raise DataError(f"duplicate pose ids: {dupes}")
    image_embs = load_embeddings(manifest.path(manifest.image_embeddings))
    _check_row_count("image embeddings", len(image_embs), ids)
    dim = image_embs[0].dim

    text_embs = {}
    for g, rel in sorted(manifest.text_embeddings.items()):
        embs = load_embeddings(manifest.path(rel), granularity=g)
        _check_row_count(f"text embeddings [{g}]", len(embs), ids)
        if embs and embs[0].dim != dim:
            raise DataError(f"text embeddings [{g}]: dim {embs[0].dim} != image dim {dim}")
        text_embs[g] = embs

    if manifest.captions is not None:
        captions = load_captions(manifest.path(manifest.captions))
        missing = [i for i in ids if i not in captions][:10]
        if missing:
            raise DataError(f"captions missing for ids: {missing}")
        extra = sorted(set(captions) - set(ids))[:10]
        if extra:
            raise DataError(f"captions reference unknown ids: {extra}")

    kept = {}
    for i, rid in enumerate(ids):
        tags = [g for g in sorted(text_embs)
                if cosine_similarity(image_embs[i], text_embs[g][i]) >= threshold]
        kept[rid] = tags

    rng = np.random.default_rng(manifest.split_seed)
    perm = rng.permutation(len(ids))
    n_val = int(round(manifest.val_fraction * len(ids)))
    val_idx = set(perm[:n_val].tolist())
    record = {
        "train_ids": [rid for i, rid in enumerate(ids) if i not in val_idx],
        "val_ids": [rid for i, rid in enumerate(ids) if i in val_idx],
        "kept_text": kept,
        "filter_threshold": threshold,
        "split_seed": manifest.split_seed,
        "n_records": len(ids),
        "embedding_dim": dim,
    }
    write_json(out_path or manifest.root / "ingest.json", record)
    return record


def load_records(manifest: DatasetManifest, ingest: dict, split: str = "train"):
    """TrainRecords for one split, text embeddings restricted to kept tags."""
    ids, poses = load_pose_table(manifest.path(manifest.poses))
    index = {rid: i for i, rid in enumerate(ids)}
    image_embs = load_embeddings(manifest.path(manifest.image_embeddings))
    text_embs = {g: load_embeddings(manifest.path(rel), granularity=g)
                 for g, rel in sorted(manifest.text_embeddings.items())}
    want = ingest["train_ids"] if split == "train" else ingest["val_ids"]
    records = []
    for rid in want:
        if rid not in index:
            raise DataError(f"split id {rid!r} not present in pose table")
        i = index[rid]
        tags = [(g, text_embs[g][i]) for g in ingest["kept_text"].get(rid, [])]
        records.append(TrainRecord(poses[i], image_embs[i], tags, rid))
    return records
