"""Condition embeddings: synthetic landmark encoder, prompt templates, filtering, file I/O.

Real CLIP features are ingested from embedding files computed offline.  For
desk-scale scenes a deterministic stand-in encoder maps landmark-class
histograms into a shared text/image embedding space: identical histograms
produce identical unit vectors regardless of which modality they came from.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GRANULARITIES = ("nouns", "short", "mid", "long", "image")
TEXT_GRANULARITIES = ("nouns", "short", "mid", "long")
MODALITIES = ("text", "image")
MAX_NOUNS = 10

NOUN_PROMPT_PREFIX = "A view of "


class EmbeddingError(ValueError):
    pass


@dataclass
class ConditionEmbedding:
    """Unit-norm feature vector with its source modality and granularity tag."""

    vector: np.ndarray
    modality: str = "text"
    granularity: str = "nouns"

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64).reshape(-1)
        n = np.linalg.norm(v)
        if not np.isfinite(n) or n == 0.0:
            raise EmbeddingError("embedding has zero or non-finite norm")
        self.vector = v / n
        if self.modality not in MODALITIES:
            raise EmbeddingError(f"unknown modality {self.modality!r}")
        if self.granularity not in GRANULARITIES:
            raise EmbeddingError(f"unknown granularity {self.granularity!r}")

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


@dataclass
class CaptionSet:
    """Per-record captions at the four text granularities."""

    nouns: list[str]
    short: str
    mid: str
    long: str

    def __post_init__(self):
        if len(self.nouns) > MAX_NOUNS:
            raise ValueError(f"at most {MAX_NOUNS} nouns allowed, got {len(self.nouns)}")

    def text_for(self, granularity: str) -> str:
        """Caption text for one granularity tag (or combined eval levels

        "low" = noun prompt, "high" = all sentences, "max" = nouns + sentences).
        """
        if granularity == "nouns" or granularity == "low":
            return format_noun_prompt(self.nouns)
        if granularity in ("short", "mid", "long"):
            return getattr(self, granularity)
        if granularity == "high":
            return " ".join([self.short, self.mid, self.long])
        if granularity == "max":
            return " ".join([format_noun_prompt(self.nouns), self.short, self.mid, self.long])
        raise ValueError(f"unknown granularity {granularity!r}")


@dataclass
class SyntheticVocabulary:
    """Landmark classes plus a seeded orthonormal projection into embedding space."""

    classes: list[str]
    d: int = 64
    seed: int = 0
    _projection: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.d < len(self.classes):
            raise ValueError("embedding dim must be >= number of classes")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("duplicate class names")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def projection(self) -> np.ndarray:
        """(d, n_classes) matrix with orthonormal columns, fixed by seed."""
        if self._projection is None:
            rng = np.random.default_rng(self.seed)
            m = rng.standard_normal((self.d, self.d))
            q, r = np.linalg.qr(m)
            q = q * np.sign(np.diag(r))  # sign-fix so the factorization is unique
            self._projection = q[:, : self.n_classes].copy()
        return self._projection

    def class_index(self, name: str) -> int:
        return self.classes.index(name)

    def to_dict(self) -> dict:
        return {"classes": list(self.classes), "d": self.d, "seed": self.seed}

    @staticmethod
    def from_dict(d: dict) -> "SyntheticVocabulary":
        return SyntheticVocabulary(list(d["classes"]), int(d["d"]), int(d["seed"]))


def format_noun_prompt(nouns) -> str:
    if not nouns:
        raise ValueError("noun list is empty")
    return NOUN_PROMPT_PREFIX + ", ".join(nouns)


def parse_noun_prompt(text: str) -> list[str]:
    """Inverse of format_noun_prompt."""
    if not text.startswith(NOUN_PROMPT_PREFIX):
        raise ValueError(f"not a noun prompt: {text!r}")
    return [n.strip() for n in text[len(NOUN_PROMPT_PREFIX):].split(",") if n.strip()]


def synthetic_encode(histogram, vocab: SyntheticVocabulary, modality: str = "image",
                     granularity: str = "image") -> ConditionEmbedding:
    """normalize(Proj @ sqrt(histogram)); identical histograms from the text
    and image routes land on the same vector."""
    h = np.asarray(histogram, dtype=np.float64).reshape(-1)
    if h.shape[0] != vocab.n_classes:
        raise EmbeddingError(
            f"histogram length {h.shape[0]} does not match vocabulary size {vocab.n_classes}"
        )
    if np.any(h < 0):
        raise EmbeddingError("histogram has negative counts")
    if not np.any(h > 0):
        raise EmbeddingError("empty content: all-zero histogram")
    v = vocab.projection @ np.sqrt(h)
    return ConditionEmbedding(v, modality, granularity)


# weights assigned to ranked caption mentions: "dominated by X" > "several X"
# > "a few X" > bare mention
RANK_WEIGHTS = (4.0, 2.0, 1.0)


def base_name(channel: str) -> str:
    """Vocabulary channels may be instance-specific ("tree#0", "tree#1");
    captions only ever speak the base class name ("tree")."""
    return channel.split("#", 1)[0]


def parse_text_histogram(text: str, vocab: SyntheticVocabulary) -> np.ndarray:
    """Class-weight histogram over vocabulary channels from caption text.

    Recognized per base class: explicit counts ("12 tree"), rank quantifiers
    ("dominated by tree" -> 4, "several tree" -> 2, "few tree" -> 1), and
    bare mentions (presence 1).  The strongest mention wins and is assigned
    to every channel of that class (text cannot tell instances apart);
    unknown words are ignored.
    """
    low = text.lower()
    h = np.zeros(vocab.n_classes)
    weight_by_base = {}
    for name in {base_name(c) for c in vocab.classes}:
        pat = re.escape(name.lower())
        weights = [float(m.group(1)) for m in re.finditer(rf"(\d+)\s+{pat}\b", low)]
        if re.search(rf"dominated by {pat}\b", low):
            weights.append(RANK_WEIGHTS[0])
        if re.search(rf"several {pat}\b", low):
            weights.append(RANK_WEIGHTS[1])
        if re.search(rf"(?:a )?few {pat}\b", low):
            weights.append(RANK_WEIGHTS[2])
        if not weights and re.search(rf"\b{pat}\b", low):
            weights.append(1.0)
        if weights:
            weight_by_base[name] = max(weights)
    for i, channel in enumerate(vocab.classes):
        h[i] = weight_by_base.get(base_name(channel), 0.0)
    return h


def encode_text(text: str, vocab: SyntheticVocabulary,
                granularity: str = "nouns") -> ConditionEmbedding:
    """Parse caption text and encode it; errors if no known class is mentioned."""
    return synthetic_encode(parse_text_histogram(text, vocab), vocab, "text", granularity)


def ranked_base_classes(full_hist, vocab: SyntheticVocabulary) -> list[tuple[str, float]]:
    """(base class, summed weight) pairs sorted by weight desc, name asc."""
    totals: dict[str, float] = {}
    for i, channel in enumerate(vocab.classes):
        if full_hist[i] > 0:
            b = base_name(channel)
            totals[b] = totals.get(b, 0.0) + float(full_hist[i])
    return sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))


def granularity_histogram(full_hist, granularity: str,
                          vocab: SyntheticVocabulary) -> np.ndarray:
    """Project the full visible-channel histogram down to one granularity level.

    Text levels see only base classes: nouns gives presence 1 to every
    channel of the top MAX_NOUNS classes; short/mid/long give the rank
    weights of the top 1/2/3 classes (mirroring the caption quantifiers).
    image keeps the exact instance-level histogram.
    """
    h = np.asarray(full_hist, dtype=np.float64)
    if granularity == "image":
        return h.copy()
    ranked = ranked_base_classes(h, vocab)
    weight_by_base = {}
    if granularity == "nouns":
        for b, _ in ranked[:MAX_NOUNS]:
            weight_by_base[b] = 1.0
    elif granularity in ("short", "mid", "long"):
        top = {"short": 1, "mid": 2, "long": 3}[granularity]
        for rank, (b, _) in enumerate(ranked[:top]):
            weight_by_base[b] = RANK_WEIGHTS[rank]
    else:
        raise ValueError(f"unknown granularity {granularity!r}")
    out = np.zeros_like(h)
    for i, channel in enumerate(vocab.classes):
        out[i] = weight_by_base.get(base_name(channel), 0.0)
    return out


def cosine_similarity(a: ConditionEmbedding, b: ConditionEmbedding) -> float:
    if a.dim != b.dim:
        raise EmbeddingError(f"embedding dims differ: {a.dim} vs {b.dim}")
    return float(np.clip(np.dot(a.vector, b.vector), -1.0, 1.0))


def filter_captions(pairs, threshold: float) -> list[int]:
    """Indices of (image_embedding, text_embedding) pairs with cosine >= threshold."""
    return [i for i, (img, txt) in enumerate(pairs) if cosine_similarity(img, txt) >= threshold]


# ---------------------------------------------------------------------------
# embedding file: "EMB v1 <count> <dim> <modality>\n" + little-endian f32 rows


def save_embeddings(path, embeddings, modality: str | None = None) -> None:
    if not embeddings:
        raise EmbeddingError("no embeddings to save")
    modality = modality or embeddings[0].modality
    dim = embeddings[0].dim
    for e in embeddings:
        if e.dim != dim:
            raise EmbeddingError("embeddings have mixed dimensions")
    with open(path, "wb") as f:
        f.write(f"EMB v1 {len(embeddings)} {dim} {modality}\n".encode("ascii"))
        for e in embeddings:
            f.write(np.ascontiguousarray(e.vector, dtype="<f4").tobytes())


def load_embeddings(path, granularity: str | None = None) -> list[ConditionEmbedding]:
    """Rows are renormalized to unit length on load."""
    with open(path, "rb") as f:
        header = f.readline().decode("ascii", errors="replace").strip()
        parts = header.split()
        if len(parts) != 5 or parts[0] != "EMB" or parts[1] != "v1":
            raise EmbeddingError(f"{path}: bad embedding header {header!r}")
        count, dim, modality = int(parts[2]), int(parts[3]), parts[4]
        if modality not in MODALITIES:
            raise EmbeddingError(f"{path}: unknown modality {modality!r}")
        if granularity is None:
            if modality != "image":
                raise EmbeddingError(f"{path}: text embedding file needs a granularity tag")
            granularity = "image"
        blob = f.read()
    expected = count * dim * 4
    if len(blob) != expected:
        row = len(blob) // (dim * 4)
        raise EmbeddingError(
            f"{path}: dimension/count mismatch at row {row} "
            f"({len(blob)} bytes, expected {expected})"
        )
    rows = np.frombuffer(blob, dtype="<f4").reshape(count, dim).astype(np.float64)
    if not np.all(np.isfinite(rows)):
        bad = int(np.where(~np.isfinite(rows).all(axis=1))[0][0])
        raise EmbeddingError(f"{path}: non-finite values at row {bad}")
    out = []
    for i, r in enumerate(rows):
        if np.linalg.norm(r) == 0.0:
            raise EmbeddingError(f"{path}: zero-norm row {i}")
        out.append(ConditionEmbedding(r, modality, granularity))
    return out


# ---------------------------------------------------------------------------
# caption file: JSON-lines, one object per record id


def save_captions(path, captions: dict[str, CaptionSet]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rid, cap in captions.items():
            obj = {"id": rid, "nouns": cap.nouns, "short": cap.short,
                   "mid": cap.mid, "long": cap.long}
            f.write(json.dumps(obj, sort_keys=True) + "\n")


def load_captions(path) -> dict[str, CaptionSet]:
    out = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}:{line_no}: bad JSON ({e})") from None
        out[str(obj["id"])] = CaptionSet(list(obj["nouns"]), obj["short"], obj["mid"], obj["long"])
    return out
