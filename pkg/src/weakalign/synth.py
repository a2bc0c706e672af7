"""Synthetic clip/caption sequence pairs with known correspondences.

Each pair comes from latent "topic" vectors on the unit sphere. Clips and
captions see the same topic through two different fixed linear maps (one per
modality, shared by a whole corpus) plus isotropic Gaussian noise.

Scenario kinds:

* ``sequential``: captions follow clips monotonically.
* ``non_sequential``: captions are reordered by a permutation from ``T(m, w)``.
* ``partial_irrelevant``: a fraction of captions get fresh, unrelated topics.
* ``entire_irrelevant``: every caption gets a fresh topic.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import matio
from .augment import windowed_permutations
from .errors import ArgumentError
from .seqcore import FeatureSequence

KINDS = ("sequential", "non_sequential", "partial_irrelevant", "entire_irrelevant")
TEST_SEED_OFFSET = 1_000_000


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str = "sequential"
    n: int = 4
    m: int = 4
    d_raw: int = 16
    latent_dim: int = 8
    noise: float = 0.0
    shift_window: int = 1
    irrelevant_rate: float = 0.25
    # fresh topics are redrawn until their latent cosine distance to every clip reaches this
    min_irrelevant_distance: float = 0.0
    seed: int = 0
    map_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 1 or self.m < 1:
            raise ArgumentError("sequence lengths must be >= 1")
        if not 0.0 <= self.irrelevant_rate <= 1.0:
            raise ArgumentError("irrelevant_rate must lie in [0, 1]")
        if self.noise < 0 or self.shift_window < 0:
            raise ArgumentError("noise and shift_window must be >= 0")
        if self.d_raw < self.latent_dim:
            raise ArgumentError("d_raw must be >= latent_dim for full-rank modality maps")


@dataclass(frozen=True)
class GroundTruth:
    correspondences: tuple[tuple[int, int], ...] = ()
    irrelevant_clips: tuple[int, ...] = ()
    irrelevant_captions: tuple[int, ...] = ()
    shift: tuple[int, ...] | None = None

    def to_json(self) -> dict:
        return {
            "correspondences": [list(c) for c in self.correspondences],
            "irrelevant_clips": list(self.irrelevant_clips),
            "irrelevant_captions": list(self.irrelevant_captions),
            "shift": None if self.shift is None else list(self.shift),
        }

    @classmethod
    def from_json(cls, d: dict) -> "GroundTruth":
        return cls(
            tuple(tuple(c) for c in d["correspondences"]),
            tuple(d["irrelevant_clips"]),
            tuple(d["irrelevant_captions"]),
            None if d.get("shift") is None else tuple(d["shift"]),
        )


@dataclass(frozen=True)
class ModalityMaps:
    clip_map: np.ndarray  # (d_raw, latent_dim)
    caption_map: np.ndarray

    @classmethod
    def from_seed(cls, seed: int, d_raw: int, latent_dim: int) -> "ModalityMaps":
        rng = np.random.default_rng([seed, d_raw, latent_dim])
        A = rng.standard_normal((d_raw, latent_dim)) / np.sqrt(latent_dim)
        B = rng.standard_normal((d_raw, latent_dim)) / np.sqrt(latent_dim)
        return cls(A, B)

    def decoders(self) -> tuple[np.ndarray, np.ndarray]:
        """Left inverses mapping raw clip / caption features back to latent topics."""
        return np.linalg.pinv(self.clip_map), np.linalg.pinv(self.caption_map)


@dataclass(frozen=True)
class Pair:
    X: FeatureSequence
    Y: FeatureSequence
    gt: GroundTruth
    spec: ScenarioSpec


def _unit(rng, k, size):
    v = rng.standard_normal((size, k))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _segments(length: int, k: int) -> np.ndarray:
    return (np.arange(length) * k) // length


def _fresh_topics(rng, count: int, k: int, avoid: np.ndarray, min_dist: float, batches: int = 200):
    if min_dist <= 0:
        return _unit(rng, k, count)
    found = []
    for _ in range(batches):
        cand = _unit(rng, k, 4096)
        ok = np.all(1.0 - cand @ avoid.T >= min_dist, axis=1)
        found.extend(cand[ok][: count - len(found)])
        if len(found) == count:
            return np.array(found)
    raise ArgumentError(f"could not draw topics at cosine distance >= {min_dist} from all clips")


def generate_pair(spec: ScenarioSpec, maps: ModalityMaps | None = None) -> tuple[FeatureSequence, FeatureSequence, GroundTruth]:
    """Raw clip and caption features for one scenario; pure function of ``spec``."""
    maps = maps or ModalityMaps.from_seed(spec.map_seed, spec.d_raw, spec.latent_dim)
    rng = np.random.default_rng([spec.seed, KINDS.index(spec.kind)])
    n, m, k = spec.n, spec.m, spec.latent_dim
    n_topics = min(n, m)
    topics = _unit(rng, k, n_topics)
    clip_seg = _segments(n, n_topics)
    cap_seg = _segments(m, n_topics)
    clip_lat = topics[clip_seg]
    cap_lat = topics[cap_seg]
    matched = np.ones(m, dtype=bool)
    shift = None

    if spec.kind == "non_sequential":
        perms = windowed_permutations(m, spec.shift_window)
        movers = [p for p in perms if p != tuple(range(1, m + 1))] or perms
        shift = movers[rng.integers(len(movers))]
        order = np.asarray(shift) - 1
        cap_lat = cap_lat[order]
        cap_seg = cap_seg[order]
    elif spec.kind == "partial_irrelevant":
        r = int(round(spec.irrelevant_rate * m))
        if spec.irrelevant_rate > 0:
            r = max(r, 1)
        pos = np.sort(rng.choice(m, size=r, replace=False))
        cap_lat = cap_lat.copy()
        cap_lat[pos] = _fresh_topics(rng, r, k, clip_lat, spec.min_irrelevant_distance)
        matched[pos] = False
    elif spec.kind == "entire_irrelevant":
        cap_lat = _fresh_topics(rng, m, k, clip_lat, spec.min_irrelevant_distance)
        matched[:] = False

    corr = tuple(
        (i + 1, j + 1) for i in range(n) for j in range(m) if matched[j] and clip_seg[i] == cap_seg[j]
    )
    linked_clips = {i for i, _ in corr}
    gt = GroundTruth(
        correspondences=corr,
        irrelevant_clips=tuple(i for i in range(1, n + 1) if i not in linked_clips),
        irrelevant_captions=tuple(int(j) + 1 for j in np.flatnonzero(~matched)),
        shift=shift,
    )
    X = clip_lat @ maps.clip_map.T
    Y = cap_lat @ maps.caption_map.T
    if spec.noise > 0:
        X = X + spec.noise * rng.standard_normal(X.shape)
        Y = Y + spec.noise * rng.standard_normal(Y.shape)
    return FeatureSequence(X, "clip"), FeatureSequence(Y, "caption"), gt


@dataclass(frozen=True)
class Corpus:
    train: tuple[Pair, ...]
    test: tuple[Pair, ...]
    maps: ModalityMaps
    map_seed: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def d_raw(self) -> int:
        return self.maps.clip_map.shape[0]


def make_corpus(
    specs: list[ScenarioSpec],
    counts: list[int],
    test_counts: list[int] | None = None,
    seed: int = 0,
    map_seed: int | None = None,
) -> Corpus:
    """Train/test corpus; ``counts[k]`` train pairs (``test_counts[k]`` test pairs) of ``specs[k]``.

    Train pairs use seeds ``seed, seed+1, ...`` and test pairs start at
    ``seed + TEST_SEED_OFFSET``, so the splits never share a seed.
    """
    if not specs:
        raise ArgumentError("need at least one scenario")
    test_counts = test_counts if test_counts is not None else [0] * len(specs)
    if len(counts) != len(specs) or len(test_counts) != len(specs):
        raise ArgumentError("counts must match specs")
    d_raw, k = specs[0].d_raw, specs[0].latent_dim
    if any(s.d_raw != d_raw or s.latent_dim != k for s in specs):
        raise ArgumentError("all scenarios in a corpus must share d_raw and latent_dim")
    map_seed = seed if map_seed is None else map_seed
    maps = ModalityMaps.from_seed(map_seed, d_raw, k)

    def build(base, per_spec):
        out = []
        s = base
        for spec, c in zip(specs, per_spec):
            for _ in range(c):
                sp = dataclasses.replace(spec, seed=s, map_seed=map_seed)
                out.append(Pair(*generate_pair(sp, maps), sp))
                s += 1
        return tuple(out)

    return Corpus(build(seed, counts), build(seed + TEST_SEED_OFFSET, test_counts), maps, map_seed)


def mixed_specs(base: ScenarioSpec | None = None) -> list[ScenarioSpec]:
    """One spec per scenario kind, sharing everything else with ``base``."""
    base = base or ScenarioSpec()
    return [dataclasses.replace(base, kind=k) for k in KINDS]


def save_corpus(corpus: Corpus, out_dir) -> Path:
    """Write ``manifest.json`` plus one CSV per sequence."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for split, pairs in (("train", corpus.train), ("test", corpus.test)):
        for idx, p in enumerate(pairs):
            stem = f"{split}_{idx:04d}"
            matio.write_sequence(out / f"{stem}_clips.csv", p.X)
            matio.write_sequence(out / f"{stem}_captions.csv", p.Y)
            entries.append(
                {
                    "split": split,
                    "spec": dataclasses.asdict(p.spec),
                    "gt": p.gt.to_json(),
                    "clips": f"{stem}_clips.csv",
                    "captions": f"{stem}_captions.csv",
                }
            )
    manifest = {
        "map_seed": corpus.map_seed,
        "d_raw": corpus.d_raw,
        "latent_dim": corpus.maps.clip_map.shape[1],
        "pairs": entries,
    }
    matio.atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=2))
    return out / "manifest.json"


def load_corpus(path) -> Corpus:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    manifest = json.loads(path.read_text())
    maps = ModalityMaps.from_seed(manifest["map_seed"], manifest["d_raw"], manifest["latent_dim"])
    splits: dict[str, list] = {"train": [], "test": []}
    for e in manifest["pairs"]:
        X = matio.read_sequence(path.parent / e["clips"], "clip")
        Y = matio.read_sequence(path.parent / e["captions"], "caption")
        splits[e["split"]].append(Pair(X, Y, GroundTruth.from_json(e["gt"]), ScenarioSpec(**e["spec"])))
    return Corpus(tuple(splits["train"]), tuple(splits["test"]), maps, manifest["map_seed"])
