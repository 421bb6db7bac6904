"""Labeled spectrogram datasets: synthesis-driven assembly, cache files, splits.

Cache file layout (one spectrogram per file): 16-byte header = magic "SPG1",
u32 rows, u32 cols, u32 scale enum, then row-major little-endian float32.
A `<name>.meta.json` sidecar carries label and provenance. Writes are atomic
(temp file + rename).
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .preprocess import (PreprocessConfig, Spectrogram, SCALE_LINEAR, SCALE_DB,
                         SCALE_NORMALIZED, preprocess_pipeline)
from .signals import (ChannelParams, IQRecording, SignalProfile, apply_channel,
                      derive_seed, noise_variance_for_snr, synthesize_clean)

CACHE_MAGIC = b"SPG1"
_SCALE_TO_ENUM = {SCALE_LINEAR: 0, SCALE_DB: 1, SCALE_NORMALIZED: 2}
_ENUM_TO_SCALE = {v: k for k, v in _SCALE_TO_ENUM.items()}

SIMULATED_UNKNOWN_LABEL = -1


def write_spectrogram(path, spec: Spectrogram, provenance: dict | None = None) -> Path:
    path = Path(path)
    rows, cols = spec.values.shape
    header = CACHE_MAGIC + struct.pack("<III", rows, cols, _SCALE_TO_ENUM[spec.scale])
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(header + spec.values.astype("<f4").tobytes())
    os.replace(tmp, path)
    meta = {"label": spec.label, "degenerate": spec.degenerate}
    if spec.label == SIMULATED_UNKNOWN_LABEL:
        meta["label_name"] = "SIMULATED_UNKNOWN"
    if provenance:
        meta["provenance"] = provenance
    path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_spectrogram(path) -> Spectrogram:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != CACHE_MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:4]!r}")
    rows, cols, scale_enum = struct.unpack("<III", blob[4:16])
    values = np.frombuffer(blob[16:], dtype="<f4").reshape(rows, cols).astype(np.float64)
    meta_path = path.with_suffix(".meta.json")
    label, degenerate = None, False
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        label = meta.get("label")
        degenerate = bool(meta.get("degenerate", False))
    return Spectrogram(values, _ENUM_TO_SCALE[scale_enum], label=label,
                       degenerate=degenerate)


class LabeledSpectrograms:
    """In-memory stack of same-shaped spectrograms with integer labels."""

    def __init__(self, values: np.ndarray, labels: np.ndarray):
        values = np.asarray(values, dtype=np.float32)
        labels = np.asarray(labels, dtype=np.int64)
        if len(values) != len(labels):
            raise ValueError("values/labels length mismatch")
        self.values = values
        self.labels = labels

    def __len__(self):
        return len(self.values)

    def subset(self, mask) -> "LabeledSpectrograms":
        return LabeledSpectrograms(self.values[mask], self.labels[mask])

    @staticmethod
    def concat(parts) -> "LabeledSpectrograms":
        return LabeledSpectrograms(
            np.concatenate([p.values for p in parts]),
            np.concatenate([p.labels for p in parts]))


class DatasetBundle:
    """Train/test split with the known/unknown class partition.

    Known-class labels are remapped to contiguous indices 0..N-1 (training
    targets); unknown test samples keep indices >= N so they can never
    collide with a known target.
    """

    def __init__(self, train: LabeledSpectrograms, test: LabeledSpectrograms,
                 known_classes: list[int], unknown_classes: list[int], seed: int):
        self.train = train
        self.test = test
        self.known_classes = list(known_classes)
        self.unknown_classes = list(unknown_classes)
        self.seed = int(seed)

    @property
    def n_known(self) -> int:
        return len(self.known_classes)

    def test_known_mask(self) -> np.ndarray:
        return np.isin(self.test.labels, np.arange(self.n_known))


def _slices_for_class(profile: SignalProfile, channel: ChannelParams, count: int,
                      cfg: PreprocessConfig, sample_rate: float, snr_db,
                      seed: int) -> np.ndarray:
    """Synthesize -> channel -> preprocess until `count` slices accumulate."""
    chunk_slices = max(8, count // 4)
    # idle time is filtered out, so budget raw duration by the duty cycle
    chunk_duration = chunk_slices * cfg.slice_samples / sample_rate \
        / max(0.05, profile.vts_duty_cycle * 0.8)
    collected = []
    total = 0
    max_chunks = 60
    for chunk in range(max_chunks):
        clean = synthesize_clean(profile, chunk_duration, sample_rate,
                                 derive_seed(seed, "clean", profile.class_id, chunk))
        ch = channel
        if snr_db is not None:
            sigma2 = noise_variance_for_snr(clean, channel, snr_db)
            ch = ChannelParams(
                channel.distance_d, channel.wavelength_lambda,
                channel.path_loss_model, channel.path_loss_exponent,
                channel.wobble_distribution, channel.wobble_scale,
                channel.wobble_offset, sigma2)
        noisy = apply_channel(clean, ch,
                              derive_seed(seed, "chan", profile.class_id, chunk))
        specs = preprocess_pipeline(noisy, cfg)
        for s in specs:
            if not s.degenerate:
                collected.append(s.values.astype(np.float32))
        total = len(collected)
        if total >= count:
            break
    if total < count:
        raise RuntimeError(
            f"class {profile.class_id}: only {total}/{count} slices after "
            f"{max_chunks} synthesis chunks; raise duration budget or relax "
            f"the noise threshold")
    return np.stack(collected[:count])


def build_dataset(known_profiles: list[SignalProfile],
                  unknown_profiles: list[SignalProfile],
                  channel: ChannelParams, slices_per_class: int,
                  cfg: PreprocessConfig, seed: int, sample_rate: float,
                  snr_db=None, train_fraction: float = 0.75) -> DatasetBundle:
    """Assemble the open-set dataset; deterministic for a fixed seed.

    Known classes contribute round(train_fraction * slices_per_class) training
    slices and the rest to the test split; unknown classes contribute their
    test-share only, and never appear in training.
    """
    if len(known_profiles) < 2:
        raise ValueError("need at least 2 known classes")
    if len(unknown_profiles) < 1:
        raise ValueError("need at least 1 unknown class")
    n_train = int(round(train_fraction * slices_per_class))
    n_test = slices_per_class - n_train
    if n_train < 1 or n_test < 1:
        raise ValueError("train_fraction leaves an empty split")

    known_ids = [p.class_id for p in known_profiles]
    unknown_ids = [p.class_id for p in unknown_profiles]
    if set(known_ids) & set(unknown_ids):
        raise ValueError("known/unknown class ids overlap")

    train_parts, test_parts = [], []
    for idx, prof in enumerate(known_profiles):
        values = _slices_for_class(prof, channel, slices_per_class, cfg,
                                   sample_rate, snr_db, seed)
        rng = np.random.default_rng(derive_seed(seed, "split", prof.class_id))
        order = rng.permutation(slices_per_class)
        labels = np.full(slices_per_class, idx, dtype=np.int64)
        train_parts.append(LabeledSpectrograms(values[order[:n_train]],
                                               labels[:n_train]))
        test_parts.append(LabeledSpectrograms(values[order[n_train:]],
                                              labels[n_train:]))
    for j, prof in enumerate(unknown_profiles):
        values = _slices_for_class(prof, channel, n_test, cfg,
                                   sample_rate, snr_db, seed)
        labels = np.full(n_test, len(known_profiles) + j, dtype=np.int64)
        test_parts.append(LabeledSpectrograms(values, labels))

    return DatasetBundle(LabeledSpectrograms.concat(train_parts),
                         LabeledSpectrograms.concat(test_parts),
                         known_ids, unknown_ids, seed)


def save_dataset(bundle: DatasetBundle, out_dir) -> Path:
    """Persist a bundle as spectrogram caches under train/ and test/."""
    out_dir = Path(out_dir)
    for split_name, split in (("train", bundle.train), ("test", bundle.test)):
        d = out_dir / split_name
        d.mkdir(parents=True, exist_ok=True)
        for i in range(len(split)):
            spec = Spectrogram(split.values[i], SCALE_NORMALIZED,
                               label=int(split.labels[i]))
            write_spectrogram(d / f"{split_name}_{i:06d}.spg", spec,
                              provenance={"split": split_name, "index": i})
    index = {
        "known_classes": bundle.known_classes,
        "unknown_classes": bundle.unknown_classes,
        "seed": bundle.seed,
    }
    (out_dir / "dataset.json").write_text(json.dumps(index, indent=2) + "\n")
    return out_dir


def _load_split(d: Path) -> LabeledSpectrograms:
    files = sorted(d.glob("*.spg"))
    if not files:
        raise FileNotFoundError(f"no .spg files under {d}")
    specs = [read_spectrogram(f) for f in files]
    return LabeledSpectrograms(np.stack([s.values for s in specs]),
                               np.array([s.label for s in specs]))


def load_dataset(in_dir) -> DatasetBundle:
    in_dir = Path(in_dir)
    index = json.loads((in_dir / "dataset.json").read_text())
    return DatasetBundle(_load_split(in_dir / "train"), _load_split(in_dir / "test"),
                         index["known_classes"], index["unknown_classes"],
                         index["seed"])


def load_spectrogram_dir(d) -> LabeledSpectrograms:
    """Read a flat directory of .spg files (e.g. a mined-unknowns dump)."""
    return _load_split(Path(d))
