"""Video feature datasets: on-disk manifests, synthetic generation, splits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MANIFEST_VERSION = 1
_F32 = np.dtype("<f4")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class VideoRecord:
    """One long video.

    ``frame_features`` is ``[T_N, T_G, fd]`` (a frame sequence per
    segment), ``segment_features`` is ``[T_N, wd]`` and ``importance`` is
    the ``[T_N]`` vector of mean annotator scores.
    """

    video_id: str
    frame_features: np.ndarray
    segment_features: np.ndarray
    importance: np.ndarray

    def __post_init__(self):
        t_n = self.frame_features.shape[0] if self.frame_features.ndim == 3 else -1
        if t_n < 1:
            raise DatasetError(f"{self.video_id}: frame_features must be [T_N, T_G, fd] with T_N >= 1")
        if self.segment_features.ndim != 2 or self.segment_features.shape[0] != t_n:
            raise DatasetError(f"{self.video_id}: segment_features rows != T_N ({t_n})")
        if self.importance.shape != (t_n,):
            raise DatasetError(f"{self.video_id}: importance length != T_N ({t_n})")
        for name in ("frame_features", "segment_features", "importance"):
            if not np.isfinite(getattr(self, name)).all():
                raise DatasetError(f"{self.video_id}: non-finite values in {name}")
        if (self.importance < 0).any():
            raise DatasetError(f"{self.video_id}: negative importance")

    @property
    def t_n(self) -> int:
        return self.frame_features.shape[0]


@dataclass(frozen=True)
class Dataset:
    records: tuple[VideoRecord, ...]
    dims: dict  # {"t_g", "fd", "wd"}
    generator: SyntheticGenerator | None = field(default=None, compare=False)

    def __post_init__(self):
        ids = [r.video_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise DatasetError("duplicate video ids")
        for r in self.records:
            _, t_g, fd = r.frame_features.shape
            if (t_g, fd, r.segment_features.shape[1]) != (self.dims["t_g"], self.dims["fd"], self.dims["wd"]):
                raise DatasetError(f"{r.video_id}: dims do not match dataset dims {self.dims}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def ids(self) -> list[str]:
        return [r.video_id for r in self.records]

    def subset(self, records) -> Dataset:
        return Dataset(tuple(records), dict(self.dims), self.generator)


# ---------------------------------------------------------------------------
# manifest IO


def save_dataset(ds: Dataset, directory: str | Path) -> Path:
    """Write ``manifest.json`` and one blob triple per video; returns the manifest path."""
    directory = Path(directory)
    (directory / "blobs").mkdir(parents=True, exist_ok=True)
    videos = []
    for i, r in enumerate(ds.records):
        stem = f"blobs/{i:05d}"
        entry = {
            "id": r.video_id,
            "t_n": r.t_n,
            "frames_blob": f"{stem}.frames.f32",
            "segfeat_blob": f"{stem}.segfeat.f32",
            "importance_blob": f"{stem}.importance.f32",
        }
        for key, arr in (
            ("frames_blob", r.frame_features),
            ("segfeat_blob", r.segment_features),
            ("importance_blob", r.importance),
        ):
            (directory / entry[key]).write_bytes(np.ascontiguousarray(arr, dtype=_F32).tobytes())
        videos.append(entry)
    manifest = {"version": MANIFEST_VERSION, "dims": dict(ds.dims), "videos": videos}
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def _read_blob(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"missing blob {path}")
    raw = path.read_bytes()
    expected = int(np.prod(shape)) * 4
    if len(raw) != expected:
        raise DatasetError(f"payload size mismatch for {path.name}: expected {expected} bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype=_F32).astype(np.float32).reshape(shape)


def load_dataset(manifest_path: str | Path) -> Dataset:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    if not manifest_path.is_file():
        raise DatasetError(f"missing manifest {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("version") != MANIFEST_VERSION:
        raise DatasetError(f"unsupported manifest version {manifest.get('version')!r}")
    dims = {k: int(manifest["dims"][k]) for k in ("t_g", "fd", "wd")}
    if min(dims.values()) < 1:
        raise DatasetError(f"dims must be positive: {dims}")
    root = manifest_path.parent
    records = []
    for v in manifest["videos"]:
        t_n = int(v["t_n"])
        records.append(
            VideoRecord(
                video_id=str(v["id"]),
                frame_features=_read_blob(root / v["frames_blob"], (t_n, dims["t_g"], dims["fd"])),
                segment_features=_read_blob(root / v["segfeat_blob"], (t_n, dims["wd"])),
                importance=_read_blob(root / v["importance_blob"], (t_n,)),
            )
        )
    return Dataset(tuple(records), dims)


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticConfig:
    num_videos: int = 200
    t_n_range: tuple[int, int] = (12, 24)
    t_g: int = 16
    fd: int = 32
    wd: int = 16
    noise_std: float = 0.02
    seed: int = 42
    # features drift smoothly along the timeline so segment order is learnable
    temporal_rho: float = 0.9
    frame_noise: float = 0.5
    video_offset: float = 1.0

    def __post_init__(self):
        lo, hi = self.t_n_range
        if not 1 <= lo <= hi:
            raise ValueError(f"t_n_range must satisfy 1 <= lo <= hi, got {self.t_n_range}")
        for name in ("num_videos", "t_g", "fd", "wd"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if not 0 <= self.temporal_rho < 1:
            raise ValueError("temporal_rho must lie in [0, 1)")


@dataclass(frozen=True)
class SyntheticGenerator:
    """Latent weights behind a synthetic dataset's importance scores."""

    w_f: np.ndarray
    w_s: np.ndarray
    w_c: np.ndarray

    def logits(self, record: VideoRecord) -> np.ndarray:
        pooled = record.frame_features.astype(np.float64).mean(axis=1)
        seg = record.segment_features.astype(np.float64)
        return pooled @ self.w_f + seg @ self.w_s + seg.mean(axis=0) @ self.w_c

    def planted(self, record: VideoRecord) -> np.ndarray:
        """Noise-free importance for ``record``."""
        return 1.0 / (1.0 + np.exp(-self.logits(record)))


def _ar1(rng: np.random.Generator, n: int, d: int, rho: float) -> np.ndarray:
    out = np.empty((n, d))
    out[0] = rng.standard_normal(d)
    innov = math.sqrt(1 - rho * rho)
    for i in range(1, n):
        out[i] = rho * out[i - 1] + innov * rng.standard_normal(d)
    return out - out.mean(axis=0)


def generate_synthetic(config: SyntheticConfig = SyntheticConfig()) -> Dataset:
    """Planted-signal dataset; ``result.generator`` holds the latent weights."""
    rng = np.random.default_rng(config.seed)
    gen = SyntheticGenerator(
        w_f=rng.standard_normal(config.fd) / math.sqrt(config.fd),
        w_s=rng.standard_normal(config.wd) / math.sqrt(config.wd),
        w_c=rng.standard_normal(config.wd) / math.sqrt(config.wd),
    )
    lo, hi = config.t_n_range
    records = []
    for v in range(config.num_videos):
        t_n = int(rng.integers(lo, hi + 1))
        latent = _ar1(rng, t_n, config.fd, config.temporal_rho)
        frames = latent[:, None, :] + config.frame_noise * rng.standard_normal((t_n, config.t_g, config.fd))
        offset = config.video_offset * rng.standard_normal(config.wd)
        segs = offset + _ar1(rng, t_n, config.wd, config.temporal_rho)
        frames = frames.astype(np.float32)
        segs = segs.astype(np.float32)
        probe = VideoRecord(f"syn{v:05d}", frames, segs, np.zeros(t_n, np.float32))
        noise = config.noise_std * rng.standard_normal(t_n)
        importance = np.maximum(gen.planted(probe) + noise, 0.0).astype(np.float32)
        records.append(VideoRecord(probe.video_id, frames, segs, importance))
    return Dataset(tuple(records), {"t_g": config.t_g, "fd": config.fd, "wd": config.wd}, gen)


# ---------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 5 / 6
    seed: int = 0


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_by_video(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Shuffle whole videos by seed and cut into train/validation."""
    if not 0 < spec.train_fraction <= 1:
        raise ValueError(f"train_fraction must lie in (0, 1], got {spec.train_fraction}")
    n = len(ds)
    if n == 0:
        raise DatasetError("cannot split an empty dataset")
    order = np.random.default_rng(spec.seed).permutation(n)
    n_train = round_half_up(spec.train_fraction * n)
    if spec.train_fraction < 1 and n >= 2:
        n_train = min(max(n_train, 1), n - 1)
    recs = [ds.records[i] for i in order]
    return ds.subset(recs[:n_train]), ds.subset(recs[n_train:])
