"""
Dataset ingestion: the CIFAR-10 binary batches, a synthetic blob dataset for desk
scale runs, deterministic train/valid splits and train-only standardization.
"""

import logging
import tarfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
import requests

from . import settings
from .config import DatasetConfig
from .errors import DatasetError, RecordCountError, TruncatedFileError

logger = logging.getLogger(__name__)

CIFAR10_SIDE = 32
CIFAR10_RECORD = 1 + 3 * CIFAR10_SIDE * CIFAR10_SIDE    # label byte + 3072 pixel bytes
CIFAR10_RECORDS_PER_BATCH = 10_000
CIFAR10_TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
CIFAR10_TEST_FILE = 'test_batch.bin'
CIFAR10_DIRNAME = 'cifar-10-batches-bin'


@dataclass(frozen=True)
class ImageDataset:
    images: np.ndarray          # (n, c, h, w) float32 in [0, 1]
    labels: np.ndarray          # (n,) int64 in [0, num_classes)
    num_classes: int
    train_idx: np.ndarray
    valid_idx: np.ndarray
    test_images: Optional[np.ndarray] = None
    test_labels: Optional[np.ndarray] = None
    name: str = ''

    def __post_init__(self):
        if self.images.ndim != 4 or len(self.images) != len(self.labels):
            raise DatasetError(f"images {self.images.shape} and labels {self.labels.shape} do not align")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetError(f"labels must lie in [0, {self.num_classes})")
        if np.intersect1d(self.train_idx, self.valid_idx).size:
            raise DatasetError('train and valid splits overlap')

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def split(self, valid_fraction: float = settings.VALID_FRACTION, seed: int = 0) -> 'ImageDataset':
        train_idx, valid_idx = split_indices(len(self), valid_fraction, seed)
        return replace(self, train_idx=train_idx, valid_idx=valid_idx)

    def channel_stats(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-channel mean and std over the training split only."""
        train = self.images[self.train_idx]
        mean = train.mean(axis=(0, 2, 3), dtype=np.float64)
        std = train.std(axis=(0, 2, 3), dtype=np.float64)
        return mean.astype(np.float32), np.maximum(std, 1e-8).astype(np.float32)

    def standardize(self, images: np.ndarray, stats: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> np.ndarray:
        mean, std = stats if stats is not None else self.channel_stats()
        return ((images - mean[None, :, None, None]) / std[None, :, None, None]).astype(np.float32)


def split_indices(n: int, valid_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    if not 0 < valid_fraction < 1:
        raise DatasetError(f"valid_fraction must lie in (0, 1), got {valid_fraction}")
    perm = np.random.default_rng(seed).permutation(n)
    n_valid = int(round(n * valid_fraction))
    return np.sort(perm[n_valid:]), np.sort(perm[:n_valid])


def _read_cifar_batch(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    if not path.is_file():
        raise DatasetError(f"missing CIFAR-10 batch file: {path}")
    raw = path.read_bytes()
    tail = len(raw) % CIFAR10_RECORD
    if tail:
        raise TruncatedFileError(str(path), len(raw) - tail)
    records = len(raw) // CIFAR10_RECORD
    if records != CIFAR10_RECORDS_PER_BATCH:
        raise RecordCountError(f"{path}: {records} records, expected {CIFAR10_RECORDS_PER_BATCH}")
    table = np.frombuffer(raw, dtype=np.uint8).reshape(records, CIFAR10_RECORD)
    labels = table[:, 0].astype(np.int64)
    if labels.max() >= 10:
        raise DatasetError(f"{path}: label byte {labels.max()} out of range")
    images = table[:, 1:].reshape(records, 3, CIFAR10_SIDE, CIFAR10_SIDE)
    return images, labels


def load_cifar10_binary(directory: str, valid_fraction: float = settings.VALID_FRACTION,
                        seed: int = 0) -> ImageDataset:
    """Load the five training batches (and the test batch when present)."""
    root = Path(directory).expanduser()
    if (root / CIFAR10_DIRNAME).is_dir():
        root = root / CIFAR10_DIRNAME
    parts = [_read_cifar_batch(root / name) for name in CIFAR10_TRAIN_FILES]
    images = np.concatenate([p[0] for p in parts]).astype(np.float32) / 255.0
    labels = np.concatenate([p[1] for p in parts])

    test_images = test_labels = None
    if (root / CIFAR10_TEST_FILE).is_file():
        raw_test, test_labels = _read_cifar_batch(root / CIFAR10_TEST_FILE)
        test_images = raw_test.astype(np.float32) / 255.0

    train_idx, valid_idx = split_indices(len(labels), valid_fraction, seed)
    logger.info(f"CIFAR-10 loaded from {root}: {len(train_idx)} train, {len(valid_idx)} valid, "
                f"{0 if test_labels is None else len(test_labels)} test")
    return ImageDataset(images, labels, 10, train_idx, valid_idx, test_images, test_labels, name='cifar10')


def _class_colors(classes: int) -> np.ndarray:
    k = np.arange(classes)[:, None]
    phase = 2 * np.pi * k / classes
    return 0.5 + 0.25 * np.concatenate([np.cos(phase), np.sin(phase), np.cos(2 * phase)], axis=1)


def synth_blobs(classes: int = settings.SYNTH_CLASSES, n: int = settings.SYNTH_SIZE,
                resolution: int = settings.INPUT_RESOLUTION, seed: int = 0,
                valid_fraction: float = settings.VALID_FRACTION, noise: float = 0.1) -> ImageDataset:
    """Class-conditional images: a class colour plus a coarse class pattern plus Gaussian texture.

    Class means differ by construction, so the classes are linearly separable in
    pixel space. Labels are balanced to within one example.
    """
    if classes < 2:
        raise DatasetError(f"synth_blobs needs at least 2 classes, got {classes}")
    rng = np.random.default_rng(seed)
    grid = 4
    cell = -(-resolution // grid)
    coarse = rng.uniform(-0.15, 0.15, size=(classes, 3, grid, grid))
    patterns = np.repeat(np.repeat(coarse, cell, axis=2), cell, axis=3)[:, :, :resolution, :resolution]
    means = _class_colors(classes)[:, :, None, None] + patterns

    labels = rng.permutation(np.arange(n) % classes).astype(np.int64)
    images = means[labels] + noise * rng.standard_normal((n, 3, resolution, resolution))
    images = np.clip(images, 0.0, 1.0).astype(np.float32)

    train_idx, valid_idx = split_indices(n, valid_fraction, seed)
    logger.info(f"Synthetic blobs: {n} images, {classes} classes, {resolution}x{resolution}")
    return ImageDataset(images, labels, classes, train_idx, valid_idx, name=f"blobs{classes}")


def load_dataset(cfg: DatasetConfig) -> ImageDataset:
    if cfg.source == 'cifar10':
        return load_cifar10_binary(cfg.path, cfg.valid_fraction, cfg.seed)
    return synth_blobs(cfg.classes, cfg.size, cfg.resolution, cfg.seed, cfg.valid_fraction)


def fetch_cifar10(dest: str, url: str = settings.CIFAR10_URL,
                  on_progress: Optional[Callable[[int, Optional[int]], None]] = None) -> Path:
    """Download and unpack the CIFAR-10 binary release; returns the batch directory."""
    dest_path = Path(dest).expanduser().resolve()
    dest_path.mkdir(parents=True, exist_ok=True)
    target = dest_path / CIFAR10_DIRNAME
    if all((target / name).is_file() for name in CIFAR10_TRAIN_FILES):
        logger.info(f"CIFAR-10 already present in {target}")
        return target

    archive = dest_path / Path(url).name
    logger.info(f"Downloading {url} to {archive}")
    try:
        with requests.get(url, stream=True, timeout=settings.DOWNLOAD_TIMEOUT) as response:
            response.raise_for_status()
            total = int(response.headers.get('Content-Length', 0)) or None
            done = 0
            with open(archive, 'wb') as f:
                for chunk in response.iter_content(chunk_size=settings.DOWNLOAD_CHUNK_SIZE):
                    f.write(chunk)
                    done += len(chunk)
                    if on_progress:
                        on_progress(done, total)
    except requests.RequestException as e:
        raise DatasetError(f"download of {url} failed: {e}") from e

    with tarfile.open(archive, 'r:gz') as tar:
        tar.extractall(dest_path, filter='data')
    archive.unlink()
    return target
