"""Dataset ingestion (IDX binary), synthetic fallback, deterministic batching.

IDX is the big-endian MNIST container: u32 magic, u32 dimension sizes,
raw u8 payload. Images use magic 0x00000803 (3-D u8), labels 0x00000801
(1-D u8). Pixels are scaled to [0,1] by /255 on read.

The synthetic generator exists so the full benchmark runs offline: ten
fixed random pixel templates (one per class) plus per-image uniform noise,
quantized to the same /255 grid as real data; the outlier variant is pure
uniform noise with no template.
"""

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nn import Batch

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# Class templates are drawn from a fixed seed so independently generated
# train/test splits share the same class structure.
_TEMPLATE_SEED = 185123
TEMPLATE_DENSITY = 0.12
TEMPLATE_CONTRAST = 0.62
NOISE_SCALE = 0.5


class IdxFormatError(ValueError):
    """Malformed IDX content: bad magic, bad dims, or mismatched counts."""


@dataclass
class Dataset:
    """Flattened images in [0,1] with integer class labels."""

    images: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64
    name: str = ""

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels).astype(np.int64)
        if self.images.ndim != 2 or self.images.shape[0] < 1:
            raise ValueError("images must be a non-empty (n, d) matrix")
        if self.labels.shape != (self.images.shape[0],):
            raise ValueError("labels must be 1-D with one entry per image")
        if self.images.min() < 0.0 or self.images.max() > 1.0:
            raise ValueError("image values must lie in [0, 1]")

    @property
    def size(self) -> int:
        return self.images.shape[0]


def _open_maybe_gz(path: Path):
    if path.suffix == ".gz" or (not path.exists() and path.with_suffix(path.suffix + ".gz").exists()):
        gz = path if path.suffix == ".gz" else path.with_suffix(path.suffix + ".gz")
        return gzip.open(gz, "rb")
    return open(path, "rb")


def _read_exact(f, count: int, what: str) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise EOFError(f"truncated IDX file while reading {what}: "
                       f"wanted {count} bytes, got {len(data)}")
    return data


def _read_header(f, expected_magic: int, n_dims: int, path) -> tuple[int, ...]:
    magic = struct.unpack(">I", _read_exact(f, 4, "magic"))[0]
    if magic != expected_magic:
        raise IdxFormatError(
            f"{path}: bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    return struct.unpack(f">{n_dims}I", _read_exact(f, 4 * n_dims, "dimension sizes"))


def read_idx(images_path, labels_path, name: str = "") -> Dataset:
    """Load an image/label IDX pair (optionally .gz) into a Dataset."""
    images_path = Path(images_path)
    labels_path = Path(labels_path)
    with _open_maybe_gz(images_path) as f:
        n, rows, cols = _read_header(f, IMAGE_MAGIC, 3, images_path)
        pixels = np.frombuffer(_read_exact(f, n * rows * cols, "pixels"), dtype=np.uint8)
    with _open_maybe_gz(labels_path) as f:
        (n_labels,) = _read_header(f, LABEL_MAGIC, 1, labels_path)
        labels = np.frombuffer(_read_exact(f, n_labels, "labels"), dtype=np.uint8)
    if n != n_labels:
        raise IdxFormatError(
            f"image count {n} does not match label count {n_labels}"
        )
    images = pixels.reshape(n, rows * cols).astype(np.float64) / 255.0
    return Dataset(images=images, labels=labels, name=name or images_path.stem)


def write_idx(dataset: Dataset, images_path, labels_path,
              image_dims: tuple[int, int] = (28, 28)) -> None:
    """Write a Dataset back to an IDX pair, quantizing pixels to u8.

    Values already on the /255 grid (everything read_idx or synth_dataset
    produces) round-trip bit-exactly.
    """
    rows, cols = image_dims
    if rows * cols != dataset.images.shape[1]:
        raise ValueError(f"image_dims {image_dims} do not match feature width "
                         f"{dataset.images.shape[1]}")
    pixels = np.round(dataset.images * 255.0).astype(np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, dataset.size, rows, cols))
        f.write(pixels.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, dataset.size))
        f.write(dataset.labels.astype(np.uint8).tobytes())


def synth_dataset(n: int, seed: int, outliers: bool = False, name: str = "") -> Dataset:
    """Deterministic 10-class synthetic stand-in for MNIST-sized data.

    Inliers are a class template plus uniform pixel noise; outliers are
    pure uniform noise (their labels are arbitrary and ignored).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=n)
    if outliers:
        values = rng.random((n, 784))
    else:
        template_rng = np.random.default_rng(_TEMPLATE_SEED)
        templates = (template_rng.random((10, 784)) < TEMPLATE_DENSITY).astype(np.float64)
        values = TEMPLATE_CONTRAST * templates[labels] + NOISE_SCALE * rng.random((n, 784))
    pixels = np.round(np.clip(values, 0.0, 1.0) * 255.0)
    if not name:
        name = "synth-outliers" if outliers else "synth"
    return Dataset(images=pixels / 255.0, labels=labels, name=name)


@dataclass
class BatchPlan:
    """Seeded permutation walk over a dataset; reshuffles when exhausted."""

    batch_size: int
    rng: np.random.Generator
    permutation: np.ndarray
    cursor: int = 0

    @classmethod
    def new(cls, n: int, batch_size: int, seed: int) -> "BatchPlan":
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        rng = np.random.default_rng(seed)
        return cls(batch_size=batch_size, rng=rng, permutation=rng.permutation(n))

    def next_indices(self) -> np.ndarray:
        n = self.permutation.shape[0]
        take = min(self.batch_size, n - self.cursor)
        idx = self.permutation[self.cursor:self.cursor + take]
        self.cursor += take
        if self.cursor >= n:
            self.permutation = self.rng.permutation(n)
            self.cursor = 0
        return idx


def next_batch(data: Dataset, plan: BatchPlan) -> Batch:
    """Next deterministic minibatch under the plan."""
    if plan.permutation.shape[0] != data.size:
        raise ValueError("plan permutation does not cover this dataset")
    idx = plan.next_indices()
    return Batch(inputs=data.images[idx], labels=data.labels[idx])


@dataclass
class DataBundle:
    """Training data plus in-distribution and out-of-distribution test sets."""

    train: Dataset
    test_in: Dataset
    test_out: Dataset


_MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    "outlier": ("notmnist-images-idx3-ubyte", "notmnist-labels-idx1-ubyte"),
}


def load_bundle(
    data_dir=None,
    *,
    synth_train: int = 2000,
    synth_test: int = 1000,
    synth_outliers: int = 1000,
    synth_seed: int = 7,
) -> DataBundle:
    """Real IDX data from `data_dir`, or the synthetic fallback when None.

    With a data_dir, the MNIST train/test pairs must be present (plain or
    .gz); an IDX-converted notMNIST pair supplies the outlier set and
    falls back to synthetic outliers when absent.
    """
    if data_dir is None:
        return DataBundle(
            train=synth_dataset(synth_train, seed=synth_seed, name="synth-train"),
            test_in=synth_dataset(synth_test, seed=synth_seed + 1, name="synth-test"),
            test_out=synth_dataset(synth_outliers, seed=synth_seed + 2, outliers=True),
        )
    data_dir = Path(data_dir)
    train = read_idx(data_dir / _MNIST_FILES["train"][0],
                     data_dir / _MNIST_FILES["train"][1], name="mnist-train")
    test_in = read_idx(data_dir / _MNIST_FILES["test"][0],
                       data_dir / _MNIST_FILES["test"][1], name="mnist-test")
    out_images = data_dir / _MNIST_FILES["outlier"][0]
    out_labels = data_dir / _MNIST_FILES["outlier"][1]
    if out_images.exists() or out_images.with_suffix(out_images.suffix + ".gz").exists():
        test_out = read_idx(out_images, out_labels, name="notmnist-test")
    else:
        test_out = synth_dataset(synth_outliers, seed=synth_seed + 2, outliers=True)
    return DataBundle(train=train, test_in=test_in, test_out=test_out)
