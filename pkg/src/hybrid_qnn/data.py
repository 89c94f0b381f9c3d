"""Iris ingestion, train-fitted min-max scaling to [-pi, pi], stratified splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError, IngestionError

HEADER = ("sepal_length", "sepal_width", "petal_length", "petal_width", "species")
SPECIES = ("setosa", "versicolor", "virginica")
N_FEATURES = 4


@dataclass(frozen=True, eq=False)
class Sample:
    features: np.ndarray
    label: int

    def __post_init__(self) -> None:
        x = np.array(self.features, dtype=np.float64)
        if x.shape != (N_FEATURES,) or not np.all(np.isfinite(x)):
            raise DataError(f"sample features must be {N_FEATURES} finite values, got {self.features!r}")
        if self.label not in range(len(SPECIES)):
            raise DataError(f"label must be in 0..{len(SPECIES) - 1}, got {self.label!r}")
        x.setflags(write=False)
        object.__setattr__(self, "features", x)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.features, other.features)

    def __hash__(self) -> int:
        return hash((self.label, self.features.tobytes()))


@dataclass(frozen=True)
class ScalerParams:
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self) -> None:
        lo = np.array(self.minimum, dtype=np.float64)
        hi = np.array(self.maximum, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DataError("scaler minimum and maximum must be equal-length vectors")
        if not np.all(hi > lo):
            raise DataError(f"every feature needs max > min, got min={lo.tolist()} max={hi.tolist()}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)


@dataclass(frozen=True)
class SplitDataset:
    """Raw (unscaled) partitions plus the scaler fitted on ``train``."""

    train: tuple[Sample, ...]
    test: tuple[Sample, ...]
    seed: int
    scaler: ScalerParams

    def arrays(self, part: str = "train") -> tuple[np.ndarray, np.ndarray]:
        """Scaled feature matrix and label vector for ``"train"`` or ``"test"``."""
        return scaled_arrays(self.scaler, getattr(self, part))


def default_iris_path() -> Path:
    """Path of the Iris CSV shipped with the package."""
    return Path(str(resources.files("hybrid_qnn") / "resources" / "iris.csv"))


def load_iris(path) -> list[Sample]:
    """Read an Iris CSV. Rows are returned in file order.

    Row numbers in error messages count the header as row 1.
    """
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc.strerror or exc}") from exc
    samples = []
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise IngestionError(f"{path}: file is empty")
        if tuple(h.strip() for h in header) != HEADER:
            raise IngestionError(f"{path}: row 1: expected header {','.join(HEADER)}")
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(HEADER):
                raise IngestionError(f"{path}: row {row_no}: expected {len(HEADER)} fields, got {len(row)}")
            try:
                values = [float(cell) for cell in row[:N_FEATURES]]
            except ValueError:
                raise IngestionError(f"{path}: row {row_no}: non-numeric feature in {row[:N_FEATURES]}") from None
            if not all(math.isfinite(v) for v in values):
                raise IngestionError(f"{path}: row {row_no}: non-finite feature")
            species = row[N_FEATURES].strip()
            if species not in SPECIES:
                raise IngestionError(f"{path}: row {row_no}: unknown species {species!r}")
            samples.append(Sample(np.array(values), SPECIES.index(species)))
    if not samples:
        raise IngestionError(f"{path}: no data rows")
    return samples


def fit_scaler(train) -> ScalerParams:
    if len(train) == 0:
        raise DataError("cannot fit a scaler on an empty training set")
    x = np.stack([s.features for s in train])
    lo, hi = x.min(axis=0), x.max(axis=0)
    if np.any(hi <= lo):
        constant = np.flatnonzero(hi <= lo).tolist()
        raise DataError(f"features {constant} are constant on the training set")
    return ScalerParams(lo, hi)


def scale(scaler: ScalerParams, features) -> np.ndarray:
    """Map ``[min, max]`` linearly onto ``[-pi, pi]``; values outside the range are extrapolated."""
    x = np.asarray(features, dtype=np.float64)
    # the unit fraction first, so min and max land exactly on -pi and +pi
    unit = (x - scaler.minimum) / (scaler.maximum - scaler.minimum)
    return -np.pi + 2.0 * np.pi * unit


def scaled_arrays(scaler: ScalerParams, samples) -> tuple[np.ndarray, np.ndarray]:
    if len(samples) == 0:
        return np.zeros((0, len(scaler.minimum))), np.zeros(0, dtype=np.int64)
    x = np.stack([s.features for s in samples])
    y = np.array([s.label for s in samples], dtype=np.int64)
    return scale(scaler, x), y


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent generator ``stream`` derived from a single run seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


SPLIT_STREAM = 0


def stratified_split(samples, test_fraction: float = 0.2, seed: int = 0) -> SplitDataset:
    """Per class, shuffle with the seed and send the first ``fraction * count`` rows to test.

    The fraction must give a whole, non-zero number of test rows in every class
    and leave at least one training row per class.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError(f"test_fraction must lie strictly between 0 and 1, got {test_fraction}")
    rng = stream_rng(seed, SPLIT_STREAM)
    by_class: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        by_class.setdefault(s.label, []).append(i)
    test_idx: list[int] = []
    for label in sorted(by_class):
        members = by_class[label]
        exact = test_fraction * len(members)
        n_test = round(exact)
        if abs(exact - n_test) > 1e-9 or n_test == 0 or n_test >= len(members):
            raise ConfigurationError(
                f"test_fraction {test_fraction} gives {exact:g} test rows for class {label} "
                f"({len(members)} samples); need a whole number between 1 and {len(members) - 1}"
            )
        order = rng.permutation(len(members))
        test_idx.extend(members[j] for j in order[:n_test])
    chosen = set(test_idx)
    train = tuple(s for i, s in enumerate(samples) if i not in chosen)
    test = tuple(samples[i] for i in sorted(chosen))
    return SplitDataset(train, test, seed, fit_scaler(train))
