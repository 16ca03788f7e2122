"""Local-dataset construction: MNIST digit pairs and synthetic logistic data."""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
from scipy.special import expit

from ..exceptions import DataError, ParameterError
from .idx import load_idx_images, load_idx_labels
from .logistic import Partition

DATA_DIR_ENV = "EDAS_DATA_DIR"
MNIST_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")


def _split(U, v, order, n, per_agent, overlap, rng):
    if overlap:
        blocks = [rng.choice(order, size=per_agent, replace=False) for _ in range(n)]
    else:
        blocks = [order[i * per_agent:(i + 1) * per_agent] for i in range(n)]
    return [Partition(U[b], v[b], np.asarray(b)) for b in blocks]


def mnist_binary_partition(images, labels, digits=(1, 2), per_agent: int = 100, n: int = 8,
                           seed: int = 0, overlap: bool = False) -> list[Partition]:
    """Two-digit subset with ``+1`` for ``digits[0]`` and ``-1`` for ``digits[1]``.

    A constant 1 is appended to every feature vector.  Samples are shuffled
    with ``seed`` and dealt in disjoint blocks of ``per_agent``; with
    ``overlap=True`` each agent instead draws its own block from the whole
    pool.  ``Partition.indices`` refer to rows of ``images``.
    """
    images = np.asarray(images, dtype=float)
    labels = np.asarray(labels)
    pos, neg = digits
    keep = np.flatnonzero((labels == pos) | (labels == neg))
    need = per_agent if overlap else n * per_agent
    if keep.size < need:
        raise DataError(f"only {keep.size} samples of digits {digits}, need {need}")
    U = np.hstack([images, np.ones((images.shape[0], 1))])
    v = np.where(labels == pos, 1.0, -1.0)
    rng = np.random.default_rng(seed)
    order = rng.permutation(keep)
    return _split(U, v, order, n, per_agent, overlap, rng)


def synthetic_logistic(n: int, per_agent: int, p: int, seed: int = 0, w_scale: float = 1.0,
                       overlap: bool = False) -> list[Partition]:
    """Gaussian features with a trailing bias coordinate, labels from a logistic model."""
    if p < 2:
        raise ParameterError(f"synthetic logistic data needs p >= 2, got {p}")
    rng = np.random.default_rng(seed)
    w = w_scale * rng.standard_normal(p)
    total = n * per_agent
    U = np.hstack([rng.standard_normal((total, p - 1)), np.ones((total, 1))])
    v = np.where(rng.random(total) < expit(U @ w), 1.0, -1.0)
    order = rng.permutation(total)
    return _split(U, v, order, n, per_agent, overlap, rng)


def partition_manifest(partitions) -> dict:
    return {"agents": {str(i): [int(j) for j in part.indices] for i, part in enumerate(partitions)}}


def write_partition_manifest(partitions, path) -> None:
    Path(path).write_text(json.dumps(partition_manifest(partitions), indent=1) + "\n")


def resolve_data_dir(configured=None) -> Path:
    """Config value first, then ``$EDAS_DATA_DIR``."""
    value = configured or os.environ.get(DATA_DIR_ENV)
    if not value:
        raise DataError(f"no MNIST directory configured; set problem.data_dir or ${DATA_DIR_ENV}")
    return Path(value)


def load_mnist(data_dir=None):
    root = resolve_data_dir(data_dir)
    paths = []
    for stem in MNIST_FILES:
        for cand in (root / stem, root / (stem + ".gz"), root / stem.replace("-idx", ".idx")):
            if cand.exists():
                paths.append(cand)
                break
        else:
            raise DataError(f"{root}: missing {stem}")
    return load_idx_images(paths[0]), load_idx_labels(paths[1])
