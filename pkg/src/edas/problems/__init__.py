from .base import ProblemInstance
from .datasets import (
    load_mnist,
    mnist_binary_partition,
    partition_manifest,
    synthetic_logistic,
    write_partition_manifest,
)
from .idx import load_idx_images, load_idx_labels
from .logistic import LogisticProblem, Partition, logistic_problem
from .quadratic import QuadraticProblem, quadratic_problem

__all__ = [
    "LogisticProblem",
    "Partition",
    "ProblemInstance",
    "QuadraticProblem",
    "load_idx_images",
    "load_idx_labels",
    "load_mnist",
    "logistic_problem",
    "mnist_binary_partition",
    "partition_manifest",
    "quadratic_problem",
    "synthetic_logistic",
    "write_partition_manifest",
]
