"""Toy checkpoints shipped with the package.

They were trained on small ER graphs (20 to 30 nodes for Max-Cut, 12 to 30 for
MIS) with the configs in ``configs/``; ``demos/train_toy_checkpoints.py``
rebuilds them.
"""
from __future__ import annotations

import os

from .gnn import PolicyNet

CHECKPOINT_DIR = os.path.join(os.path.dirname(__file__), "checkpoints")


def checkpoint_path(kind, problem):
    if kind not in ("cni", "cnc"):
        raise ValueError(f"kind must be 'cni' or 'cnc', got {kind!r}")
    return os.path.join(CHECKPOINT_DIR, f"{kind}_{problem.lower()}.ckpt")


def load(kind, problem):
    path = checkpoint_path(kind, problem)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no shipped {kind} checkpoint for {problem}; "
                                f"run demos/train_toy_checkpoints.py")
    return PolicyNet.load(path)
