"""
Rebuild the toy checkpoints shipped in src/pbnco/checkpoints
=============================================================

Each policy is trained from one config in configs/. Training is single
threaded and seeded, so a rerun reproduces the shipped files byte for byte.
Expect roughly half an hour on one CPU core, most of it in the two
improvement policies.

    python3 demos/train_toy_checkpoints.py            # all four
    python3 demos/train_toy_checkpoints.py cnc_mc     # just one
"""
import os
import sys
import time

from pbnco import config
from pbnco.pretrained import CHECKPOINT_DIR
from pbnco.trainer import TrainConfig, checkpoint_meta, train

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
NAMES = ["cnc_mc", "cnc_mis", "cni_mc", "cni_mis"]

for name in sys.argv[1:] or NAMES:
    cfg = config.build(TrainConfig, config.read_config(os.path.join(ROOT, "configs", name + ".cfg")))
    t0 = time.time()
    net, metrics = train(cfg)
    out = os.path.join(CHECKPOINT_DIR, name + ".ckpt")
    digest = net.save(out, checkpoint_meta(cfg))
    last = [m for m in metrics if "validation_objective" in m][-1]
    print(f"{name}: {cfg.episodes} episodes in {time.time() - t0:.0f}s, "
          f"validation {last['validation_objective']:.3f}, sha256 {digest[:16]}")
