"""Command-line entry point: ``pbnco gen|train|solve|diversity|pareto|oracle``."""
from __future__ import annotations

import argparse
import csv
import glob
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from . import baselines as bl
from . import cnc
from . import config as cfgmod
from . import graphs
from . import pretrained
from . import problems as pr
from . import search
from .gnn import PolicyNet, checkpoint_hash
from .studies import diversity_study, pareto_sweep
from .trace import TRACE_COLUMNS
from .trainer import TrainConfig, TrainingDiverged, checkpoint_meta, train

log = logging.getLogger("pbnco")

BASELINE_METHODS = ("greedy", "ga", "pso", "cnc-greedy")
METHODS = search.MODES + BASELINE_METHODS
INSTANCE_GLOB = "*.graph"
SHIPPED = "shipped"


class CliError(Exception):
    pass


def code_version():
    """Package version plus a digest of the installed sources."""
    h = hashlib.sha256()
    here = os.path.dirname(__file__)
    for name in sorted(os.listdir(here)):
        if name.endswith(".py"):
            with open(os.path.join(here, name), "rb") as fh:
                h.update(name.encode() + b"\0" + fh.read())
    return f"{__version__}+{h.hexdigest()[:12]}"


def write_manifest(path, **fields):
    fields = {"code_version": code_version(), **fields}
    with open(path, "w") as fh:
        json.dump(fields, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _overrides(pairs):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise CliError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _load_config(cls, path, sets, **typed):
    mapping = cfgmod.read_config(path) if path else {}
    mapping.update(_overrides(sets))
    try:
        return cfgmod.build(cls, mapping, **typed)
    except (cfgmod.ConfigError, ValueError, TypeError) as exc:
        raise CliError(str(exc)) from None


def _instances(path):
    if os.path.isdir(path):
        files = sorted(glob.glob(os.path.join(path, INSTANCE_GLOB)))
        if not files:
            raise CliError(f"no {INSTANCE_GLOB} files in {path}")
        return files
    if os.path.isfile(path):
        return [path]
    raise CliError(f"instance path {path} does not exist")


def _stem(path):
    return os.path.splitext(os.path.basename(path))[0]


def _shipped(path, kind, problem):
    """``shipped`` names the toy checkpoint packaged with the library."""
    if path != SHIPPED:
        return path
    ckpt = pretrained.checkpoint_path(kind, problem)
    if not os.path.exists(ckpt):
        raise CliError(f"no shipped {kind} checkpoint for {problem}; "
                       "run demos/train_toy_checkpoints.py")
    return ckpt


def _load_net(path, kind):
    if not path:
        return None
    try:
        net = PolicyNet.load(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load checkpoint {path}: {exc}") from None
    if net.meta.get("kind") not in (None, kind):
        raise CliError(f"{path} is a {net.meta.get('kind')} checkpoint, expected {kind}")
    return net


def _seeds(text):
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi)))
    return [int(s) for s in text.split(",") if s]


# gen --------------------------------------------------------------------------

def cmd_gen(a):
    os.makedirs(a.out, exist_ok=True)
    paths = []
    for seed in _seeds(a.seeds):
        if a.family == "ER":
            if a.n is None or a.p is None:
                raise CliError("ER instances need --n and --p")
            g = graphs.generate_er(a.n, a.p, seed)
            name = f"er_n{a.n}_p{a.p:g}_s{seed}"
        else:
            if a.groups is None:
                raise CliError("RB instances need --groups")
            g = graphs.generate_rb(a.groups, a.group_size, a.tightness, a.factor, seed)
            name = f"rb_g{a.groups}x{a.group_size}_s{seed}"
        path = os.path.join(a.out, name + ".graph")
        graphs.write_instance(path, g)
        paths.append(path)
    print(f"wrote {len(paths)} instances to {a.out}")
    return 0


# train ------------------------------------------------------------------------

def cmd_train(a):
    cfg = _load_config(TrainConfig, a.config, a.set, kind=a.kind)
    metrics = a.metrics or os.path.splitext(a.out)[0] + ".metrics.jsonl"
    try:
        net, _ = train(cfg, metrics)
    except TrainingDiverged as exc:
        raise CliError(f"training diverged: {exc}") from None
    digest = net.save(a.out, checkpoint_meta(cfg))
    write_manifest(os.path.splitext(a.out)[0] + ".manifest.json", command="train",
                   config=asdict(cfg), seeds=[cfg.seed], checkpoint_sha256=digest)
    print(f"checkpoint {a.out} sha256 {digest}")
    return 0


# solve ------------------------------------------------------------------------

def _read_reference(path):
    if not path:
        return {}
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"instance", "reference"} <= set(rows[0]):
        raise CliError(f"{path}: reference file needs 'instance' and 'reference' columns")
    return {r["instance"]: float(r["reference"]) for r in rows}


def solve_one(job):
    """Run one method on one instance; returns a summary row."""
    path, method, scfg, cni_path, cnc_path, reference, trace_dir = job
    g = graphs.read_instance(path)
    rng = np.random.default_rng(scfg.seed)
    t0 = time.perf_counter()
    cni_net = _load_net(cni_path, "cni")
    cnc_net = _load_net(cnc_path, "cnc")
    problem = scfg.problem
    if method in search.MODES:
        cfg = search.SearchConfig(**{**asdict(scfg), "mode": method})
        res = search.pbnco_run(g, cni_net, cnc_net, cfg, rng, reference)
        bits, trace = res.bits, res.trace
    elif method == "greedy":
        bits, trace = bl.greedy(g, problem), None
    elif method == "ga":
        bits, trace = bl.ga_run(g, problem, bl.GAConfig(population=max(2, scfg.population),
                                generations=scfg.steps, time_budget=scfg.time_budget,
                                seed=scfg.seed), rng, reference)
    elif method == "pso":
        bits, trace = bl.pso_run(g, problem, bl.PSOConfig(swarm=max(2, scfg.population),
                                 iterations=scfg.steps, time_budget=scfg.time_budget,
                                 seed=scfg.seed), rng, reference)
    elif method == "cnc-greedy":
        if cnc_net is None:
            raise CliError("cnc-greedy needs --cnc")
        bits, _ = cnc.cnc_construct(cnc_net, g, np.zeros((0, g.n)), 0.0, rng, problem, "greedy")
        trace = None
    else:
        raise CliError(f"unknown method {method!r}")
    runtime = time.perf_counter() - t0
    value = float(pr.objective(g, bits, problem))
    if problem == pr.MIS and not pr.mis_is_feasible(g, bits):
        raise CliError(f"{method} returned an infeasible set on {path}")
    if trace is not None and trace_dir:
        trace.to_csv(os.path.join(trace_dir, _stem(path) + ".csv"), timing=not scfg.deterministic)
    return {"instance": _stem(path), "objective": value, "reference": reference,
            "ratio": value / reference if reference else math.nan,
            "runtime_seconds": math.nan if scfg.deterministic else runtime,
            "solution": "".join(map(str, bits))}


def cmd_solve(a):
    typed = {}
    if a.budget_steps is not None:
        typed["steps"] = a.budget_steps
    if a.budget_seconds is not None:
        typed["time_budget"] = a.budget_seconds
    if a.problem:
        typed["problem"] = a.problem
    if a.seed is not None:
        typed["seed"] = a.seed
    if a.deterministic:
        typed["deterministic"] = True
    scfg = _load_config(search.SearchConfig, a.config, a.set, **typed)
    a.cni = _shipped(a.cni, "cni", scfg.problem)
    a.cnc = _shipped(a.cnc, "cnc", scfg.problem)
    if a.method not in METHODS:
        raise CliError(f"unknown method {a.method!r}; choose from {', '.join(METHODS)}")
    files = _instances(a.instances)
    refs = _read_reference(a.reference)
    os.makedirs(a.out, exist_ok=True)
    trace_dir = os.path.join(a.out, "traces")
    os.makedirs(trace_dir, exist_ok=True)
    # fail fast on unusable checkpoints before spawning any work
    for path, kind in ((a.cni, "cni"), (a.cnc, "cnc")):
        net = _load_net(path, kind)
        if net is not None:
            search.check_compatible(net, kind, scfg.problem)
    jobs = [(f, a.method, scfg, a.cni, a.cnc, refs.get(_stem(f)), trace_dir) for f in files]
    if a.workers > 1:
        from multiprocessing import Pool
        with Pool(a.workers) as pool:
            rows = pool.map(solve_one, jobs)
    else:
        rows = [solve_one(j) for j in jobs]
    _write_summary(os.path.join(a.out, "summary.csv"), rows, a.method)
    hashes = {k: _file_hash(p) for k, p in (("cni", a.cni), ("cnc", a.cnc)) if p}
    write_manifest(os.path.join(a.out, "manifest.json"), command="solve", method=a.method,
                   config=asdict(scfg), seeds=[scfg.seed], checkpoint_sha256=hashes,
                   instances=[_stem(f) for f in files], workers=a.workers)
    mean = np.mean([r["objective"] for r in rows])
    print(f"{a.method}: {len(rows)} instances, mean objective {mean:.3f}")
    return 0


def _file_hash(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _num(x, digits=None):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.{digits}f}" if digits is not None else repr(float(x))


def _write_summary(path, rows, method):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "instance", "objective", "reference", "ratio", "runtime_seconds",
                    "solution"])
        for r in rows:
            w.writerow([method, r["instance"], _num(r["objective"]), _num(r["reference"]),
                        _num(r["ratio"], 3), _num(r["runtime_seconds"], 3), r["solution"]])
        ratios = [r["ratio"] for r in rows if not math.isnan(r["ratio"])]
        times = [r["runtime_seconds"] for r in rows if not math.isnan(r["runtime_seconds"])]
        w.writerow([method, "MEAN", _num(float(np.mean([r["objective"] for r in rows]))), "",
                    _num(float(np.mean(ratios)), 3) if ratios else "",
                    _num(float(np.mean(times)), 3) if times else "", ""])


# diversity / pareto -----------------------------------------------------------

def cmd_diversity(a):
    a.cnc = _shipped(a.cnc, "cnc", a.problem)
    net = _load_net(a.cnc, "cnc")
    if net is None:
        raise CliError("diversity needs --cnc")
    problem = net.meta.get("problem", a.problem)
    files = _instances(a.instances)
    curves = []
    for i, path in enumerate(files):
        g = graphs.read_instance(path)
        rng = np.random.default_rng([a.seed, i])
        curves.append(diversity_study(net, g, problem, a.omega, rng, a.initial, a.generated,
                                      conditioned=not a.unconditioned))
    mean = np.mean(curves, axis=0)
    with open(a.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["solutions", "mean_pairwise_hamming"])
        for k, v in enumerate(mean, 1):
            w.writerow([k, repr(float(v))])
    write_manifest(a.out + ".manifest.json", command="diversity", omega=a.omega, seed=a.seed,
                   unconditioned=a.unconditioned, checkpoint_sha256=_file_hash(a.cnc),
                   instances=[_stem(f) for f in files])
    print(f"final diversity {mean[-1]:.4f} over {len(files)} instances")
    return 0


def cmd_pareto(a):
    a.cnc = _shipped(a.cnc, "cnc", a.problem)
    net = _load_net(a.cnc, "cnc")
    if net is None:
        raise CliError("pareto needs --cnc")
    problem = net.meta.get("problem", a.problem)
    omegas = [float(x) for x in a.omegas.split(",")]
    if any(not 0.0 <= w <= 1.0 for w in omegas):
        raise CliError("omega values must lie in [0, 1]")
    inst = [graphs.read_instance(p) for p in _instances(a.instances)]
    div, qual = pareto_sweep(net, inst, problem, omegas, np.random.default_rng(a.seed),
                             a.cond_size, a.samples)
    n = len(inst)
    with open(a.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", "mean_distance", "distance_se", "mean_quality", "quality_se"])
        for i, om in enumerate(omegas):
            se = lambda x: float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
            w.writerow([om, repr(float(div[i].mean())), repr(se(div[i])),
                        repr(float(qual[i].mean())), repr(se(qual[i]))])
    print(f"wrote {len(omegas)} points to {a.out}")
    return 0


# oracle -----------------------------------------------------------------------

def cmd_oracle(a):
    rows = []
    for path in _instances(a.instances):
        g = graphs.read_instance(path)
        try:
            value, bits = bl.brute_force(g, a.problem)
        except bl.TooLarge as exc:
            raise CliError(f"{path}: {exc}") from None
        rows.append((_stem(path), value, "".join(map(str, bits))))
    out = open(a.out, "w") if a.out else sys.stdout
    try:
        out.write("instance,reference,solution\n")
        for name, value, bits in rows:
            out.write(f"{name},{value:g},{bits}\n")
    finally:
        if a.out:
            out.close()
    return 0


# parser -----------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="pbnco", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write random instances")
    g.add_argument("--family", choices=("ER", "RB"), default="ER")
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=float)
    g.add_argument("--groups", type=int)
    g.add_argument("--group-size", type=int, default=5)
    g.add_argument("--tightness", type=float, default=0.25)
    g.add_argument("--factor", type=float, default=0.8)
    g.add_argument("--seeds", default="0:10", help="range lo:hi or comma list")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train an improvement or constructive policy")
    t.add_argument("kind", choices=("cni", "cnc"))
    t.add_argument("--config")
    t.add_argument("--set", action="append", metavar="KEY=VALUE")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--metrics", help="metrics JSONL path")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", help="run a method over instances")
    s.add_argument("--instances", required=True)
    s.add_argument("--method", "--mode", dest="method", default=search.PBNCO)
    s.add_argument("--problem", choices=pr.PROBLEMS)
    s.add_argument("--cni", help="checkpoint path, or 'shipped' for the packaged toy policy")
    s.add_argument("--cnc", help="checkpoint path, or 'shipped' for the packaged toy policy")
    s.add_argument("--config")
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.add_argument("--budget-steps", type=int)
    s.add_argument("--budget-seconds", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--reference", help="CSV with instance,reference columns")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--deterministic", action="store_true",
                   help="omit wall-clock fields so outputs are byte-identical")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    d = sub.add_parser("diversity", help="history diversity of constructive sampling")
    d.add_argument("--cnc", required=True, help="checkpoint path or 'shipped'")
    d.add_argument("--instances", required=True)
    d.add_argument("--problem", choices=pr.PROBLEMS, default=pr.MC)
    d.add_argument("--omega", type=float, default=0.5)
    d.add_argument("--unconditioned", action="store_true")
    d.add_argument("--initial", type=int, default=20)
    d.add_argument("--generated", type=int, default=100)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_diversity)

    q = sub.add_parser("pareto", help="quality/diversity sweep over omega")
    q.add_argument("--cnc", required=True, help="checkpoint path or 'shipped'")
    q.add_argument("--instances", required=True)
    q.add_argument("--problem", choices=pr.PROBLEMS, default=pr.MC)
    q.add_argument("--omegas", default="0,0.25,0.5,0.75,1")
    q.add_argument("--cond-size", type=int, default=10)
    q.add_argument("--samples", type=int, default=8)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_pareto)

    o = sub.add_parser("oracle", help="exact optima of small instances")
    o.add_argument("--instances", required=True)
    o.add_argument("--problem", choices=pr.PROBLEMS, default=pr.MC)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except (CliError, graphs.ParseError, search.IncompatibleCheckpoint, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
