"""REINFORCE training for the improvement (cNI) and constructive (cNC) policies."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from . import cnc
from . import gnn
from . import graphs
from . import problems as pr
from .cni import cni_net_config, cni_reward, policy_moves
from .memory import SharedMemory

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    kind: str = "cni"              # cni | cnc
    problem: str = "MC"
    family: str = "ER"
    n_min: int = 20
    n_max: int = 60
    edge_p: float = 0.15
    rb_group_size: int = 5
    rb_tightness: float = 0.25
    rb_factor: float = 0.8
    population: int = 20           # cNI trajectories per episode
    t_train: int = 0               # 0 -> 2 |V|
    gamma: float = 0.95
    w_rep: float = 0.1
    reward_mode: str = "normalized"  # normalized | raw
    knn_k: int = 20
    memory_capacity: int = 10_000
    candidates: int = 8            # cNC constructions per instance
    k_max: int = 20
    beta_alpha: float = 0.2
    beta_beta: float = 0.2
    lr: float = 1e-4
    episodes: int = 1000
    seed: int = 0
    layers: int = 3
    dim: int = 32
    heads: int = 4
    ff_dim: int = 128
    dense_attention: bool = False
    entropy_coef: float = 0.0
    advantage_norm: bool = False   # divide cNC advantages by their group std
    chunk: int = 256               # states per backward pass in cNI training
    validate_every: int = 50
    validation_instances: int = 8


def compute_returns(rewards, gamma):
    """Discounted suffix sums along the last axis."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    r = np.asarray(rewards, dtype=np.float64)
    out = np.zeros_like(r)
    acc = np.zeros(r.shape[:-1])
    for t in range(r.shape[-1] - 1, -1, -1):
        acc = r[..., t] + gamma * acc
        out[..., t] = acc
    return out


def pg_loss(log_probs, advantages, normalizer=1.0):
    """-sum(log pi * A) / normalizer; advantages are constants."""
    adv = np.asarray(advantages, dtype=np.float64)
    if adv.size == 0:
        raise ValueError("empty batch")
    return ad.scale(ad.sum(ad.multiply(log_probs, adv)), -1.0 / normalizer)


def mean_baseline_advantages(returns, axis=0):
    r = np.asarray(returns, dtype=np.float64)
    return r - r.mean(axis=axis, keepdims=True)


def sample_instance(cfg, rng):
    seed = int(rng.integers(2**63 - 1))
    if cfg.family == "ER":
        n = int(rng.integers(cfg.n_min, cfg.n_max + 1))
        return graphs.generate_er(n, cfg.edge_p, seed)
    if cfg.family == "RB":
        groups = max(2, int(rng.integers(cfg.n_min, cfg.n_max + 1)) // cfg.rb_group_size)
        return graphs.generate_rb(groups, cfg.rb_group_size, cfg.rb_tightness, cfg.rb_factor, seed)
    raise ValueError(f"unknown family {cfg.family!r}")


def new_net(cfg):
    arch = dict(layers=cfg.layers, dim=cfg.dim, heads=cfg.heads, ff_dim=cfg.ff_dim,
                dense_attention=cfg.dense_attention)
    if cfg.kind == "cni":
        net_cfg = cni_net_config(**arch)
    elif cfg.kind == "cnc":
        net_cfg = cnc.cnc_net_config(cfg.problem, cfg.k_max, **arch)
    else:
        raise ValueError(f"kind must be 'cni' or 'cnc', got {cfg.kind!r}")
    return gnn.PolicyNet(net_cfg, seed=cfg.seed)


class _Optimizer:
    def __init__(self, net, lr):
        self.net = net
        self.lr = lr
        self.state = ad.AdamState([a.shape for a in net.arrays()])

    def step_from_loss_grads(self):
        # params hold d(loss)/d(theta); ascend J = -loss
        grads = [None if g is None else -g for g in self.net.grads()]
        ad.adam_step(self.net.arrays(), grads, self.state, self.lr)
        self.net.zero_grad()
        self.net.touch()


def _check_finite(value, episode, extra):
    if not np.isfinite(value):
        raise TrainingDiverged(f"non-finite loss at episode {episode}: {json.dumps(extra, default=float)}")


# cNI ----------------------------------------------------------------------------

def cni_rollout(net, g, cfg, rng, S0=None, mode="sample", record=True):
    """Roll ``population`` trajectories with step-barrier memory writes.

    Returns a dict with features, legal masks, chosen nodes, reward arrays (P, T)
    and per-step trajectory bests.
    """
    P = cfg.population
    T = cfg.t_train or 2 * g.n
    rs = pr.reward_scale(g, cfg.problem) if cfg.reward_mode == "normalized" else None
    S = pr.random_solutions(g, cfg.problem, rng, P) if S0 is None else np.array(S0, dtype=np.uint8)
    mem = SharedMemory(g.n, cfg.memory_capacity)
    f = pr.objective(g, S, cfg.problem)
    mem.insert_many(S, f)
    best = f.copy()
    best0 = best.copy()
    feats, legals, nodes = [], [], []
    r_tot = np.zeros((P, T))
    r_obj = np.zeros((P, T))
    r_rep = np.zeros((P, T))
    for t in range(T):
        Z = mem.knn(S, cfg.knn_k)[0]
        new, chosen, _, x, legal = policy_moves(net, g, S, Z, cfg.problem, rng, mode)
        f_new = pr.objective(g, new, cfg.problem)
        revisited = np.array([mem.contains(s) for s in new])
        r_tot[:, t], r_obj[:, t], r_rep[:, t], best = cni_reward(best, f_new, revisited, cfg.w_rep, rs)
        if record:
            feats.append(x)
            legals.append(legal)
            nodes.append(chosen)
        mem.insert_many(new, f_new)
        S = new
    return dict(features=feats, legal=legals, nodes=nodes, r_total=r_tot, r_obj=r_obj,
                r_rep=r_rep, best0=best0, best=best, rs=rs, final=S)


def _cni_update(net, g, roll, cfg, opt):
    P, T = roll["r_total"].shape
    returns = compute_returns(roll["r_total"], cfg.gamma)
    adv = mean_baseline_advantages(returns, axis=0)  # per-timestep population mean
    X = np.stack(roll["features"], axis=1).reshape(P * T, g.n, 2)
    L = np.stack(roll["legal"], axis=1).reshape(P * T, g.n)
    A = np.stack(roll["nodes"], axis=1).reshape(P * T)
    adv = adv.reshape(P * T)
    edge = pr.edge_features(g)
    total = 0.0
    for lo in range(0, P * T, cfg.chunk):
        sl = slice(lo, lo + cfg.chunk)
        logits = net.logits(X[sl], edge, g.adjacency)
        lp_all = gnn.masked_log_probs(logits, L[sl])
        lp = ad.take_along_last(lp_all, A[sl])
        loss = pg_loss(lp, adv[sl], normalizer=P)
        if cfg.entropy_coef:
            loss = loss + ad.scale(_entropy(logits, L[sl]), -cfg.entropy_coef / P)
        loss.backward()
        total += float(loss.value)
    return total


def _entropy(logits, legal):
    mask = np.where(legal, 0.0, -1e9)
    lp = ad.log_softmax(logits + mask)
    return ad.neg(ad.sum(ad.multiply(ad.exp(lp), lp)))


def train_cni(cfg, metrics_path=None, net=None, callback=None):
    rng = np.random.default_rng(cfg.seed)
    net = new_net(cfg) if net is None else net
    opt = _Optimizer(net, cfg.lr)
    val = [sample_instance(cfg, np.random.default_rng([cfg.seed, 1, i]))
           for i in range(cfg.validation_instances)]
    metrics = []
    out = open(metrics_path, "w") if metrics_path else None
    try:
        for ep in range(cfg.episodes):
            g = sample_instance(cfg, rng)
            roll = cni_rollout(net, g, cfg, rng)
            loss = _cni_update(net, g, roll, cfg, opt)
            _check_finite(loss, ep, {"n": g.n, "mean_reward": roll["r_total"].mean()})
            opt.step_from_loss_grads()
            row = {"episode": ep, "mean_reward": float(roll["r_total"].sum(axis=1).mean()),
                   "loss": loss}
            if cfg.validate_every and (ep + 1) % cfg.validate_every == 0:
                row["validation_objective"] = validate_cni(net, val, cfg)
                if callback:
                    row.update(callback(ep, net) or {})
            metrics.append(row)
            if out:
                out.write(json.dumps(row) + "\n")
    finally:
        if out:
            out.close()
    return net, metrics


def validate_cni(net, instances, cfg):
    """Mean trajectory-best objective over a fixed-seed rollout per instance."""
    vals = []
    for i, g in enumerate(instances):
        rng = np.random.default_rng([cfg.seed, 2, i])
        roll = cni_rollout(net, g, cfg, rng, record=False)
        vals.append(float(roll["best"].max()))
    return float(np.mean(vals))


# cNC ----------------------------------------------------------------------------

def _bernoulli_entropy(logits):
    """Mean per-node entropy of the independent label distributions."""
    p1, p0 = ad.sigmoid(logits), ad.sigmoid(ad.neg(logits))
    h = ad.multiply(p1, ad.log_sigmoid(logits)) + ad.multiply(p0, ad.log_sigmoid(ad.neg(logits)))
    return ad.neg(ad.mean(h))


def synthetic_conditioning(g, cfg, rng):
    size = int(rng.integers(0, cfg.k_max + 1))
    if size == 0:
        return np.zeros((0, g.n), dtype=np.uint8)
    return pr.random_solutions(g, cfg.problem, rng, size)


def train_cnc(cfg, metrics_path=None, net=None, callback=None):
    rng = np.random.default_rng(cfg.seed)
    net = new_net(cfg) if net is None else net
    opt = _Optimizer(net, cfg.lr)
    val = [sample_instance(cfg, np.random.default_rng([cfg.seed, 1, i]))
           for i in range(cfg.validation_instances)]
    metrics = []
    out = open(metrics_path, "w") if metrics_path else None
    try:
        for ep in range(cfg.episodes):
            g = sample_instance(cfg, rng)
            cond = synthetic_conditioning(g, cfg, rng)
            omega = float(cnc.sample_omega(rng, cfg.beta_alpha, cfg.beta_beta))
            logits = cnc.cnc_logits(net, g, cond, omega, grad=True)
            sols, decided, dbits = cnc.decode(g, logits.value, cfg.problem, rng, "sample",
                                              cfg.candidates)
            reward = cnc.cnc_reward(g, sols, cond, omega, cfg.problem)
            adv = mean_baseline_advantages(reward)
            if cfg.advantage_norm:
                adv = adv / (adv.std() + 1e-8)
            lp = cnc.decision_log_prob_tensor(logits, decided, dbits)
            loss = pg_loss(lp, adv, normalizer=cfg.candidates)
            if cfg.entropy_coef:
                loss = loss + ad.scale(_bernoulli_entropy(logits), -cfg.entropy_coef)
            _check_finite(float(loss.value), ep, {"n": g.n, "omega": omega})
            loss.backward()
            opt.step_from_loss_grads()
            row = {"episode": ep, "mean_reward": float(reward.mean()), "loss": float(loss.value)}
            if cfg.validate_every and (ep + 1) % cfg.validate_every == 0:
                row["validation_objective"] = validate_cnc(net, val, cfg)
                if callback:
                    row.update(callback(ep, net) or {})
            metrics.append(row)
            if out:
                out.write(json.dumps(row) + "\n")
    finally:
        if out:
            out.close()
    return net, metrics


def validate_cnc(net, instances, cfg):
    """Mean normalized objective of greedy omega=0 constructions with empty K."""
    vals = []
    for g in instances:
        s, _ = cnc.cnc_construct(net, g, np.zeros((0, g.n)), 0.0, None, cfg.problem, "greedy")
        vals.append(pr.normalize(pr.objective(g, s, cfg.problem), pr.reward_scale(g, cfg.problem)))
    return float(np.mean(vals))


def train(cfg, metrics_path=None):
    return (train_cni if cfg.kind == "cni" else train_cnc)(cfg, metrics_path)


def checkpoint_meta(cfg, problem=None):
    return {"kind": cfg.kind, "problem": problem or cfg.problem, "train_config": asdict(cfg)}
