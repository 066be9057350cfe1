"""Graph-transformer encoder with an MLP node decoder.

Node features are projected to ``d`` dims, then ``L`` layers of multi-head
attention restricted to each node's closed neighbourhood (plus residual,
LayerNorm and a GeLU feed-forward block). Edge features enter attention as a
per-head additive bias. The decoder maps each embedding to one logit.

Inputs are batched: ``node_features`` has shape ``(B, n, c)`` and every batch
row shares the same graph.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad

CHECKPOINT_MAGIC = b"PBNCO-CKPT 1\n"


@dataclass(frozen=True)
class NetConfig:
    node_in: int
    edge_in: int = 1
    layers: int = 3
    dim: int = 32
    heads: int = 4
    ff_dim: int = 128
    anchor: bool = False
    dense_attention: bool = False

    def __post_init__(self):
        if self.dim % self.heads:
            raise ValueError(f"heads ({self.heads}) must divide dim ({self.dim})")


def _param_shapes(cfg):
    d, f, h = cfg.dim, cfg.ff_dim, cfg.heads
    shapes = [("in.w", (cfg.node_in, d)), ("in.b", (d,))]
    if cfg.anchor:
        shapes.append(("anchor", (d,)))
    for l in range(cfg.layers):
        p = f"l{l}."
        shapes += [
            (p + "edge.w", (cfg.edge_in, h)),
            (p + "q.w", (d, d)), (p + "q.b", (d,)),
            (p + "k.w", (d, d)), (p + "k.b", (d,)),
            (p + "v.w", (d, d)), (p + "v.b", (d,)),
            (p + "o.w", (d, d)), (p + "o.b", (d,)),
            (p + "ln1.g", (d,)), (p + "ln1.b", (d,)),
            (p + "ff1.w", (d, f)), (p + "ff1.b", (f,)),
            (p + "ff2.w", (f, d)), (p + "ff2.b", (d,)),
            (p + "ln2.g", (d,)), (p + "ln2.b", (d,)),
        ]
    shapes += [("dec1.w", (d, d)), ("dec1.b", (d,)), ("dec2.w", (d, 1)), ("dec2.b", (1,))]
    return shapes


class PolicyNet:
    def __init__(self, cfg, seed=0):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        self.params = {}
        for name, shape in _param_shapes(cfg):
            if name.endswith(".g"):
                value = np.ones(shape)
            elif name.endswith(".b"):
                value = np.zeros(shape)
            else:
                bound = 1.0 / np.sqrt(shape[0])
                value = rng.uniform(-bound, bound, size=shape)
            self.params[name] = ad.parameter(value)
        self.meta = {}
        self._fast = None

    @property
    def names(self):
        return list(self.params)

    def arrays(self):
        return [p.value for p in self.params.values()]

    def grads(self):
        return [p.grad for p in self.params.values()]

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def copy(self):
        other = PolicyNet.__new__(PolicyNet)
        other.cfg = self.cfg
        other.params = {k: ad.parameter(v.value.copy()) for k, v in self.params.items()}
        other.meta = dict(self.meta)
        other._fast = None
        return other

    # forward ---------------------------------------------------------------

    def encode(self, node_features, edge_features, adjacency):
        cfg, P = self.cfg, self.params
        x = np.asarray(node_features, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        B, n, c = x.shape
        if c != cfg.node_in:
            raise ad.ShapeError(f"encode: expected {cfg.node_in} node channels, got {c}")
        e = np.asarray(edge_features, dtype=np.float64)
        if e.shape != (n, n, cfg.edge_in):
            raise ad.ShapeError(f"encode: edge features {e.shape} != {(n, n, cfg.edge_in)}")
        d, nh = cfg.dim, cfg.heads
        dk = d // nh

        h = ad.matmul(x, P["in.w"]) + P["in.b"]
        if cfg.anchor:
            onehot = np.zeros((n, 1))
            onehot[0] = 1.0
            h = h + ad.multiply(onehot, P["anchor"])
        if cfg.dense_attention:
            mask = np.zeros((n, n))
        else:
            allowed = np.asarray(adjacency, dtype=bool) | np.eye(n, dtype=bool)
            mask = np.where(allowed, 0.0, -np.inf)
        inv_sqrt = 1.0 / np.sqrt(dk)

        def heads(t):
            return ad.transpose(ad.reshape(t, (B, n, nh, dk)), (0, 2, 1, 3))

        for l in range(cfg.layers):
            p = f"l{l}."
            q = heads(ad.matmul(h, P[p + "q.w"]) + P[p + "q.b"])
            k = heads(ad.matmul(h, P[p + "k.w"]) + P[p + "k.b"])
            v = heads(ad.matmul(h, P[p + "v.w"]) + P[p + "v.b"])
            scores = ad.scale(ad.matmul(q, ad.swapaxes(k, -1, -2)), inv_sqrt)
            ebias = ad.transpose(ad.matmul(e, P[p + "edge.w"]), (2, 0, 1))
            att = ad.row_softmax(scores + ebias + mask)
            o = ad.reshape(ad.transpose(ad.matmul(att, v), (0, 2, 1, 3)), (B, n, d))
            o = ad.matmul(o, P[p + "o.w"]) + P[p + "o.b"]
            h = ad.layer_norm(h + o) * P[p + "ln1.g"] + P[p + "ln1.b"]
            f = ad.gelu(ad.matmul(h, P[p + "ff1.w"]) + P[p + "ff1.b"])
            f = ad.matmul(f, P[p + "ff2.w"]) + P[p + "ff2.b"]
            h = ad.layer_norm(h + f) * P[p + "ln2.g"] + P[p + "ln2.b"]
        return h

    def decode_node_logits(self, embeddings):
        P = self.params
        z = ad.gelu(ad.matmul(embeddings, P["dec1.w"]) + P["dec1.b"])
        out = ad.matmul(z, P["dec2.w"]) + P["dec2.b"]
        return ad.reshape(out, out.shape[:-1])

    def logits(self, node_features, edge_features, adjacency):
        """(B, n) logit Tensor."""
        return self.decode_node_logits(self.encode(node_features, edge_features, adjacency))

    def logits_np(self, node_features, edge_features, adjacency):
        """Inference-only logits as a float64 array.

        Runs a float32 numpy forward with fused projections; call
        :meth:`touch` after editing parameter arrays in place.
        """
        return _fast_logits(self, node_features, edge_features, adjacency)

    def touch(self):
        self._fast = None

    # persistence -----------------------------------------------------------

    def to_bytes(self, meta=None):
        header = {
            "config": asdict(self.cfg),
            "meta": meta or {},
            "params": [[k, list(v.shape)] for k, v in self.params.items()],
        }
        body = b"".join(np.ascontiguousarray(v.value, dtype="<f8").tobytes()
                        for v in self.params.values())
        return CHECKPOINT_MAGIC + json.dumps(header, sort_keys=True).encode() + b"\n" + body

    @classmethod
    def from_bytes(cls, data):
        if not data.startswith(CHECKPOINT_MAGIC):
            raise ValueError("not a checkpoint (bad magic header)")
        rest = data[len(CHECKPOINT_MAGIC):]
        line, body = rest.split(b"\n", 1)
        header = json.loads(line)
        net = cls.__new__(cls)
        net.cfg = NetConfig(**header["config"])
        expected = [[k, list(s)] for k, s in _param_shapes(net.cfg)]
        if header["params"] != expected:
            raise ValueError("checkpoint parameter layout does not match its config")
        net.params = {}
        offset = 0
        for name, shape in header["params"]:
            size = int(np.prod(shape)) * 8
            arr = np.frombuffer(body[offset:offset + size], dtype="<f8").reshape(shape)
            net.params[name] = ad.parameter(arr.copy())
            offset += size
        if offset != len(body):
            raise ValueError("checkpoint body has trailing or missing bytes")
        net.meta = header.get("meta", {})
        net._fast = None
        return net

    def save(self, path, meta=None):
        data = self.to_bytes(meta)
        with open(path, "wb") as fh:
            fh.write(data)
        return hashlib.sha256(data).hexdigest()

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def checkpoint_hash(net, meta=None):
    return hashlib.sha256(net.to_bytes(meta)).hexdigest()


def _fast_params(net):
    cache = getattr(net, "_fast", None)
    if cache is not None:
        return cache
    P = {k: v.value.astype(np.float32) for k, v in net.params.items()}
    for l in range(net.cfg.layers):
        p = f"l{l}."
        P[p + "qkv.w"] = np.concatenate([P[p + "q.w"], P[p + "k.w"], P[p + "v.w"]], axis=1)
        P[p + "qkv.b"] = np.concatenate([P[p + "q.b"], P[p + "k.b"], P[p + "v.b"]])
    net._fast = P
    return P


def _gelu32(x):
    t = x * x
    t *= np.float32(0.044715)
    t += np.float32(1.0)
    t *= x
    t *= np.float32(0.7978845608028654)
    np.tanh(t, out=t)
    t += np.float32(1.0)
    t *= x
    t *= np.float32(0.5)
    return t


# Reductions over short trailing axes are slow in numpy; row sums go through
# a matmul with a ones column and row maxima through a transposed copy.

def _row_sum(x):
    return x @ np.ones((x.shape[-1], 1), dtype=x.dtype)


def _row_max(x):
    return np.ascontiguousarray(np.moveaxis(x, -1, 0)).max(axis=0)[..., None]


def _ln32(x, g, b, eps=1e-5):
    inv_d = np.float32(1.0 / x.shape[-1])
    xc = x - _row_sum(x) * inv_d
    var = _row_sum(xc * xc) * inv_d
    return xc * (g / np.sqrt(var + np.float32(eps))) + b


def _fast_logits(net, node_features, edge_features, adjacency):
    cfg = net.cfg
    P = _fast_params(net)
    x = np.asarray(node_features, dtype=np.float32)
    if x.ndim == 2:
        x = x[None]
    B, n, c = x.shape
    if c != cfg.node_in:
        raise ad.ShapeError(f"encode: expected {cfg.node_in} node channels, got {c}")
    e = np.asarray(edge_features, dtype=np.float32)
    d, nh = cfg.dim, cfg.heads
    dk = d // nh
    h = x @ P["in.w"] + P["in.b"]
    if cfg.anchor:
        h[:, 0, :] += P["anchor"]
    if cfg.dense_attention:
        mask = np.zeros((n, n), dtype=np.float32)
    else:
        allowed = np.asarray(adjacency, dtype=bool) | np.eye(n, dtype=bool)
        mask = np.where(allowed, np.float32(0.0), np.float32(-np.inf))
    inv_sqrt = np.float32(1.0 / np.sqrt(dk))
    for l in range(cfg.layers):
        p = f"l{l}."
        qkv = (h @ P[p + "qkv.w"] + P[p + "qkv.b"]).reshape(B, n, 3, nh, dk)
        q = qkv[:, :, 0].transpose(0, 2, 1, 3)
        k = qkv[:, :, 1].transpose(0, 2, 3, 1)
        v = qkv[:, :, 2].transpose(0, 2, 1, 3)
        bias = (e @ P[p + "edge.w"]).transpose(2, 0, 1) + mask
        scores = (q @ k) * inv_sqrt + bias
        scores -= _row_max(scores)
        np.exp(scores, out=scores)
        scores /= _row_sum(scores)
        o = (scores @ v).transpose(0, 2, 1, 3).reshape(B, n, d)
        h = _ln32(h + o @ P[p + "o.w"] + P[p + "o.b"], P[p + "ln1.g"], P[p + "ln1.b"])
        f = _gelu32(h @ P[p + "ff1.w"] + P[p + "ff1.b"]) @ P[p + "ff2.w"] + P[p + "ff2.b"]
        h = _ln32(h + f, P[p + "ln2.g"], P[p + "ln2.b"])
    z = _gelu32(h @ P["dec1.w"] + P["dec1.b"])
    return (z @ P["dec2.w"] + P["dec2.b"])[..., 0].astype(np.float64)


# action selection ------------------------------------------------------------

def action_distribution(logits, legal):
    """Softmax restricted to legal entries (rows of a 2-D input are independent)."""
    logits = np.asarray(logits, dtype=np.float64)
    legal = np.asarray(legal, dtype=bool)
    if not legal.any(axis=-1).all():
        raise ValueError("no legal action available")
    x = np.where(legal, logits, -np.inf)
    x = x - x.max(axis=-1, keepdims=True)
    e = np.where(legal, np.exp(x), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


def sample_action(dist, rng):
    """Inverse-CDF sampling; rows of a 2-D ``dist`` are sampled independently."""
    dist = np.asarray(dist)
    single = dist.ndim == 1
    dist = np.atleast_2d(dist)
    cdf = np.cumsum(dist, axis=-1)
    u = rng.random(len(dist))[:, None] * cdf[:, -1:]
    idx = (cdf <= u).sum(axis=-1)
    # never land on a zero-probability entry because of rounding at the top
    idx = np.minimum(idx, dist.shape[-1] - 1)
    for r in np.flatnonzero(dist[np.arange(len(dist)), idx] == 0):
        idx[r] = np.flatnonzero(dist[r])[-1]
    return int(idx[0]) if single else idx


def greedy_action(dist):
    dist = np.asarray(dist)
    idx = np.argmax(dist, axis=-1)  # first maximal index wins ties
    return int(idx) if dist.ndim == 1 else idx


def masked_log_probs(logits, legal):
    """Tensor of log pi over node actions with illegal entries at -inf."""
    mask = np.where(np.asarray(legal, dtype=bool), 0.0, -np.inf)
    return ad.log_softmax(logits + mask)
