"""Small recurrent policy/value network with hand-written gradients.

Everything is plain numpy, float64. The network is

    obs vector -> dense encoder (tanh stack) -> recurrent cell -> heads

where the recurrent cell is either a GRU or a memoryless pass-through,
and the heads are a categorical policy head (logits) and a scalar value
head. ``forward`` optionally records a cache entry; ``backward``
consumes it, accumulates parameter gradients in place and returns the
gradient w.r.t. the incoming hidden state so whole sequences can be
backpropagated through time by iterating in reverse.

All batched operations take arrays shaped (B, dim).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DivergenceError(RuntimeError):
    """Raised when an optimizer step sees non-finite gradients."""


CELL_GRU = "gru"
CELL_NONE = "none"


@dataclass(frozen=True)
class NetConfig:
    input_dim: int
    encoder_dims: tuple = (64,)
    hidden_size: int = 64
    n_actions: int = 3
    cell: str = CELL_GRU

    @property
    def head_dim(self) -> int:
        # pass-through cell feeds the heads straight from the encoder
        return self.hidden_size if self.cell == CELL_GRU else self.encoder_dims[-1]

    def block_shapes(self) -> dict:
        shapes = {}
        prev = self.input_dim
        for i, d in enumerate(self.encoder_dims):
            shapes[f"enc{i}_W"] = (d, prev)
            shapes[f"enc{i}_b"] = (d,)
            prev = d
        if self.cell == CELL_GRU:
            h = self.hidden_size
            for gate in ("r", "z", "n"):
                shapes[f"gru_W{gate}"] = (h, prev)
                shapes[f"gru_U{gate}"] = (h, h)
                shapes[f"gru_b{gate}"] = (h,)
        shapes["pi_W"] = (self.n_actions, self.head_dim)
        shapes["pi_b"] = (self.n_actions,)
        shapes["v_w"] = (1, self.head_dim)
        shapes["v_b"] = (1,)
        return shapes


def _orthogonal(shape, gain, rng):
    a = rng.standard_normal(shape)
    q, r = np.linalg.qr(a.T if shape[0] < shape[1] else a)
    q = q * np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return gain * q[: shape[0], : shape[1]]


class PolicyParams:
    """Named parameter blocks plus matching gradient and Adam moment blocks."""

    def __init__(self, cfg: NetConfig, seed=None, init=True):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        self.blocks = {}
        for name, shape in cfg.block_shapes().items():
            if not init or name.endswith("_b") or name == "v_b":
                self.blocks[name] = np.zeros(shape)
            elif name == "pi_W":
                # near-uniform initial policy
                self.blocks[name] = _orthogonal(shape, 0.01, rng)
            else:
                self.blocks[name] = _orthogonal(shape, 1.0, rng)
        self.grads = {k: np.zeros_like(v) for k, v in self.blocks.items()}
        self.m = {k: np.zeros_like(v) for k, v in self.blocks.items()}
        self.v = {k: np.zeros_like(v) for k, v in self.blocks.items()}
        self.step = 0

    def zero_grads(self):
        for g in self.grads.values():
            g[...] = 0.0

    def copy(self) -> "PolicyParams":
        """Deep copy (parameters, gradients, moments, step counter)."""
        out = PolicyParams(self.cfg, init=False)
        for k in self.blocks:
            out.blocks[k] = self.blocks[k].copy()
            out.grads[k] = self.grads[k].copy()
            out.m[k] = self.m[k].copy()
            out.v[k] = self.v[k].copy()
        out.step = self.step
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self.blocks.values()])

    def load_flat(self, vec):
        i = 0
        for b in self.blocks.values():
            n = b.size
            b[...] = np.asarray(vec[i : i + n]).reshape(b.shape)
            i += n
        if i != len(vec):
            raise ValueError("flat vector length does not match parameter count")

    def grad_flat(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.grads.values()])

    def n_params(self) -> int:
        return sum(b.size for b in self.blocks.values())


@dataclass
class ActionDistribution:
    """Categorical distribution over the discrete action set."""

    logits: np.ndarray
    probs: np.ndarray = field(default=None)
    log_probs: np.ndarray = field(default=None)

    def __post_init__(self):
        if not np.all(np.isfinite(self.logits)):
            raise ValueError("non-finite logits")
        if self.log_probs is None:
            self.log_probs = log_softmax(self.logits)
        if self.probs is None:
            self.probs = np.exp(self.log_probs)


def log_softmax(logits):
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(logits))


def entropy(dist: ActionDistribution) -> float:
    """-sum p log p with the 0*log0 := 0 convention."""
    p, lp = dist.probs, dist.log_probs
    terms = np.where(p > 0.0, p * lp, 0.0)
    return float(-np.sum(terms))


def sample_action(dist: ActionDistribution, rng) -> tuple:
    """Inverse-CDF draw; consumes exactly one uniform from ``rng``."""
    u = rng.random()
    cdf = np.cumsum(dist.probs)
    a = int(np.searchsorted(cdf, u, side="right"))
    a = min(a, len(dist.probs) - 1)
    return a, float(dist.log_probs[a])


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class PolicyNet:
    """Forward/backward passes over a PolicyParams store.

    ``forward`` is a pure function of (params, x, h); passing ``cache``
    (a list) appends one entry per call with everything ``backward``
    needs. Batched: x is (B, input_dim), h is (B, hidden_size).
    """

    def __init__(self, cfg: NetConfig, seed=None):
        self.cfg = cfg
        self.params = PolicyParams(cfg, seed=seed)

    def initial_state(self, batch=1) -> np.ndarray:
        return np.zeros((batch, self.cfg.hidden_size))

    def forward(self, x, h, params=None, cache=None):
        p = (params or self.params).blocks
        cfg = self.cfg
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        h = np.atleast_2d(np.asarray(h, dtype=np.float64))
        if x.shape[1] != cfg.input_dim:
            raise ValueError(
                f"observation dim {x.shape[1]} != configured input {cfg.input_dim}"
            )
        if h.shape[1] != cfg.hidden_size:
            raise ValueError(
                f"state dim {h.shape[1]} != configured hidden {cfg.hidden_size}"
            )

        acts = []
        a = x
        for i in range(len(cfg.encoder_dims)):
            a = np.tanh(a @ p[f"enc{i}_W"].T + p[f"enc{i}_b"])
            acts.append(a)

        if cfg.cell == CELL_GRU:
            r = _sigmoid(a @ p["gru_Wr"].T + h @ p["gru_Ur"].T + p["gru_br"])
            z = _sigmoid(a @ p["gru_Wz"].T + h @ p["gru_Uz"].T + p["gru_bz"])
            m = h @ p["gru_Un"].T + p["gru_bn"]
            n = np.tanh(a @ p["gru_Wn"].T + r * m)
            h_new = (1.0 - z) * n + z * h
            head_in = h_new
            cell_cache = (r, z, m, n)
        else:
            h_new = h
            head_in = a
            cell_cache = None

        logits = head_in @ p["pi_W"].T + p["pi_b"]
        value = (head_in @ p["v_w"].T + p["v_b"])[:, 0]

        if cache is not None:
            cache.append(
                {"x": x, "h": h, "acts": acts, "cell": cell_cache, "head_in": head_in}
            )
        return logits, value, h_new

    def backward(self, cache_entry, dlogits, dvalue, dh_next=None, params=None):
        """Accumulate grads for one cached step; returns dL/dh_in.

        ``dh_next`` carries the gradient flowing into this step's output
        hidden state from later timesteps (BPTT).
        """
        if cache_entry is None or "head_in" not in cache_entry:
            raise RuntimeError("backward requires the cache written by forward")
        pp = params or self.params
        p, g = pp.blocks, pp.grads
        cfg = self.cfg

        x, h = cache_entry["x"], cache_entry["h"]
        acts = cache_entry["acts"]
        head_in = cache_entry["head_in"]
        dlogits = np.atleast_2d(np.asarray(dlogits, dtype=np.float64))
        dvalue = np.asarray(dvalue, dtype=np.float64).reshape(-1, 1)

        g["pi_W"] += dlogits.T @ head_in
        g["pi_b"] += dlogits.sum(axis=0)
        g["v_w"] += dvalue.T @ head_in
        g["v_b"] += dvalue.sum(axis=0)
        d_head = dlogits @ p["pi_W"] + dvalue @ p["v_w"]

        if cfg.cell == CELL_GRU:
            if dh_next is not None:
                d_hnew = d_head + dh_next
            else:
                d_hnew = d_head
            r, z, m, n = cache_entry["cell"]
            a = acts[-1]
            dz = d_hnew * (h - n)
            dn = d_hnew * (1.0 - z)
            da_n = dn * (1.0 - n * n)
            dr = da_n * m
            dm = da_n * r
            da_r = dr * r * (1.0 - r)
            da_z = dz * z * (1.0 - z)

            g["gru_Wr"] += da_r.T @ a
            g["gru_Ur"] += da_r.T @ h
            g["gru_br"] += da_r.sum(axis=0)
            g["gru_Wz"] += da_z.T @ a
            g["gru_Uz"] += da_z.T @ h
            g["gru_bz"] += da_z.sum(axis=0)
            g["gru_Wn"] += da_n.T @ a
            g["gru_Un"] += dm.T @ h
            g["gru_bn"] += dm.sum(axis=0)

            da = da_r @ p["gru_Wr"] + da_z @ p["gru_Wz"] + da_n @ p["gru_Wn"]
            dh_in = (
                da_r @ p["gru_Ur"]
                + da_z @ p["gru_Uz"]
                + dm @ p["gru_Un"]
                + d_hnew * z
            )
        else:
            da = d_head
            dh_in = np.zeros_like(h) if dh_next is None else dh_next.copy()

        for i in reversed(range(len(cfg.encoder_dims))):
            ai = acts[i]
            dz_i = da * (1.0 - ai * ai)
            inp = acts[i - 1] if i > 0 else x
            g[f"enc{i}_W"] += dz_i.T @ inp
            g[f"enc{i}_b"] += dz_i.sum(axis=0)
            da = dz_i @ p[f"enc{i}_W"]
        return dh_in


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 2.5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0


def global_grad_norm(params: PolicyParams) -> float:
    total = 0.0
    for gr in params.grads.values():
        total += float(np.sum(gr * gr))
    return float(np.sqrt(total))


def clip_grads(params: PolicyParams, max_norm: float) -> float:
    """Scale gradients in place to global L2 norm <= max_norm; returns the pre-clip norm."""
    norm = global_grad_norm(params)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for gr in params.grads.values():
            gr *= scale
    return norm


def adam_step(params: PolicyParams, hyper: AdamHyper = AdamHyper()):
    """One bias-corrected Adam update; zeroes gradients afterwards."""
    for name, gr in params.grads.items():
        if not np.all(np.isfinite(gr)):
            raise DivergenceError(f"non-finite gradient in block {name}")
    params.step += 1
    t = params.step
    b1, b2 = hyper.beta1, hyper.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for name, w in params.blocks.items():
        gr = params.grads[name]
        m = params.m[name]
        v = params.v[name]
        m[...] = b1 * m + (1.0 - b1) * gr
        v[...] = b2 * v + (1.0 - b2) * gr * gr
        if hyper.weight_decay:
            w -= hyper.lr * hyper.weight_decay * w
        w -= hyper.lr * (m / bc1) / (np.sqrt(v / bc2) + hyper.eps)
    params.zero_grads()
    return params
