"""Conditional normalizing flow with exact log-determinants and gradients.

The flow is a stack of affine coupling layers.  Each coupling transforms a
seeded random half of the coordinates conditioned on the other half plus an
embedding of the conditioning vector; the seeded splits play the role of
fixed shuffles between couplings while keeping the freshly initialized flow
an exact identity.  All forward, inverse, and gradient computations are
plain numpy with hand-written reverse mode, so training is deterministic
given a seed and gradients are exact (testable against finite differences).

Scale terms go through a tanh bound (|log-scale| <= scale_cap) so the map
stays invertible throughout training.
"""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError

LEAKY_SLOPE = 0.01


def _leaky(a):
    return np.where(a > 0, a, LEAKY_SLOPE * a)


def _leaky_grad(a):
    return np.where(a > 0, 1.0, LEAKY_SLOPE)


@dataclass(frozen=True)
class ArchConfig:
    """Flow architecture knobs; `split_seed` fixes the coupling partitions."""

    n_couplings: int = 6
    hidden: int = 64
    embed_width: int = 128
    embed_hidden: int = 128
    scale_cap: float = 2.0
    split_seed: int = 0


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 8e-4
    batch_size: int = 8
    max_epochs: int = 200
    target_noise_std: float = 0.01
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.target_noise_std < 0:
            raise ConfigError("target_noise_std must be non-negative")


@dataclass
class TrainHistory:
    train_objective: list = field(default_factory=list)
    val_objective: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.train_objective)


class CondEmbedder:
    """Two-layer fully connected map from the condition to a fixed width."""

    def __init__(self, dim_cond, hidden, width, rng):
        self.W1 = rng.standard_normal((dim_cond, hidden)) * np.sqrt(2.0 / dim_cond)
        self.b1 = np.zeros(hidden)
        self.W2 = rng.standard_normal((hidden, width)) * np.sqrt(2.0 / hidden)
        self.b2 = np.zeros(width)

    def params(self):
        return [self.W1, self.b1, self.W2, self.b2]

    def forward(self, cond):
        a1 = cond @ self.W1 + self.b1
        h1 = _leaky(a1)
        e = h1 @ self.W2 + self.b2
        return e, (cond, a1, h1)

    def backward(self, cache, ge):
        cond, a1, h1 = cache
        gW2 = h1.T @ ge
        gb2 = ge.sum(axis=0)
        gh1 = ge @ self.W2.T
        ga1 = gh1 * _leaky_grad(a1)
        gW1 = cond.T @ ga1
        gb1 = ga1.sum(axis=0)
        return [gW1, gb1, gW2, gb2]


class CouplingLayer:
    """Affine coupling over a fixed seeded partition of the coordinates.

    Coordinates idx_b are scaled and shifted conditioned on coordinates
    idx_a and the condition embedding.  The conditioner is a three-layer
    fully connected network whose final layer starts at zero, so a fresh
    layer is the identity with zero log-determinant.
    """

    def __init__(self, idx_a, idx_b, embed_width, hidden, scale_cap, rng):
        self.idx_a = idx_a
        self.idx_b = idx_b
        self.cap = float(scale_cap)
        da, db = idx_a.size, idx_b.size
        fan_in = da + embed_width
        self.W1 = rng.standard_normal((fan_in, hidden)) * np.sqrt(2.0 / fan_in)
        self.b1 = np.zeros(hidden)
        self.W2 = rng.standard_normal((hidden, hidden)) * np.sqrt(2.0 / hidden)
        self.b2 = np.zeros(hidden)
        self.W3 = np.zeros((hidden, 2 * db))
        self.b3 = np.zeros(2 * db)

    def params(self):
        return [self.W1, self.b1, self.W2, self.b2, self.W3, self.b3]

    def _net(self, xa, e):
        u = np.concatenate([xa, e], axis=1) if e is not None else xa
        a1 = u @ self.W1 + self.b1
        h1 = _leaky(a1)
        a2 = h1 @ self.W2 + self.b2
        h2 = _leaky(a2)
        out = h2 @ self.W3 + self.b3
        db = self.idx_b.size
        s_raw, t = out[:, :db], out[:, db:]
        s = self.cap * np.tanh(s_raw / self.cap)
        return s, t, (u, a1, h1, a2, h2, s)

    def _net_backward(self, net_cache, gs, gt):
        u, a1, h1, a2, h2, s = net_cache
        # d tanh-bounded scale: ds/ds_raw = 1 - (s/cap)^2
        gs_raw = gs * (1.0 - (s / self.cap) ** 2)
        gout = np.concatenate([gs_raw, gt], axis=1)
        gW3 = h2.T @ gout
        gb3 = gout.sum(axis=0)
        gh2 = gout @ self.W3.T
        ga2 = gh2 * _leaky_grad(a2)
        gW2 = h1.T @ ga2
        gb2 = ga2.sum(axis=0)
        gh1 = ga2 @ self.W2.T
        ga1 = gh1 * _leaky_grad(a1)
        gW1 = u.T @ ga1
        gb1 = ga1.sum(axis=0)
        gu = ga1 @ self.W1.T
        da = self.idx_a.size
        gxa = gu[:, :da]
        ge = gu[:, da:] if gu.shape[1] > da else None
        return gxa, ge, [gW1, gb1, gW2, gb2, gW3, gb3]

    def forward(self, x, e):
        xa = x[:, self.idx_a]
        xb = x[:, self.idx_b]
        s, t, net_cache = self._net(xa, e)
        exp_s = np.exp(s)
        zb = xb * exp_s + t
        z = np.empty_like(x)
        z[:, self.idx_a] = xa
        z[:, self.idx_b] = zb
        logdet = s.sum(axis=1)
        return z, logdet, (net_cache, xb, exp_s)

    def backward(self, cache, gz, glogdet):
        net_cache, xb, exp_s = cache
        s = net_cache[5]
        gza = gz[:, self.idx_a]
        gzb = gz[:, self.idx_b]
        gxb = gzb * exp_s
        gs = gzb * xb * exp_s + glogdet[:, None]
        gt = gzb
        gxa_net, ge, grads = self._net_backward(net_cache, gs, gt)
        gx = np.empty_like(gz)
        gx[:, self.idx_a] = gza + gxa_net
        gx[:, self.idx_b] = gxb
        return gx, ge, grads

    def inverse(self, z, e):
        xa = z[:, self.idx_a]
        zb = z[:, self.idx_b]
        s, t, net_cache = self._net(xa, e)
        exp_neg_s = np.exp(-s)
        xb = (zb - t) * exp_neg_s
        x = np.empty_like(z)
        x[:, self.idx_a] = xa
        x[:, self.idx_b] = xb
        return x, (net_cache, xb, exp_neg_s)

    def inverse_input_backward(self, cache, gx):
        """VJP of the inverse map with respect to z (weights held fixed)."""
        net_cache, xb, exp_neg_s = cache
        gxa = gx[:, self.idx_a]
        gxb = gx[:, self.idx_b]
        gzb = gxb * exp_neg_s
        gs = -gxb * xb
        gt = -gxb * exp_neg_s
        gxa_net, _, _ = self._net_backward(net_cache, gs, gt)
        gz = np.empty_like(gx)
        gz[:, self.idx_a] = gxa + gxa_net
        gz[:, self.idx_b] = gzb
        return gz


class ConditionalFlow:
    """Invertible conditional map built from seeded affine couplings."""

    FORMAT_VERSION = 1

    def __init__(self, dim_x: int, dim_cond: int, arch: ArchConfig,
                 rng: np.random.Generator):
        if dim_x < 2:
            raise ConfigError("coupling flows need dim_x >= 2")
        self.dim_x = int(dim_x)
        self.dim_cond = int(dim_cond)
        self.arch = arch
        if dim_cond > 0:
            self.embedder = CondEmbedder(dim_cond, arch.embed_hidden,
                                         arch.embed_width, rng)
            embed_width = arch.embed_width
        else:
            self.embedder = None
            embed_width = 0
        split_rng = np.random.default_rng(arch.split_seed)
        self.couplings = []
        for _ in range(arch.n_couplings):
            perm = split_rng.permutation(dim_x)
            da = dim_x // 2
            idx_a = np.sort(perm[:da])
            idx_b = np.sort(perm[da:])
            self.couplings.append(CouplingLayer(idx_a, idx_b, embed_width,
                                                arch.hidden, arch.scale_cap, rng))

    # -- parameter plumbing ---------------------------------------------------------

    def params(self):
        out = []
        if self.embedder is not None:
            out.extend(self.embedder.params())
        for layer in self.couplings:
            out.extend(layer.params())
        return out

    def set_params(self, values):
        current = self.params()
        if len(values) != len(current):
            raise ShapeError("parameter list length mismatch")
        for dst, src in zip(current, values):
            if dst.shape != src.shape:
                raise ShapeError("parameter shape mismatch")
            dst[...] = src

    def copy(self) -> "ConditionalFlow":
        return copy.deepcopy(self)

    # -- shape helpers ----------------------------------------------------------------

    def _check_batch(self, x, cond):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim_x:
            raise ShapeError(f"x has {x.shape[1]} dims, flow expects {self.dim_x}")
        if self.dim_cond == 0:
            return x, None
        cond = np.atleast_2d(np.asarray(cond, dtype=float))
        if cond.shape[0] == 1 and x.shape[0] > 1:
            cond = np.broadcast_to(cond, (x.shape[0], cond.shape[1]))
        if cond.shape != (x.shape[0], self.dim_cond):
            raise ShapeError(f"cond has shape {cond.shape}, "
                             f"expected ({x.shape[0]}, {self.dim_cond})")
        return x, cond

    # -- core passes --------------------------------------------------------------------

    def forward(self, x, cond=None):
        x, cond = self._check_batch(x, cond)
        e = self.embedder.forward(cond)[0] if self.embedder is not None else None
        z = x
        logdet = np.zeros(x.shape[0])
        for layer in self.couplings:
            z, ld, _ = layer.forward(z, e)
            logdet = logdet + ld
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(logdet))):
            raise NumericalError("non-finite values in flow forward pass")
        return z, logdet

    def inverse(self, z, cond=None):
        z, cond = self._check_batch(z, cond)
        e = self.embedder.forward(cond)[0] if self.embedder is not None else None
        x = z
        for layer in reversed(self.couplings):
            x, _ = layer.inverse(x, e)
        if not np.all(np.isfinite(x)):
            raise NumericalError("non-finite values in flow inverse pass")
        return x

    def forward_vjp(self, x, cond, gz_fn, glogdet_fn):
        """Run forward, then pull back gradients through every layer.

        `gz_fn(z)` and `glogdet_fn(z, logdet)` produce the upstream
        gradients of the scalar objective with respect to z and logdet.
        Returns (z, logdet, gx, grads) with grads aligned to params().
        """
        x, cond = self._check_batch(x, cond)
        if self.embedder is not None:
            e, emb_cache = self.embedder.forward(cond)
        else:
            e, emb_cache = None, None
        z = x
        logdet = np.zeros(x.shape[0])
        caches = []
        for layer in self.couplings:
            z, ld, cache = layer.forward(z, e)
            caches.append(cache)
            logdet = logdet + ld
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(logdet))):
            bad = np.flatnonzero(~np.isfinite(z).all(axis=1))
            raise NumericalError(f"non-finite flow output at batch index "
                                 f"{bad[0] if bad.size else '?'}")

        gz = gz_fn(z)
        glogdet = glogdet_fn(z, logdet)
        ge_total = None
        coupling_grads = []
        for layer, cache in zip(reversed(self.couplings), reversed(caches)):
            gz, ge, grads = layer.backward(cache, gz, glogdet)
            coupling_grads = grads + coupling_grads
            if ge is not None:
                ge_total = ge if ge_total is None else ge_total + ge
        all_grads = []
        if self.embedder is not None:
            if ge_total is None:
                ge_total = np.zeros((x.shape[0], self.arch.embed_width))
            all_grads.extend(self.embedder.backward(emb_cache, ge_total))
        all_grads.extend(coupling_grads)
        return z, logdet, gz, all_grads

    def inverse_with_input_grad(self, z, cond, gx):
        """Inverse pass plus the VJP of the inverse with respect to z."""
        z, cond = self._check_batch(z, cond)
        e = self.embedder.forward(cond)[0] if self.embedder is not None else None
        x = z
        caches = []
        for layer in reversed(self.couplings):
            x, cache = layer.inverse(x, e)
            caches.append(cache)
        g = np.asarray(gx, dtype=float)
        for layer, cache in zip(self.couplings, reversed(caches)):
            g = layer.inverse_input_backward(cache, g)
        return x, g

    def sample(self, cond, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw posterior samples by inverting standard-normal latents."""
        if count < 1:
            raise ValueError("count must be at least 1")
        z = rng.standard_normal((count, self.dim_x))
        if self.dim_cond == 0:
            return self.inverse(z, None)
        cond = np.asarray(cond, dtype=float).reshape(1, -1)
        return self.inverse(z, np.broadcast_to(cond, (count, self.dim_cond)))


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def init_flow(dim_x: int, dim_cond: int, arch: ArchConfig,
              rng: np.random.Generator) -> ConditionalFlow:
    """Fresh flow; conditioner output layers start at zero so it is the identity."""
    return ConditionalFlow(dim_x, dim_cond, arch, rng)


def flow_forward(flow: ConditionalFlow, x, cond=None):
    return flow.forward(x, cond)


def flow_inverse(flow: ConditionalFlow, z, cond=None):
    return flow.inverse(z, cond)


def nll_objective(flow: ConditionalFlow, x, cond=None) -> float:
    """(1/N) sum of 0.5 ||f(x; cond)||^2 - logdet over the batch."""
    z, logdet = flow.forward(x, cond)
    if z.shape[0] == 0:
        raise ShapeError("empty batch")
    value = float(np.mean(0.5 * np.sum(z**2, axis=1) - logdet))
    if not np.isfinite(value):
        raise NumericalError("objective is non-finite")
    return value


def objective_gradient(flow: ConditionalFlow, x, cond=None):
    """Exact gradient of nll_objective with respect to every trainable weight."""
    x_arr = np.atleast_2d(np.asarray(x, dtype=float))
    n = x_arr.shape[0]
    if n == 0:
        raise ShapeError("empty batch")
    _, _, _, grads = flow.forward_vjp(
        x, cond,
        gz_fn=lambda z: z / n,
        glogdet_fn=lambda z, ld: np.full(z.shape[0], -1.0 / n))
    return grads


class Adam:
    """Adam optimizer over a list of parameter arrays (updated in place)."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(flow: ConditionalFlow, train_set, val_set, cfg: TrainConfig):
    """Maximum-likelihood training with Adam and validation early stopping.

    `train_set` and `val_set` are (x, cond) pairs; cond may be None for
    unconditional flows.  Gaussian noise of std cfg.target_noise_std is
    added to the targets afresh each epoch.  Returns a trained copy of
    the flow (weights from the best validation epoch) and the history.
    """
    x_train, cond_train = train_set
    x_val, cond_val = val_set
    x_train = np.atleast_2d(np.asarray(x_train, dtype=float))
    x_val = np.atleast_2d(np.asarray(x_val, dtype=float))
    if x_train.shape[0] < 1 or x_val.shape[0] < 1:
        raise ShapeError("train and validation sets must be non-empty")

    model = flow.copy()
    rng = np.random.default_rng(cfg.seed)
    params = model.params()
    adam = Adam(params, cfg.learning_rate)
    history = TrainHistory()
    best_val = np.inf
    best_weights = [p.copy() for p in params]
    epochs_since_best = 0
    n = x_train.shape[0]
    t0 = time.perf_counter()

    for epoch in range(cfg.max_epochs):
        noisy = x_train + cfg.target_noise_std * rng.standard_normal(x_train.shape)
        order = rng.permutation(n)
        batch_objs = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb = noisy[idx]
            cb = cond_train[idx] if cond_train is not None else None
            bn = xb.shape[0]
            try:
                z, logdet, _, grads = model.forward_vjp(
                    xb, cb,
                    gz_fn=lambda z: z / bn,
                    glogdet_fn=lambda z, ld: np.full(z.shape[0], -1.0 / bn))
            except NumericalError as exc:
                raise NumericalError(
                    f"training aborted at epoch {epoch}, batch {start // cfg.batch_size}: "
                    f"{exc}") from exc
            obj = float(np.mean(0.5 * np.sum(z**2, axis=1) - logdet))
            if not np.isfinite(obj):
                raise NumericalError(
                    f"objective NaN at epoch {epoch}, batch {start // cfg.batch_size}")
            batch_objs.append(obj)
            adam.step(grads)

        val_obj = nll_objective(model, x_val, cond_val)
        history.train_objective.append(float(np.mean(batch_objs)))
        history.val_objective.append(val_obj)
        history.wall_time.append(time.perf_counter() - t0)
        if val_obj < best_val:
            best_val = val_obj
            best_weights = [p.copy() for p in params]
            history.best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= cfg.patience:
                history.stopped_early = True
                break

    model.set_params(best_weights)
    return model, history


def sample_posterior(flow: ConditionalFlow, cond, count: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Invert standard-normal latents through the flow conditioned on cond."""
    return flow.sample(cond, count, rng)
