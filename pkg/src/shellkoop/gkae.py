"""Graph Koopman autoencoder.

Encoder: a stack of graph-convolution layers over the renormalized
adjacency, ending in a linear layer of per-node latents, mean-pooled and
lifted linearly to one graph embedding ``z`` of dimension ``m``. Latent
time advance is a single square matrix ``K`` applied repeatedly; the
decoder reconstructs every node's dynamic channels (queue plus four link
SEs) from ``z`` concatenated with a frozen sinusoidal node-identity
embedding.

Training minimizes reconstruction, multi-step prediction through ``K``,
and latent-linearity terms over stride-1 sliding windows, one Adam step
per window. All backward passes are hand-derived; the finite-difference
checker in :mod:`.nncore` validates the full chain.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import nncore
from .io import atomic_write_text, dumps_17g
from .nncore import AdamState, Parameter, adam_step, xavier_uniform
from .orbits import ShellConfig
from .topology import NUM_FEATURES, SE_MAX, GraphSnapshot, normalized_adjacency
from .traffic import Dataset

__all__ = [
    "GkaeConfig",
    "GkaeModel",
    "TrainReport",
    "TrainingDivergence",
    "SpectralRadiusResult",
    "encode",
    "advance",
    "decode",
    "loss",
    "train",
    "predict",
    "predict_from_latent",
    "spectral_radius",
    "save_model",
    "load_model",
]

NUM_TARGETS = 5  # queue plus the four SE channels
CHECKPOINT_SCHEMA = 1


class TrainingDivergence(RuntimeError):
    """Raised when the training loss goes non-finite."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class GkaeConfig:
    """Architecture and training hyperparameters."""

    gcn_layers: int = 2
    hidden_dim: int = 16
    node_latent_dim: int = 4
    embed_dim: int = 32
    identity_dim: int = 8
    train_horizon: int = 5
    eval_horizon: int = 20
    recon_weight: float = 1.0
    pred_weight: float = 1.0
    lin_weight: float = 0.3
    lr: float = 1e-3
    epochs: int = 300
    seed: int = 0
    masked_mode: bool = False
    mask_rate: float = 0.5

    def __post_init__(self) -> None:
        for name in ("gcn_layers", "hidden_dim", "node_latent_dim", "embed_dim", "identity_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.train_horizon < 1:
            raise ValueError("train_horizon must be >= 1")
        if self.eval_horizon < self.train_horizon:
            raise ValueError("eval_horizon must be >= train_horizon")
        if min(self.recon_weight, self.pred_weight, self.lin_weight) < 0:
            raise ValueError("loss weights must be >= 0")
        if not 0.0 <= self.mask_rate < 1.0:
            raise ValueError("mask_rate must lie in [0, 1)")

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


def identity_embeddings(shell: ShellConfig, dim: int) -> np.ndarray:
    """Frozen per-node table of sinusoids over (plane/P, slot/Q) harmonics."""
    n = shell.num_sats
    table = np.empty((n, dim))
    for fid in range(n):
        p, s = divmod(fid, shell.sats_per_plane)
        for j in range(dim):
            frac = p / shell.num_planes if (j // 2) % 2 == 0 else s / shell.sats_per_plane
            harmonic = j // 4 + 1
            angle = 2.0 * math.pi * harmonic * frac
            table[fid, j] = math.sin(angle) if j % 2 == 0 else math.cos(angle)
    return table


@dataclass
class TrainReport:
    """Per-epoch loss components plus run metadata."""

    total: List[float] = field(default_factory=list)
    recon: List[float] = field(default_factory=list)
    pred: List[float] = field(default_factory=list)
    lin: List[float] = field(default_factory=list)
    spectral_radius: float = float("nan")
    wall_time_s: float = 0.0
    param_count: int = 0


class GkaeModel:
    """Trained (or freshly initialized) model state."""

    def __init__(
        self,
        config: GkaeConfig,
        shell: ShellConfig,
        params: Dict[str, Parameter],
        e_id: np.ndarray,
        buffer_pkts: float,
        se_max: float = SE_MAX,
    ):
        self.config = config
        self.shell = shell
        self.params = params
        self.e_id = np.ascontiguousarray(e_id, dtype=float)
        self.e_id.setflags(write=False)
        self.buffer_pkts = float(buffer_pkts)
        self.se_max = float(se_max)

    @classmethod
    def initialize(
        cls, config: GkaeConfig, shell: ShellConfig, buffer_pkts: float, se_max: float = SE_MAX
    ) -> "GkaeModel":
        rng = np.random.default_rng(config.seed)
        dims = (
            [NUM_FEATURES]
            + [config.hidden_dim] * (config.gcn_layers - 1)
            + [config.node_latent_dim]
        )
        params: Dict[str, Parameter] = {}
        for layer, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
            params[f"w_gcn_{layer}"] = Parameter(
                f"w_gcn_{layer}", xavier_uniform(d_in, d_out, rng)
            )
            params[f"b_gcn_{layer}"] = Parameter(f"b_gcn_{layer}", np.zeros((1, d_out)))
        params["w_read"] = Parameter(
            "w_read", xavier_uniform(config.node_latent_dim, config.embed_dim, rng)
        )
        params["b_read"] = Parameter("b_read", np.zeros((1, config.embed_dim)))
        # near-identity start biases the latent dynamics toward stability
        params["koopman"] = Parameter(
            "koopman",
            np.eye(config.embed_dim)
            + 0.01 * rng.standard_normal((config.embed_dim, config.embed_dim)),
        )
        dec_in = config.embed_dim + config.identity_dim
        params["w_dec1"] = Parameter("w_dec1", xavier_uniform(dec_in, config.hidden_dim, rng))
        params["b_dec1"] = Parameter("b_dec1", np.zeros((1, config.hidden_dim)))
        params["w_dec2"] = Parameter(
            "w_dec2", xavier_uniform(config.hidden_dim, NUM_TARGETS, rng)
        )
        params["b_dec2"] = Parameter("b_dec2", np.zeros((1, NUM_TARGETS)))
        e_id = identity_embeddings(shell, config.identity_dim)
        return cls(config, shell, params, e_id, buffer_pkts, se_max)

    @property
    def num_nodes(self) -> int:
        return self.shell.num_sats

    def parameters(self) -> List[Parameter]:
        return list(self.params.values())

    def param_count(self) -> int:
        """Trainable scalars; the frozen identity table is excluded."""
        return sum(p.size for p in self.parameters())

    def koopman_matrix(self) -> np.ndarray:
        return self.params["koopman"].value

    def fingerprint(self) -> dict:
        return self.shell.fingerprint()


# ---------------------------------------------------------------------------
# forward / backward passes
# ---------------------------------------------------------------------------


class _EncodeCache:
    __slots__ = ("a_hat", "layers", "pooled", "z")

    def __init__(self, a_hat, layers, pooled, z):
        self.a_hat = a_hat
        self.layers = layers  # [(h_in, out, ah, activate), ...]
        self.pooled = pooled
        self.z = z


def _encode_cached(model: GkaeModel, x: np.ndarray, a_hat: np.ndarray) -> _EncodeCache:
    cfg = model.config
    h = x
    layers = []
    for layer in range(cfg.gcn_layers):
        w = model.params[f"w_gcn_{layer}"].value
        b = model.params[f"b_gcn_{layer}"].value
        activate = layer < cfg.gcn_layers - 1
        out, ah = nncore.gcn_forward(a_hat, h, w, b, activate)
        layers.append((h, out, ah, activate))
        h = out
    pooled = nncore.mean_pool_forward(h)
    z = nncore.affine_forward(
        pooled, model.params["w_read"].value, model.params["b_read"].value, False
    )
    return _EncodeCache(a_hat, layers, pooled, z)


def _encode_backward(model: GkaeModel, cache: _EncodeCache, dz: np.ndarray) -> None:
    cfg = model.config
    w_read = model.params["w_read"]
    b_read = model.params["b_read"]
    dpooled, dw, db = nncore.affine_backward(dz, cache.pooled, w_read.value, cache.z, False)
    w_read.grad += dw
    b_read.grad += db
    dh = nncore.mean_pool_backward(dpooled, cache.layers[-1][1].shape[0])
    for layer in reversed(range(cfg.gcn_layers)):
        h_in, out, ah, activate = cache.layers[layer]
        w = model.params[f"w_gcn_{layer}"]
        b = model.params[f"b_gcn_{layer}"]
        dh, dw, db = nncore.gcn_backward(dh, cache.a_hat, ah, w.value, out, activate)
        w.grad += dw
        b.grad += db


class _DecodeCache:
    __slots__ = ("m_cat", "h1", "out")

    def __init__(self, m_cat, h1, out):
        self.m_cat = m_cat
        self.h1 = h1
        self.out = out


def _decode_cached(model: GkaeModel, z: np.ndarray) -> _DecodeCache:
    m = model.config.embed_dim
    n = model.num_nodes
    m_cat = np.empty((n, m + model.config.identity_dim))
    m_cat[:, :m] = z
    m_cat[:, m:] = model.e_id
    h1 = nncore.affine_forward(
        m_cat, model.params["w_dec1"].value, model.params["b_dec1"].value, True
    )
    out = nncore.affine_forward(
        h1, model.params["w_dec2"].value, model.params["b_dec2"].value, False
    )
    return _DecodeCache(m_cat, h1, out)


def _decode_backward(model: GkaeModel, cache: _DecodeCache, dout: np.ndarray) -> np.ndarray:
    """Accumulates decoder grads; returns the gradient w.r.t. z (1 x m)."""
    w2, b2 = model.params["w_dec2"], model.params["b_dec2"]
    w1, b1 = model.params["w_dec1"], model.params["b_dec1"]
    dh1, dw, db = nncore.affine_backward(dout, cache.h1, w2.value, cache.out, False)
    w2.grad += dw
    b2.grad += db
    dm, dw, db = nncore.affine_backward(dh1, cache.m_cat, w1.value, cache.h1, True)
    w1.grad += dw
    b1.grad += db
    # z was broadcast over rows, so its gradient sums over them
    return dm[:, : model.config.embed_dim].sum(axis=0, keepdims=True)


def encode(model: GkaeModel, snap: GraphSnapshot) -> np.ndarray:
    """Graph embedding z (1 x m) of one snapshot."""
    if snap.num_nodes != model.num_nodes:
        raise ValueError(
            f"snapshot has {snap.num_nodes} nodes, model expects {model.num_nodes}"
        )
    return _encode_cached(model, snap.x, normalized_adjacency(snap)).z


def advance(model: GkaeModel, z: np.ndarray, k: int) -> np.ndarray:
    """k successive latent steps z' = z K^T."""
    if k < 0:
        raise ValueError("k must be >= 0")
    k_t = np.ascontiguousarray(model.koopman_matrix().T)
    out = z
    for _ in range(k):
        out = nncore.matmul(out, k_t)
    return out


def decode(model: GkaeModel, z: np.ndarray) -> np.ndarray:
    """N x 5 dynamic-channel reconstruction from a graph embedding."""
    return _decode_cached(model, z).out


def predict(model: GkaeModel, snap: GraphSnapshot, horizon: int) -> List[np.ndarray]:
    """decode(K^k z) for k = 1..horizon."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return predict_from_latent(model, encode(model, snap), horizon)


def predict_from_latent(model: GkaeModel, z: np.ndarray, horizon: int) -> List[np.ndarray]:
    k_t = np.ascontiguousarray(model.koopman_matrix().T)
    outs = []
    for _ in range(horizon):
        z = nncore.matmul(z, k_t)
        outs.append(decode(model, z))
    return outs


# ---------------------------------------------------------------------------
# loss and training
# ---------------------------------------------------------------------------


def _window_loss(
    model: GkaeModel,
    xs: Sequence[np.ndarray],
    a_hats: Sequence[np.ndarray],
    targets: Sequence[np.ndarray],
    row_mask: Optional[np.ndarray],
) -> Tuple[float, float, float, float]:
    """Loss over one window; populates parameter gradients.

    ``xs``/``a_hats``/``targets`` hold the window's K_h + 1 entries. The
    row mask (masked-reconstruction mode) restricts the reconstruction
    error to hidden rows; that mode skips the prediction and linearity
    terms entirely, which equals setting their weights to zero.
    """
    cfg = model.config
    horizon = len(xs) - 1
    alpha, beta, gamma = cfg.recon_weight, cfg.pred_weight, cfg.lin_weight

    encs = [_encode_cached(model, xs[j], a_hats[j]) for j in range(horizon + 1)]
    dz = [np.zeros_like(encs[0].z) for _ in range(horizon + 1)]

    recon = 0.0
    for j in range(horizon + 1):
        dec = _decode_cached(model, encs[j].z)
        term, _, _ = nncore.mse_forward(dec.out, targets[j], row_mask)
        recon += term
        if alpha != 0.0:
            g = alpha * nncore.mse_backward(dec.out, targets[j], row_mask)
            dz[j] += _decode_backward(model, dec, g)

    pred = 0.0
    lin = 0.0
    if not cfg.masked_mode:
        k_param = model.params["koopman"]
        k_t = np.ascontiguousarray(k_param.value.T)
        y = [encs[0].z]
        for k in range(1, horizon + 1):
            y.append(nncore.matmul(y[k - 1], k_t))
        dy = [np.zeros_like(encs[0].z) for _ in range(horizon + 1)]
        for k in range(1, horizon + 1):
            dec = _decode_cached(model, y[k])
            term, _, _ = nncore.mse_forward(dec.out, targets[k])
            pred += term
            if beta != 0.0:
                g = beta * nncore.mse_backward(dec.out, targets[k])
                dy[k] += _decode_backward(model, dec, g)
            term, _, _ = nncore.mse_forward(y[k], encs[k].z)
            lin += term
            if gamma != 0.0:
                g = gamma * nncore.mse_backward(y[k], encs[k].z)
                dy[k] += g
                dz[k] -= g
        for k in range(horizon, 0, -1):
            da, db = nncore.matmul_backward(dy[k], y[k - 1], k_t)
            k_param.grad += db.T
            dy[k - 1] += da
        dz[0] += dy[0]

    for j in range(horizon + 1):
        _encode_backward(model, encs[j], dz[j])
    total = alpha * recon + beta * pred + gamma * lin
    return total, recon, pred, lin


def loss(model: GkaeModel, window: Sequence[GraphSnapshot]):
    """(total, recon, pred, lin) over a snapshot window; grads populated.

    The window must hold at least two snapshots; targets are each
    snapshot's own dynamic channels.
    """
    if len(window) < 2:
        raise ValueError("loss window needs at least 2 snapshots")
    xs = [s.x for s in window]
    a_hats = [normalized_adjacency(s) for s in window]
    targets = [s.dynamic_targets() for s in window]
    mask = window[0].mask if window[0].mask.any() else None
    return _window_loss(model, xs, a_hats, targets, mask)


def _apply_window_mask(x: np.ndarray, chosen: np.ndarray) -> np.ndarray:
    from .topology import F_MASK

    out = x.copy()
    out[chosen, :] = 0.0
    out[chosen, F_MASK] = 1.0
    return out


def train(dataset: Dataset, config: GkaeConfig) -> Tuple[GkaeModel, TrainReport]:
    """Fit on the train split with one Adam step per stride-1 window."""
    snaps = dataset.train
    if len(snaps) < config.train_horizon + 2:
        raise ValueError(
            f"train split of {len(snaps)} too short for horizon {config.train_horizon}"
        )
    model = GkaeModel.initialize(config, dataset.shell, dataset.buffer_pkts, dataset.se_max)
    params = model.parameters()
    adam = AdamState(lr=config.lr)
    xs = [s.x for s in snaps]
    a_hats = [normalized_adjacency(s) for s in snaps]
    targets = [s.dynamic_targets() for s in snaps]
    n = model.num_nodes
    n_windows = len(snaps) - config.train_horizon
    mask_rng = np.random.default_rng(config.seed + 1)
    n_masked = round(config.mask_rate * n)

    report = TrainReport(param_count=model.param_count())
    started = time.perf_counter()
    for epoch in range(config.epochs):
        sums = np.zeros(4)
        for w0 in range(n_windows):
            stop = w0 + config.train_horizon + 1
            if config.masked_mode and n_masked > 0:
                chosen = mask_rng.choice(n, size=n_masked, replace=False)
                w_xs = [_apply_window_mask(x, chosen) for x in xs[w0:stop]]
                row_mask = np.zeros(n, dtype=bool)
                row_mask[chosen] = True
            else:
                w_xs = xs[w0:stop]
                row_mask = None
            parts = _window_loss(model, w_xs, a_hats[w0:stop], targets[w0:stop], row_mask)
            if not math.isfinite(parts[0]):
                raise TrainingDivergence(epoch)
            adam_step(params, adam)
            sums += parts
        means = sums / n_windows
        report.total.append(float(means[0]))
        report.recon.append(float(means[1]))
        report.pred.append(float(means[2]))
        report.lin.append(float(means[3]))
    report.wall_time_s = time.perf_counter() - started
    report.spectral_radius = spectral_radius(model.koopman_matrix()).value
    return model, report


# ---------------------------------------------------------------------------
# spectral diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralRadiusResult:
    value: float
    sigma_max: float
    converged: bool


def spectral_radius(
    k_matrix: np.ndarray,
    restarts: int = 8,
    iters: int = 500,
    tol: float = 1e-10,
    seed: int = 0,
) -> SpectralRadiusResult:
    """Largest |eigenvalue| estimate via normalized power iteration.

    Complex conjugate pairs make the per-step growth oscillate, so the
    estimate is the geometric mean of the growth factors over a trailing
    window; it converges to the spectral radius for almost every start
    vector. ``sigma_max`` (power iteration on K^T K) is reported as the
    accompanying upper bound. If no restart stabilizes within ``iters``
    steps the best estimate is returned flagged unconverged.
    """
    k_matrix = np.asarray(k_matrix, dtype=float)
    if k_matrix.ndim != 2 or k_matrix.shape[0] != k_matrix.shape[1]:
        raise ValueError(f"K must be square, got {k_matrix.shape}")
    m = k_matrix.shape[0]
    rng = np.random.default_rng(seed)

    ktk = k_matrix.T @ k_matrix
    v = rng.standard_normal(m)
    v /= np.linalg.norm(v)
    sigma_sq = 0.0
    for _ in range(300):
        w = ktk @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            sigma_sq = 0.0
            break
        sigma_sq = float(v @ w)
        v = w / nw
    sigma_max = math.sqrt(max(sigma_sq, 0.0))

    window = 100
    best = 0.0
    converged = False
    for _ in range(restarts):
        v = rng.standard_normal(m)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            continue
        v /= norm
        log_growth: List[float] = []
        estimate = 0.0
        prev = None
        this_converged = False
        for it in range(iters):
            w = k_matrix @ v
            nw = float(np.linalg.norm(w))
            if nw == 0.0:
                estimate = 0.0
                this_converged = True
                break
            log_growth.append(math.log(nw))
            v = w / nw
            if (it + 1) % 50 == 0 and len(log_growth) >= window:
                estimate = math.exp(float(np.mean(log_growth[-window:])))
                if prev is not None and abs(estimate - prev) <= tol * max(1.0, estimate):
                    this_converged = True
                    break
                prev = estimate
        if not log_growth and not this_converged:
            continue
        if not this_converged and log_growth:
            estimate = math.exp(float(np.mean(log_growth[-window:])))
        best = max(best, estimate)
        converged = converged or this_converged
    return SpectralRadiusResult(best, sigma_max, converged)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_model(model: GkaeModel, path: str) -> None:
    doc = {
        "schema": CHECKPOINT_SCHEMA,
        "kind": "gkae",
        "config": model.config.to_dict(),
        "shell": model.fingerprint(),
        "normalization": {"buffer_pkts": model.buffer_pkts, "se_max": model.se_max},
        "params": {name: p.value for name, p in model.params.items()},
        "e_id": model.e_id,
    }
    atomic_write_text(path, dumps_17g(doc) + "\n")


def _checkpoint_field(doc: dict, name: str):
    if name not in doc:
        raise ValueError(f"checkpoint missing field {name!r}")
    return doc[name]


def load_model(path: str) -> GkaeModel:
    import json

    with open(path) as fh:
        doc = json.load(fh)
    if _checkpoint_field(doc, "kind") != "gkae":
        raise ValueError(f"checkpoint kind {doc['kind']!r} is not a gkae model")
    if _checkpoint_field(doc, "schema") != CHECKPOINT_SCHEMA:
        raise ValueError(f"unsupported checkpoint schema {doc['schema']}")
    config = GkaeConfig(**_checkpoint_field(doc, "config"))
    shell = ShellConfig(**_checkpoint_field(doc, "shell"))
    norm = _checkpoint_field(doc, "normalization")
    reference = GkaeModel.initialize(config, shell, norm["buffer_pkts"], norm["se_max"])
    raw = _checkpoint_field(doc, "params")
    params: Dict[str, Parameter] = {}
    for name, ref in reference.params.items():
        if name not in raw:
            raise ValueError(f"checkpoint missing parameter {name!r}")
        value = np.asarray(raw[name], dtype=float)
        if value.shape != ref.value.shape:
            raise ValueError(
                f"parameter {name!r} has shape {value.shape}, expected {ref.value.shape}"
            )
        params[name] = Parameter(name, value)
    e_id = np.asarray(_checkpoint_field(doc, "e_id"), dtype=float)
    if e_id.shape != reference.e_id.shape:
        raise ValueError(f"e_id has shape {e_id.shape}, expected {reference.e_id.shape}")
    return GkaeModel(config, shell, params, e_id, norm["buffer_pkts"], norm["se_max"])
