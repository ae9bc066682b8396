"""Deep bidirectional LSTM with a softmax output layer, trained by CTC.

The memory cell follows the classic topology with peephole
connections:

    i = sigmoid(Wi x + Ui h + pi * c_prev + bi)
    f = sigmoid(Wf x + Uf h + pf * c_prev + bf)
    c = f * c_prev + i * tanh(Wg x + Ug h + bg)
    o = sigmoid(Wo x + Uo h + po * c + bo)
    h = o * tanh(c)

Each hidden layer runs one LSTM left-to-right and one right-to-left
and feeds the concatenation of both upward. Gradients come from full
(epochwise) backpropagation through time: no truncation, every frame
of every sequence contributes. Training is plain momentum SGD with
global-norm gradient clipping and a halve-the-learning-rate schedule.

All math is float64 numpy; sequences are batched as (T, B, dim) arrays
with a (T, B) 0/1 mask for padding.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .alphabet import LabelAlphabet
from .ctc import ctc_loss_batch, log_softmax
from .errors import ConfigError, DataError, NumericalError

INIT_RANGE = 0.1
FORGET_BIAS = 1.0

_CHECKPOINT_MAGIC = b"CSNN"
_CHECKPOINT_VERSION = 1

# fused gate order inside the (4h, .) weight blocks
_GATES = ("i", "f", "g", "o")


@dataclass(frozen=True)
class Topology:
    layers: int
    cells: int  # per direction; a layer exposes 2 * cells outputs
    input_dim: int

    def __post_init__(self):
        if self.layers < 1 or self.cells < 1 or self.input_dim < 1:
            raise ConfigError("topology needs >= 1 layer, cell, and input dim")

    @classmethod
    def paper_scale(cls, input_dim: int = 50) -> "Topology":
        """5 BLSTM layers x 240 cells (120 per direction)."""
        return cls(layers=5, cells=120, input_dim=input_dim)

    @classmethod
    def small(cls, input_dim: int = 50) -> "Topology":
        """Desk-scale default for synthetic experiments."""
        return cls(layers=1, cells=48, input_dim=input_dim)


class DblstmModel:
    """Parameter container. ``params`` maps name -> float64 array.

    Naming: ``l{n}_{fwd|bwd}_{w|u|b|pi|pf|po}`` for the hidden layers,
    ``out_w`` / ``out_b`` for the softmax layer.
    """

    def __init__(self, topology: Topology, alphabet: LabelAlphabet,
                 params: dict[str, np.ndarray]):
        self.topology = topology
        self.alphabet = alphabet
        self.params = params

    @property
    def num_classes(self) -> int:
        return self.alphabet.size

    def param_names(self) -> list[str]:
        return list(self.params.keys())

    def num_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "DblstmModel":
        return DblstmModel(self.topology, self.alphabet,
                           {k: v.copy() for k, v in self.params.items()})

    def check_finite(self) -> None:
        for name, p in self.params.items():
            if not np.all(np.isfinite(p)):
                raise NumericalError(f"non-finite values in parameter {name}")


def _direction_names(layer: int, direction: str) -> list[str]:
    return [f"l{layer}_{direction}_{x}" for x in ("w", "u", "b", "pi", "pf", "po")]


def init_model(topology: Topology, alphabet: LabelAlphabet, seed: int = 0,
               scale: float = INIT_RANGE) -> DblstmModel:
    """Seeded uniform init in [-scale, scale]; forget-gate biases start at 1."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    h = topology.cells
    in_dim = topology.input_dim
    for layer in range(topology.layers):
        ni = in_dim if layer == 0 else 2 * h
        for direction in ("fwd", "bwd"):
            w_name, u_name, b_name, pi_name, pf_name, po_name = _direction_names(
                layer, direction)
            params[w_name] = rng.uniform(-scale, scale, size=(4 * h, ni))
            params[u_name] = rng.uniform(-scale, scale, size=(4 * h, h))
            b = np.zeros(4 * h)
            b[h : 2 * h] = FORGET_BIAS  # forget-gate block
            params[b_name] = b
            params[pi_name] = rng.uniform(-scale, scale, size=h)
            params[pf_name] = rng.uniform(-scale, scale, size=h)
            params[po_name] = rng.uniform(-scale, scale, size=h)
    params["out_w"] = rng.uniform(-scale, scale, size=(alphabet.size, 2 * h))
    params["out_b"] = np.zeros(alphabet.size)
    return DblstmModel(topology, alphabet, params)


def zero_grads(model: DblstmModel) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in model.params.items()}


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def lstm_cell_step(x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
                   w: np.ndarray, u: np.ndarray, b: np.ndarray, pi: np.ndarray,
                   pf: np.ndarray, po: np.ndarray):
    """One LSTM step for a batch of row vectors; returns (h, c)."""
    x_t, h_prev, c_prev = (np.atleast_2d(np.asarray(v, dtype=np.float64))
                           for v in (x_t, h_prev, c_prev))
    if np.isnan(x_t).any() or np.isnan(h_prev).any() or np.isnan(c_prev).any():
        raise NumericalError("NaN input to lstm_cell_step")
    h = c_prev.shape[1]
    a = x_t @ w.T + h_prev @ u.T + b
    ai, af, ag, ao = a[:, :h], a[:, h : 2 * h], a[:, 2 * h : 3 * h], a[:, 3 * h :]
    i = _sigmoid(ai + c_prev * pi)
    f = _sigmoid(af + c_prev * pf)
    g = np.tanh(ag)
    c = f * c_prev + i * g
    o = _sigmoid(ao + c * po)
    return o * np.tanh(c), c


@dataclass
class _DirCache:
    x: np.ndarray  # (T, B, ni) inputs as seen by this direction (time order)
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray  # masked cell states
    h: np.ndarray  # masked outputs
    mask: np.ndarray  # (T, B, 1)


def _run_direction(params: dict, names: list[str], x: np.ndarray,
                   mask: np.ndarray) -> _DirCache:
    w, u, b, pi, pf, po = (params[n] for n in names)
    t_len, batch, _ = x.shape
    hdim = u.shape[1]
    pre = x.reshape(t_len * batch, -1) @ w.T
    pre = pre.reshape(t_len, batch, 4 * hdim) + b
    shape = (t_len, batch, hdim)
    gi, gf, gg, go = (np.empty(shape) for _ in range(4))
    cs, hs = np.empty(shape), np.empty(shape)
    h = np.zeros((batch, hdim))
    c = np.zeros((batch, hdim))
    m = mask[:, :, None]
    for t in range(t_len):
        a = pre[t] + h @ u.T
        i = _sigmoid(a[:, :hdim] + c * pi)
        f = _sigmoid(a[:, hdim : 2 * hdim] + c * pf)
        g = np.tanh(a[:, 2 * hdim : 3 * hdim])
        c_new = f * c + i * g
        o = _sigmoid(a[:, 3 * hdim :] + c_new * po)
        h = o * np.tanh(c_new) * m[t]
        c = c_new * m[t]
        gi[t], gf[t], gg[t], go[t] = i, f, g, o
        cs[t], hs[t] = c, h
    return _DirCache(x=x, i=gi, f=gf, g=gg, o=go, c=cs, h=hs, mask=m)


def _backprop_direction(params: dict, names: list[str], cache: _DirCache,
                        dh_out: np.ndarray, grads: dict) -> np.ndarray:
    """Reverse-mode pass for one direction. Returns dL/dx (time order)."""
    w_name, u_name, b_name, pi_name, pf_name, po_name = names
    w, u = params[w_name], params[u_name]
    pi, pf, po = params[pi_name], params[pf_name], params[po_name]
    t_len, batch, hdim = cache.h.shape
    c_prev = np.concatenate([np.zeros((1, batch, hdim)), cache.c[:-1]], axis=0)
    da_all = np.empty((t_len, batch, 4 * hdim))
    dh_rec = np.zeros((batch, hdim))
    dc_carry = np.zeros((batch, hdim))
    for t in range(t_len - 1, -1, -1):
        m = cache.mask[t]
        i, f, g, o = cache.i[t], cache.f[t], cache.g[t], cache.o[t]
        tanh_c = np.tanh(cache.c[t])
        dh = (dh_out[t] + dh_rec) * m
        do = dh * tanh_c
        dao = do * o * (1.0 - o)
        dc = dh * o * (1.0 - tanh_c**2) + dao * po + dc_carry * m
        di = dc * g
        dai = di * i * (1.0 - i)
        df = dc * c_prev[t]
        daf = df * f * (1.0 - f)
        dg = dc * i
        dag = dg * (1.0 - g**2)
        da = np.concatenate([dai, daf, dag, dao], axis=1)
        da_all[t] = da
        dh_rec = da @ u
        dc_carry = dc * f + dai * pi + daf * pf
    flat_da = da_all.reshape(t_len * batch, 4 * hdim)
    h_prev = np.concatenate([np.zeros((1, batch, hdim)), cache.h[:-1]], axis=0)
    grads[w_name] += flat_da.T @ cache.x.reshape(t_len * batch, -1)
    grads[u_name] += flat_da.T @ h_prev.reshape(t_len * batch, hdim)
    grads[b_name] += flat_da.sum(axis=0)
    dai_all = da_all[:, :, :hdim]
    daf_all = da_all[:, :, hdim : 2 * hdim]
    dao_all = da_all[:, :, 3 * hdim :]
    grads[pi_name] += (dai_all * c_prev).sum(axis=(0, 1))
    grads[pf_name] += (daf_all * c_prev).sum(axis=(0, 1))
    grads[po_name] += (dao_all * cache.c).sum(axis=(0, 1))
    return da_all.reshape(t_len * batch, -1) @ w


@dataclass
class _ForwardCache:
    dirs: list[tuple[_DirCache, _DirCache]]  # per layer (fwd, bwd)
    top: np.ndarray  # (T, B, 2h) final hidden output
    logits: np.ndarray  # (T, B, K)
    mask: np.ndarray  # (T, B)


def forward_batch(model: DblstmModel, x: np.ndarray,
                  mask: np.ndarray | None = None) -> _ForwardCache:
    """Run the whole stack on a (T, B, dim) batch; caches for BPTT."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ConfigError("forward_batch expects (T, B, dim)")
    t_len, batch, dim = x.shape
    if dim != model.topology.input_dim:
        raise ConfigError(
            f"input dim {dim} != model input dim {model.topology.input_dim}")
    if mask is None:
        mask = np.ones((t_len, batch))
    dirs = []
    layer_in = x
    for layer in range(model.topology.layers):
        fwd = _run_direction(model.params, _direction_names(layer, "fwd"),
                             layer_in, mask)
        bwd = _run_direction(model.params, _direction_names(layer, "bwd"),
                             layer_in[::-1], mask[::-1])
        dirs.append((fwd, bwd))
        layer_in = np.concatenate([fwd.h, bwd.h[::-1]], axis=2)
    logits = layer_in @ model.params["out_w"].T + model.params["out_b"]
    return _ForwardCache(dirs=dirs, top=layer_in, logits=logits, mask=mask)


def backward_batch(model: DblstmModel, cache: _ForwardCache,
                   dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of sum(dlogits * logits) w.r.t. every parameter."""
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.shape != cache.logits.shape:
        raise ConfigError("dlogits shape does not match the forward pass")
    grads = zero_grads(model)
    t_len, batch, k = dlogits.shape
    flat_dl = dlogits.reshape(t_len * batch, k)
    grads["out_w"] += flat_dl.T @ cache.top.reshape(t_len * batch, -1)
    grads["out_b"] += flat_dl.sum(axis=0)
    dtop = (flat_dl @ model.params["out_w"]).reshape(t_len, batch, -1)
    hdim = model.topology.cells
    for layer in range(model.topology.layers - 1, -1, -1):
        fwd_cache, bwd_cache = cache.dirs[layer]
        dx_f = _backprop_direction(model.params, _direction_names(layer, "fwd"),
                                   fwd_cache, dtop[:, :, :hdim], grads)
        dx_b = _backprop_direction(model.params, _direction_names(layer, "bwd"),
                                   bwd_cache, dtop[::-1, :, hdim:], grads)
        ni = fwd_cache.x.shape[2]
        dtop = (dx_f.reshape(t_len, batch, ni)
                + dx_b.reshape(t_len, batch, ni)[::-1])
    return grads


def forward(model: DblstmModel, features: np.ndarray) -> np.ndarray:
    """Posterior sequence for a single (T, dim) feature sequence.

    Each returned row is a softmax distribution over the alphabet
    (blank included) and sums to one.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 1:
        raise ConfigError("features must be (T, dim) with T >= 1")
    cache = forward_batch(model, feats[:, None, :])
    return np.exp(log_softmax(cache.logits[:, 0, :]))


def forward_logits(model: DblstmModel, features: np.ndarray) -> np.ndarray:
    feats = np.asarray(features, dtype=np.float64)
    cache = forward_batch(model, feats[:, None, :])
    return cache.logits[:, 0, :]


def bptt_gradients(model: DblstmModel, features: np.ndarray,
                   dl_dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients for one sequence given dL/dlogits from the CTC loss."""
    feats = np.asarray(features, dtype=np.float64)
    dl = np.asarray(dl_dlogits, dtype=np.float64)
    if dl.shape[0] != feats.shape[0]:
        raise ConfigError("dl_dlogits frame count does not match features")
    cache = forward_batch(model, feats[:, None, :])
    return backward_batch(model, cache, dl[:, None, :])


# ---------------------------------------------------------------------------
# Optimization


def clip_global_norm(grads: dict[str, np.ndarray], clip: float) -> float:
    """Scale all gradients so their joint L2 norm is at most ``clip``."""
    norm = float(np.sqrt(sum(float((g**2).sum()) for g in grads.values())))
    if np.isfinite(clip) and norm > clip > 0:
        scale = clip / norm
        for g in grads.values():
            g *= scale
    return norm


def sgd_step(model: DblstmModel, grads: dict[str, np.ndarray], lr: float,
             momentum: float, velocity: dict[str, np.ndarray] | None = None,
             clip: float = np.inf) -> dict[str, np.ndarray]:
    """v <- momentum*v - lr*clip(g); theta <- theta + v. Returns velocity."""
    if velocity is None:
        velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    grads = {k: g.copy() for k, g in grads.items()}
    clip_global_norm(grads, clip)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for {name} after clipping")
        v = velocity[name]
        v *= momentum
        v -= lr * g
        model.params[name] += v
    return velocity


@dataclass(frozen=True)
class TrainConfig:
    initial_lr: float = 1e-4
    momentum: float = 0.9
    final_lr: float = 1e-6
    epochs_per_stage: tuple[int, ...] = (10, 2)
    batch_size: int = 16
    seed: int = 0
    gradient_clip: float = 10.0

    def __post_init__(self):
        if not 0 < self.final_lr <= self.initial_lr:
            raise ConfigError("need 0 < final_lr <= initial_lr")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)")
        if not self.epochs_per_stage or min(self.epochs_per_stage) < 1:
            raise ConfigError("epochs_per_stage must be positive")


def lr_schedule(stage: int, cfg: TrainConfig) -> float:
    """Learning rate at a halving stage: initial_lr * 0.5**stage."""
    if stage < 0:
        raise ConfigError("stage must be >= 0")
    return cfg.initial_lr * 0.5**stage


def schedule_stages(cfg: TrainConfig):
    """Yield (stage, lr, epochs) until the rate falls below final_lr."""
    stage = 0
    while True:
        lr = lr_schedule(stage, cfg)
        if lr < cfg.final_lr:
            return
        epochs = cfg.epochs_per_stage[min(stage, len(cfg.epochs_per_stage) - 1)]
        yield stage, lr, epochs
        stage += 1


@dataclass
class EpochRecord:
    epoch: int
    stage: int
    lr: float
    mean_loss: float
    dev_cer: float | None
    skipped: int


@dataclass
class TrainResult:
    model: DblstmModel
    log: list[EpochRecord]
    diverged: bool = False


def _make_batches(lengths: list[int], batch_size: int,
                  rng: np.random.Generator) -> list[list[int]]:
    # bucket by length so padding stays small, then shuffle batch order
    order = sorted(range(len(lengths)), key=lambda i: (lengths[i], i))
    batches = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
    rng.shuffle(batches)
    return batches


def _batch_step(model, feats, labels, lr, momentum, clip, velocity):
    t_max = max(f.shape[0] for f in feats)
    batch = len(feats)
    dim = feats[0].shape[1]
    x = np.zeros((t_max, batch, dim))
    mask = np.zeros((t_max, batch))
    for j, f in enumerate(feats):
        x[: f.shape[0], j] = f
        mask[: f.shape[0], j] = 1.0
    cache = forward_batch(model, x, mask)
    items = [(cache.logits[: feats[j].shape[0], j, :], labels[j])
             for j in range(batch)]
    res = ctc_loss_batch(items)
    if not np.isfinite(res.mean_loss):
        return res.mean_loss, len(res.skipped), velocity
    dlogits = np.zeros_like(cache.logits)
    for j, g in enumerate(res.grads):
        if g is not None:
            dlogits[: g.shape[0], j, :] = g
    grads = backward_batch(model, cache, dlogits)
    velocity = sgd_step(model, grads, lr, momentum, velocity, clip)
    return res.mean_loss, len(res.skipped), velocity


def train(model: DblstmModel, corpus: list[tuple[np.ndarray, str]],
          cfg: TrainConfig,
          dev: list[tuple[np.ndarray, str]] | None = None) -> TrainResult:
    """Momentum-SGD CTC training over the staged halving schedule.

    ``corpus`` pairs feature sequences with transcript strings; no
    frame-level labels are ever needed. Deterministic for a fixed seed
    and corpus. On divergence (NaN loss) training stops and the last
    epoch's parameters are returned with ``diverged`` set.
    """
    if not corpus:
        raise ConfigError("training corpus is empty")
    labels = [model.alphabet.encode(text) for _, text in corpus]
    feats = [np.asarray(f, dtype=np.float64) for f, _ in corpus]
    lengths = [f.shape[0] for f in feats]
    rng = np.random.default_rng(cfg.seed)
    velocity = None
    log: list[EpochRecord] = []
    epoch = 0
    last_good = model.copy()
    for stage, lr, stage_epochs in schedule_stages(cfg):
        for _ in range(stage_epochs):
            losses = []
            skipped = 0
            for batch_idx in _make_batches(lengths, cfg.batch_size, rng):
                loss, nskip, velocity = _batch_step(
                    model, [feats[i] for i in batch_idx],
                    [labels[i] for i in batch_idx], lr, cfg.momentum,
                    cfg.gradient_clip, velocity)
                skipped += nskip
                if np.isfinite(loss):
                    losses.append(loss)
            mean_loss = float(np.mean(losses)) if losses else float("nan")
            try:
                model.check_finite()
                bad = not np.isfinite(mean_loss)
            except NumericalError:
                bad = True
            if bad:
                model.params = last_good.params
                return TrainResult(model=model, log=log, diverged=True)
            dev_cer = evaluate_cer(model, dev) if dev else None
            log.append(EpochRecord(epoch=epoch, stage=stage, lr=lr,
                                   mean_loss=mean_loss, dev_cer=dev_cer,
                                   skipped=skipped))
            last_good = model.copy()
            epoch += 1
    return TrainResult(model=model, log=log)


def evaluate_cer(model: DblstmModel, corpus: list[tuple[np.ndarray, str]]) -> float:
    """Best-path character error rate over a held-out split."""
    from .ctc import best_path_decode
    from .metrics import cer

    refs, hyps = [], []
    for feat, text in corpus:
        labels = best_path_decode(forward(model, feat))
        hyps.append(model.alphabet.decode(labels))
        refs.append(text)
    return cer(refs, hyps).rate


# ---------------------------------------------------------------------------
# Checkpoint container: magic "CSNN", version, topology, alphabet, parameter
# blocks as little-endian float64 in a fixed documented order.


def save_model(path, model: DblstmModel) -> None:
    sym_blob = "\x00".join(model.alphabet.symbols).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<4I", _CHECKPOINT_VERSION, model.topology.layers,
                             model.topology.cells, model.topology.input_dim))
        fh.write(struct.pack("<I", len(sym_blob)))
        fh.write(sym_blob)
        for name in sorted(model.params):
            arr = model.params[name]
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> DblstmModel:
    with open(path, "rb") as fh:
        if fh.read(4) != _CHECKPOINT_MAGIC:
            raise DataError("not a model checkpoint (bad magic)")
        version, layers, cells, input_dim = struct.unpack("<4I", fh.read(16))
        if version != _CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {version}")
        (blob_len,) = struct.unpack("<I", fh.read(4))
        symbols = tuple(fh.read(blob_len).decode("utf-8").split("\x00"))
        topology = Topology(layers=layers, cells=cells, input_dim=input_dim)
        alphabet = LabelAlphabet(symbols)
        ref = init_model(topology, alphabet, seed=0)
        params = {}
        for name in sorted(ref.params):
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            n = int(np.prod(shape))
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise DataError("truncated checkpoint")
            params[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return DblstmModel(topology, alphabet, params)
