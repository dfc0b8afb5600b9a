"""Training loop for the denoiser net.

Fully seeded: weight init, the train/held-out split and per-epoch
shuffling all derive from the config seed, so single-worker runs are
bit-reproducible.
"""

from dataclasses import dataclass

import numpy as np

from .nn import Adam, DenoiserNet, NetConfig, mse_loss, normalize_input
from .synth import DatasetReader


@dataclass
class TrainConfig:
    dataset: str
    learning_rate: float = 2e-4
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0
    width: int = 4
    val_fraction: float = 0.1
    curriculum_epochs: int | None = None  # None -> epochs // 4

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")


FULL_SCALE = dict(batch_size=128, epochs=100, width=16)  # paper-scale recipe


def _split(n, seed, val_fraction):
    rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    perm = rng.permutation(n)
    k = int(round(n * val_fraction))
    return perm[k:], perm[:k]


def _batch(reader, indices):
    es, gs = [], []
    for i in indices:
        e, g = reader.pair(int(i))
        es.append(normalize_input(e))
        gs.append(g)
    x = np.stack(es)[:, None, :, :].astype(np.float32)
    t = np.stack(gs)[:, None, :, :].astype(np.float32)
    return x, t


def evaluate_mse(net, reader, indices, batch_size=32) -> float:
    """Mean of (prediction - truth)^2 over all elements of the given pairs."""
    total = 0.0
    count = 0
    for s in range(0, len(indices), batch_size):
        x, t = _batch(reader, indices[s : s + batch_size])
        pred = net.forward(x)
        total += float(np.sum((pred - t) ** 2))
        count += t.size
    return total / max(count, 1)


def zeros_predictor_mse(reader, indices, batch_size=32) -> float:
    total = 0.0
    count = 0
    for s in range(0, len(indices), batch_size):
        _, t = _batch(reader, indices[s : s + batch_size])
        total += float(np.sum(t * t))
        count += t.size
    return total / max(count, 1)


def _difficulty_order(reader, indices):
    """Training indices sorted easiest first (high peak-to-RMS echo images)."""
    scores = np.empty(len(indices))
    for k, i in enumerate(indices):
        e, _ = reader.pair(int(i))
        rms = float(np.sqrt(np.mean(e * e)))
        scores[k] = float(e.max()) / rms if rms > 0 else 0.0
    return np.asarray(indices)[np.argsort(-scores, kind="stable")]


def train(config: TrainConfig, progress=None):
    """Train on an .srngset dataset; returns (net, history).

    The first `curriculum_epochs` epochs (default a quarter of the run)
    see only the easier half of the training pairs, ranked by echo
    peak-to-RMS; features learned on clean ridges make the later noisy
    samples informative instead of drowning the gradient.

    history: per-epoch mean train loss, per-epoch held-out MSE, the
    held-out all-zeros baseline MSE and the final parameter count.
    """
    reader = DatasetReader(config.dataset)
    if len(reader) == 0:
        raise ValueError(f"dataset {config.dataset} is empty")
    rows, cols = reader.shape
    net = DenoiserNet(NetConfig(width=config.width, rows=rows, cols=cols,
                                seed=config.seed))
    opt = Adam(net, config.learning_rate)
    train_idx, val_idx = _split(len(reader), config.seed, config.val_fraction)
    if len(train_idx) == 0:
        raise ValueError("no training pairs left after the held-out split")
    shuffle_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 2)))
    warm_epochs = (config.epochs // 4 if config.curriculum_epochs is None
                   else config.curriculum_epochs)
    easy_idx = (_difficulty_order(reader, train_idx)[: max(len(train_idx) // 2, 1)]
                if warm_epochs > 0 else train_idx)

    history = {"train_loss": [], "val_mse": [], "zeros_mse": None,
               "param_count": net.param_count()}
    for epoch in range(config.epochs):
        pool = easy_idx if epoch < warm_epochs else train_idx
        order = shuffle_rng.permutation(pool)
        losses = []
        for s in range(0, len(order), config.batch_size):
            batch_ids = order[s : s + config.batch_size]
            x, t = _batch(reader, batch_ids)
            pred = net.forward(x, train=True)
            loss, grad = mse_loss(pred, t)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {s // config.batch_size} "
                    f"(lr={config.learning_rate:g})"
                )
            # sum-reduction scaling: identical direction (Adam normalizes
            # per parameter) but keeps gradient magnitudes well above eps
            net.backward((grad * grad.size).astype(np.float32))
            opt.step()
            losses.append(loss)
        history["train_loss"].append(float(np.mean(losses)))
        if len(val_idx):
            history["val_mse"].append(evaluate_mse(net, reader, val_idx,
                                                   config.batch_size))
        if progress is not None:
            progress(epoch, history)
    if len(val_idx):
        history["zeros_mse"] = zeros_predictor_mse(reader, val_idx,
                                                   config.batch_size)
    return net, history


def gradient_check(net, x, target, n_weights=100, eps=1e-5, seed=0):
    """Central-difference check of the analytic gradients.

    Returns the worst relative error over n_weights randomly chosen
    parameters.  Meant for float64 nets (TinyNet).
    """
    pred = net.forward(x, train=True)
    _, grad = mse_loss(pred, target)
    net.backward(grad)
    analytic = {name: getattr(mod, "d" + attr).copy()
                for name, mod, attr in net.parameters()}

    rng = np.random.default_rng(seed)
    names = [(name, mod, attr) for name, mod, attr in net.parameters()]
    worst = 0.0
    for _ in range(n_weights):
        name, mod, attr = names[int(rng.integers(0, len(names)))]
        p = getattr(mod, attr)
        flat = p.reshape(-1)
        j = int(rng.integers(0, flat.size))
        keep = flat[j]
        flat[j] = keep + eps
        lp, _ = mse_loss(net.forward(x), target)
        flat[j] = keep - eps
        lm, _ = mse_loss(net.forward(x), target)
        flat[j] = keep
        numeric = (lp - lm) / (2 * eps)
        a = analytic[name].reshape(-1)[j]
        denom = max(abs(a), abs(numeric), 1e-12)
        worst = max(worst, abs(a - numeric) / denom)
    return worst
