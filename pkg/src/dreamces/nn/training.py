"""Mini-batch training with a held-out test split."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .._validation import make_rng
from ..exceptions import TrainingDivergence, ValidationError
from .optim import make_optimizer


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 200
    split: float = 0.75
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.0
    lr_decay: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.split <= 1.0:
            raise ValidationError(f"train split must lie in (0, 1], got {self.split}")
        if self.batch_size < 1 or self.epochs < 0 or self.learning_rate <= 0:
            raise ValidationError("batch_size >= 1, epochs >= 0 and learning_rate > 0 are required")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    train_loss: list = field(default_factory=list)
    test_loss: list = field(default_factory=list)
    n_train: int = 0
    n_test: int = 0

    @property
    def final_train(self):
        return self.train_loss[-1]

    @property
    def final_test(self):
        return self.test_loss[-1] if self.test_loss else float("nan")


def mse(pred, target):
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.mean((pred - target) ** 2))


def split_indices(n, split, rng):
    """Shuffled train/test index split; the test set is non-empty whenever ``split < 1`` and ``n >= 2``."""
    perm = rng.permutation(n)
    n_train = int(round(split * n))
    if split < 1.0:
        n_train = min(max(n_train, 1), n - 1)
    return perm[:n_train], perm[n_train:]


def train_network(net, X, Y, cfg=None):
    """Fit ``net`` to ``(X, Y)`` by minimising the mean squared error.

    Loss curves include the untrained network as entry 0.
    """
    cfg = TrainConfig() if cfg is None else cfg
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[0] != Y.shape[0]:
        raise ValidationError("inputs and targets disagree on sample count")
    if X.shape[0] < 2:
        raise ValidationError("training needs at least two pairs")
    Y = Y.reshape((Y.shape[0],) + net.output_shape)
    rng = make_rng(cfg.seed, 11)
    tr, te = split_indices(X.shape[0], cfg.split, rng)
    Xtr, Ytr, Xte, Yte = X[tr], Y[tr], X[te], Y[te]
    batch = min(cfg.batch_size, len(tr))
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2,
                         eps=cfg.eps, momentum=cfg.momentum)
    result = TrainResult(n_train=len(tr), n_test=len(te))

    def record(epoch):
        loss = mse(net.predict(Xtr), Ytr)
        if not np.isfinite(loss):
            raise TrainingDivergence(epoch, opt.lr)
        result.train_loss.append(loss)
        if len(te):
            result.test_loss.append(mse(net.predict(Xte), Yte))

    record(0)
    scale = 2.0 / np.prod(net.output_shape)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(tr))
        # divergence surfaces through the finite-loss check in record()
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, len(tr), batch):
                idx = order[start:start + batch]
                pred, caches = net.forward(Xtr[idx], True, rng)
                gy = scale * (pred - Ytr[idx]) / len(idx)
                _, grads = net.backward(caches, gy)
                opt.step(net, grads)
            opt.lr *= cfg.lr_decay
            record(epoch)
    return result
