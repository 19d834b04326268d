"""Training loops: adaptive (AdamW-style), constant-lr SGD, and DP-SGD."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import models
from .params import ParameterVector

ADAPTIVE = "adaptive"
SGD_CONSTANT = "sgd-constant"
DP_SGD = "dp-sgd"

SHUFFLE_PARTITION = "shuffle-partition"
POISSON = "poisson"


class TrainError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str
    learning_rate: float
    batch_size: int
    epochs: int
    seed: int
    weight_decay: float = 0.0
    clip_norm: Optional[float] = None
    noise_multiplier: Optional[float] = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.optimizer not in (ADAPTIVE, SGD_CONSTANT, DP_SGD):
            raise TrainError("unknown optimizer %r" % self.optimizer)
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epochs < 0:
            raise TrainError("bad learning_rate/batch_size/epochs")
        if self.optimizer == DP_SGD:
            if not self.clip_norm or self.clip_norm <= 0:
                raise TrainError("dp-sgd requires clip_norm > 0")
            if self.noise_multiplier is None or self.noise_multiplier < 0:
                raise TrainError("dp-sgd requires noise_multiplier >= 0")


@dataclass
class EpochSnapshot:
    epoch: int
    theta: ParameterVector
    mean_train_loss: float


def sample_minibatches(n, batch_size, mode, rng, q=None):
    """Index batches for one epoch.

    shuffle-partition: a random permutation chopped into batch_size chunks.
    poisson: ceil(n / batch_size) batches, each including every record
    independently with probability q.
    """
    if mode == SHUFFLE_PARTITION:
        perm = rng.permutation(n)
        return [perm[i:i + batch_size] for i in range(0, n, batch_size)]
    if mode == POISSON:
        if q is None or not (0 < q <= 1):
            raise TrainError("poisson sampling requires q in (0, 1]")
        steps = -(-n // batch_size)
        return [np.nonzero(rng.random(n) < q)[0] for _ in range(steps)]
    raise TrainError("unknown sampling mode %r" % mode)


def dp_sgd_step(spec, theta, X, y, clip_norm, noise_multiplier, lr, noise_rng,
                denom=None):
    """One DP-SGD update: clip per-example gradients, add Gaussian noise.

    denom defaults to the realized batch size; the training loop passes the
    nominal batch size so the Poisson batch-size randomness does not leak
    into the scale of the update.
    """
    n = X.shape[0]
    if n == 0:
        raise TrainError("empty minibatch")
    if denom is None:
        denom = n
    grad_sum, _ = models.clipped_gradient_sum(spec, theta, X, y, clip_norm)
    noise = noise_rng.normal(0.0, noise_multiplier * clip_norm,
                             size=theta.layout.size)
    return theta.replace(theta.values - lr * (grad_sum.values + noise) / denom)


def _adam_update(state, grad, config):
    m, v, t = state
    t += 1
    m = config.beta1 * m + (1 - config.beta1) * grad
    v = config.beta2 * v + (1 - config.beta2) * grad * grad
    m_hat = m / (1 - config.beta1 ** t)
    v_hat = v / (1 - config.beta2 ** t)
    step = config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return (m, v, t), step


def train(spec, theta0, X, y, config, weights=None):
    """Run the configured optimizer; returns (theta_final, epoch snapshots).

    weights, when given, is the per-record alpha vector aligned with X rows
    and is applied through the weighted NLL gradient. Deterministic for a
    fixed seed: shuffle order, Poisson inclusion, and noise all come from
    streams derived from config.seed.
    """
    n = X.shape[0]
    if config.batch_size > n:
        raise TrainError("batch_size %d exceeds dataset size %d"
                         % (config.batch_size, n))
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape[0] != n:
            raise TrainError("weights must cover every record in the view")
    shuffle_rng, noise_rng = [
        np.random.default_rng(s)
        for s in np.random.SeedSequence(config.seed).spawn(2)]
    theta = theta0
    snapshots = []
    adam_state = (np.zeros(len(theta0)), np.zeros(len(theta0)), 0)
    q = config.batch_size / n
    for epoch in range(config.epochs):
        mode = POISSON if config.optimizer == DP_SGD else SHUFFLE_PARTITION
        batches = sample_minibatches(n, config.batch_size, mode, shuffle_rng,
                                     q=q)
        loss_sum = 0.0
        count = 0
        for b, idx in enumerate(batches):
            if config.optimizer == DP_SGD and idx.size == 0:
                continue
            Xb, yb = X[idx], np.asarray(y)[idx]
            wb = None if weights is None else weights[idx]
            loss = models.mean_nll(spec, theta, Xb, yb, wb)
            if not np.isfinite(loss):
                raise TrainError(
                    "non-finite loss %r at epoch %d batch %d" % (loss, epoch, b))
            loss_sum += loss * idx.size
            count += idx.size
            if config.optimizer == DP_SGD:
                theta = dp_sgd_step(
                    spec, theta, Xb, yb, config.clip_norm,
                    config.noise_multiplier, config.learning_rate, noise_rng,
                    denom=config.batch_size)
                if config.weight_decay:
                    theta = theta.scale(
                        1.0 - config.learning_rate * config.weight_decay)
            elif config.optimizer == SGD_CONSTANT:
                grad = models.weighted_nll_gradient(spec, theta, Xb, yb, wb)
                theta = theta.replace(
                    theta.values - config.learning_rate * grad.values)
            else:
                grad = models.weighted_nll_gradient(
                    _no_decay(spec), theta, Xb, yb, wb)
                adam_state, step = _adam_update(adam_state, grad.values, config)
                new = theta.values - step
                if config.weight_decay:
                    new = new - config.learning_rate * config.weight_decay \
                        * theta.values
                theta = theta.replace(new)
        mean_loss = loss_sum / count if count else float("nan")
        snapshots.append(EpochSnapshot(epoch, theta, mean_loss))
    return theta, snapshots


def _no_decay(spec):
    """Adaptive optimizer uses decoupled decay, so the gradient omits it."""
    if spec.weight_decay == 0:
        return spec
    return models.ModelSpec(spec.family, spec.input_dim, spec.num_classes,
                            spec.hidden_dim, 0.0)
