"""Shared test utilities, including the finite-difference gradient oracle."""
import numpy as np

from rangevote.net import ModelConfig, init_params, forward
from rangevote.net.model import backward, detection_loss


def make_fd_fixture(fusion, frames, seed, widths=(4, 4, 4, 4), points=16, batch=4):
    """A double-precision network plus a batch and targets for checking."""
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(stage_channels=widths, fusion=fusion, input_points=points,
                      input_frames=frames, dropout_rate=0.0)
    params = init_params(cfg, rng, dtype=np.float64)
    x = rng.standard_normal((batch, frames, points))
    labels = rng.integers(0, 4, batch)
    targets = rng.standard_normal((batch, 2)) * 0.3
    return cfg, params, x, labels, targets, labels != 0


def fd_max_rel_error(cfg, params, x, labels, targets, has_vote, h=1e-5):
    """Worst relative disagreement between backprop and central differences.

    The denominator floor of 1e-5 is the absolute gradient resolution of
    the difference oracle (roundoff is about eps * |loss| / h); parameters
    whose true gradient is exactly zero, such as convolution biases that a
    following train-mode batch-norm cancels, otherwise turn pure noise into
    spurious relative error.
    """

    def loss_of():
        probs, votes, _ = forward(params, cfg, x, train_mode=True)
        return detection_loss(probs, votes, labels, targets, has_vote)[0]

    probs, votes, cache = forward(params, cfg, x, train_mode=True)
    _, dlogits, dvotes = detection_loss(probs, votes, labels, targets, has_vote)
    grads = backward(params, cfg, cache, dlogits, dvotes)
    worst = 0.0
    for name in params.trainable_names():
        flat = params[name].reshape(-1)
        g = grads[name].reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            lp = loss_of()
            flat[k] = orig - h
            lm = loss_of()
            flat[k] = orig
            num = (lp - lm) / (2.0 * h)
            worst = max(worst, abs(num - g[k]) / max(abs(num), abs(g[k]), 1e-5))
    return worst
