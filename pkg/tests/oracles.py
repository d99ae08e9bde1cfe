"""Independent reference implementations the tests compare against."""

from __future__ import annotations

import numpy as np

from stayforge.nn import HyperConfig, ModelState, backward, forward_logits, init_model, loss_from_logits

BETA1, BETA2, EPS = 0.9, 0.999, 1e-8


def mann_whitney_auc(scores, truth) -> float:
    """Fraction of (positive, negative) pairs ranked correctly, ties counting half."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth)
    pos, neg = scores[truth == 1], scores[truth == 0]
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


def numeric_gradients(model: ModelState, cfg: HyperConfig, X, y, weight: float, seed: int, h: float = 1e-5):
    """Central differences of the full loss for every parameter element."""
    grads = {}
    for key, theta in model.params.items():
        g = np.zeros_like(theta)
        for idx in np.ndindex(theta.shape):
            orig = theta[idx]
            values = []
            for delta in (h, -h):
                theta[idx] = orig + delta
                z = forward_logits(model, cfg, X, training=True, seed=seed)
                values.append(loss_from_logits(z, y, weight, model, cfg.reg_type, cfg.reg_factor))
            theta[idx] = orig
            g[idx] = (values[0] - values[1]) / (2 * h)
        grads[key] = g
    return grads


def gradient_check(cfg: HyperConfig, seed: int, n_inputs: int = 5, n_rows: int = 8, weight: float = 2.5) -> float:
    """Worst per-array relative error between backprop and finite differences."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n_rows, n_inputs))
    y = (rng.random(n_rows) < 0.5).astype(float)
    model = init_model(cfg, n_inputs, seed)
    # zero biases can land a unit exactly on an activation kink; move off it
    for key in model.params:
        if key.startswith("b"):
            model.params[key] += rng.normal(scale=0.1, size=model.params[key].shape)
    analytic, _ = backward(model, cfg, X, y, weight, seed=seed)
    numeric = numeric_gradients(model, cfg, X, y, weight, seed)
    worst = 0.0
    for key in analytic:
        a, n = analytic[key], numeric[key]
        denom = max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)
        worst = max(worst, float(np.linalg.norm(a - n) / denom))
    return worst


class ReferenceOptimizer:
    """Textbook update rules with explicit bias correction."""

    def __init__(self, name: str, lr: float):
        self.name, self.lr, self.t, self.s = name, lr, 0, {}

    def step(self, theta: np.ndarray, g: np.ndarray) -> np.ndarray:
        self.t += 1
        t, lr, s = self.t, self.lr, self.s
        for k in ("m", "v", "u", "ms", "vel", "acc", "eg", "edx"):
            s.setdefault(k, np.zeros_like(theta))
        if self.name in ("adam", "nadam", "adamax"):
            s["m"] = BETA1 * s["m"] + (1 - BETA1) * g
        if self.name == "adam":
            s["v"] = BETA2 * s["v"] + (1 - BETA2) * g * g
            m_hat = s["m"] / (1 - BETA1**t)
            v_hat = s["v"] / (1 - BETA2**t)
            return theta - lr * m_hat / (np.sqrt(v_hat) + EPS)
        if self.name == "nadam":
            s["v"] = BETA2 * s["v"] + (1 - BETA2) * g * g
            v_hat = s["v"] / (1 - BETA2**t)
            look = BETA1 * s["m"] / (1 - BETA1 ** (t + 1)) + (1 - BETA1) * g / (1 - BETA1**t)
            return theta - lr * look / (np.sqrt(v_hat) + EPS)
        if self.name == "adamax":
            s["u"] = np.maximum(BETA2 * s["u"], np.abs(g))
            return theta - lr / (1 - BETA1**t) * s["m"] / (s["u"] + EPS)
        if self.name == "rmsprop_momentum":
            s["ms"] = 0.9 * s["ms"] + 0.1 * g * g
            s["vel"] = 0.9 * s["vel"] + lr * g / np.sqrt(s["ms"] + EPS)
            return theta - s["vel"]
        if self.name == "adagrad":
            s["acc"] = s["acc"] + g * g
            return theta - lr * g / (np.sqrt(s["acc"]) + EPS)
        if self.name == "adadelta":
            rho, eps = 0.95, 1e-6
            s["eg"] = rho * s["eg"] + (1 - rho) * g * g
            dx = -np.sqrt(s["edx"] + eps) / np.sqrt(s["eg"] + eps) * g
            s["edx"] = rho * s["edx"] + (1 - rho) * dx * dx
            return theta + lr * dx
        raise ValueError(self.name)
