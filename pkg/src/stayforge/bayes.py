"""Bayesian hyperparameter search: GP surrogate (Matern 5/2), expected improvement, sweep driver."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import InvalidConfigError, ParseError, SurrogateFailureError
from .io import atomic_write_text
from .nn import Activation, HyperConfig, Optimizer, RegType

log = logging.getLogger(__name__)

LOG_GRID = tuple(
    v for p in range(-8, -1) for m in (1, 5) if (v := float(f"{m}e{p}")) <= 1e-2
)
GP_NOISE = 1e-4
LENGTH_GRID = tuple(np.logspace(np.log10(0.05), np.log10(5.0), 20))
VARIANCE_GRID = tuple(np.logspace(-2, 1, 10))
MAX_JITTER = 1e-6


def _isin(value: float, choices: Sequence[float]) -> bool:
    return any(math.isclose(value, c, rel_tol=1e-9, abs_tol=1e-15) for c in choices)


@dataclass(frozen=True)
class SearchSpace:
    """Domain of every HyperConfig field.

    ``learning_rates``/``reg_factors`` set to ``None`` make that axis
    continuous log-uniform over its bounds instead of a grid.
    """

    optimizers: tuple[Optimizer, ...] = tuple(Optimizer)
    layers: tuple[int, ...] = (1, 2, 3, 4, 5)
    neurons: tuple[int, ...] = tuple(range(1000, 5001, 500))
    dropout_rates: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    learning_rates: tuple[float, ...] | None = LOG_GRID
    learning_rate_bounds: tuple[float, float] = (1e-8, 1e-2)
    reg_types: tuple[RegType, ...] = tuple(RegType)
    reg_factors: tuple[float, ...] | None = LOG_GRID
    reg_factor_bounds: tuple[float, float] = (1e-8, 1e-2)
    activations: tuple[Activation, ...] = tuple(Activation)
    alpha_bounds: tuple[float, float] = (0.0, 0.5)

    @property
    def dim(self) -> int:
        return len(self.optimizers) + len(self.reg_types) + len(self.activations) + 6

    def contains(self, cfg: HyperConfig) -> bool:
        try:
            self.validate(cfg)
        except InvalidConfigError:
            return False
        return True

    def validate(self, cfg: HyperConfig) -> None:
        def check(ok: bool, what: str):
            if not ok:
                raise InvalidConfigError(f"{what} outside the search space: {cfg}")

        check(cfg.optimizer in self.optimizers, "optimizer")
        check(cfg.layers in self.layers, "layers")
        check(cfg.neurons_per_layer in self.neurons, "neurons_per_layer")
        check(_isin(cfg.dropout_rate, self.dropout_rates), "dropout_rate")
        check(self._log_ok(cfg.learning_rate, self.learning_rates, self.learning_rate_bounds), "learning_rate")
        check(cfg.reg_type in self.reg_types, "reg_type")
        check(self._log_ok(cfg.reg_factor, self.reg_factors, self.reg_factor_bounds), "reg_factor")
        check(cfg.activation in self.activations, "activation")
        if cfg.activation is Activation.LEAKY_RELU:
            lo, hi = self.alpha_bounds
            check(lo <= cfg.leaky_alpha <= hi, "leaky_alpha")

    @staticmethod
    def _log_ok(v: float, grid, bounds) -> bool:
        if grid is not None:
            return _isin(v, grid)
        return bounds[0] * (1 - 1e-12) <= v <= bounds[1] * (1 + 1e-12)


@dataclass
class TrialRecord:
    config: HyperConfig
    objective: float
    trial_index: int
    wall_time_s: float | None = None

    def to_json(self, include_time: bool = True) -> str:
        d = {"trial_index": self.trial_index, "config": self.config.to_dict(), "objective": self.objective}
        if include_time and self.wall_time_s is not None:
            d["wall_time_s"] = self.wall_time_s
        return json.dumps(d)

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        return cls(HyperConfig.from_dict(d["config"]), float(d["objective"]), int(d["trial_index"]), d.get("wall_time_s"))


def _scale(v: float, choices: Sequence[float]) -> float:
    lo, hi = min(choices), max(choices)
    return 0.0 if hi == lo else (v - lo) / (hi - lo)


def _log_scale(v: float, grid, bounds) -> float:
    lo, hi = (min(grid), max(grid)) if grid is not None else bounds
    if hi == lo:
        return 0.0
    return (math.log10(v) - math.log10(lo)) / (math.log10(hi) - math.log10(lo))


def encode_config(cfg: HyperConfig, space: SearchSpace) -> np.ndarray:
    """Unit-cube vector.

    Layout: optimizer one-hot, layers, neurons, dropout, log10 learning
    rate, reg-type one-hot, log10 reg factor, activation one-hot, alpha/0.5.
    """
    space.validate(cfg)
    parts: list[float] = [float(cfg.optimizer is o) for o in space.optimizers]
    parts.append(_scale(cfg.layers, space.layers))
    parts.append(_scale(cfg.neurons_per_layer, space.neurons))
    parts.append(_scale(cfg.dropout_rate, space.dropout_rates))
    parts.append(_log_scale(cfg.learning_rate, space.learning_rates, space.learning_rate_bounds))
    parts.extend(float(cfg.reg_type is r) for r in space.reg_types)
    parts.append(_log_scale(cfg.reg_factor, space.reg_factors, space.reg_factor_bounds))
    parts.extend(float(cfg.activation is a) for a in space.activations)
    hi = space.alpha_bounds[1]
    parts.append(cfg.leaky_alpha / hi if cfg.leaky_alpha is not None and hi > 0 else 0.0)
    return np.array(parts)


def _log_uniform(rng: np.random.Generator, bounds: tuple[float, float]) -> float:
    lo, hi = np.log10(bounds[0]), np.log10(bounds[1])
    return float(10 ** rng.uniform(lo, hi))


def sample_random(space: SearchSpace, rng: np.random.Generator) -> HyperConfig:
    """Independent uniform draw per field (log-uniform on continuous log axes)."""

    def pick(choices):
        return choices[int(rng.integers(len(choices)))]

    optimizer = pick(space.optimizers)
    layers = pick(space.layers)
    neurons = pick(space.neurons)
    dropout = pick(space.dropout_rates)
    lr = pick(space.learning_rates) if space.learning_rates is not None else _log_uniform(rng, space.learning_rate_bounds)
    reg_type = pick(space.reg_types)
    reg = pick(space.reg_factors) if space.reg_factors is not None else _log_uniform(rng, space.reg_factor_bounds)
    activation = pick(space.activations)
    alpha = float(rng.uniform(*space.alpha_bounds))
    return HyperConfig(
        optimizer=optimizer,
        layers=layers,
        neurons_per_layer=neurons,
        dropout_rate=dropout,
        learning_rate=lr,
        reg_type=reg_type,
        reg_factor=reg,
        activation=activation,
        leaky_alpha=alpha if activation is Activation.LEAKY_RELU else None,
    )


def matern52(A: np.ndarray, B: np.ndarray, length_scale: float, variance: float) -> np.ndarray:
    d2 = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T
    r = np.sqrt(np.maximum(d2, 0.0)) * math.sqrt(5.0) / length_scale
    return variance * (1.0 + r + r * r / 3.0) * np.exp(-r)


@dataclass
class SurrogateState:
    X: np.ndarray
    y: np.ndarray
    y_mean: float
    y_scale: float
    length_scale: float
    signal_variance: float
    noise: float
    chol: np.ndarray
    weights: np.ndarray  # K^-1 y_standardized
    jitter: float = 0.0
    log_marginal_likelihood: float = field(default=float("nan"))


def _cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    for jitter in (0.0, 1e-10, 1e-9, 1e-8, 1e-7, MAX_JITTER):
        try:
            return np.linalg.cholesky(K + jitter * np.eye(len(K))), jitter
        except np.linalg.LinAlgError:
            continue
    raise SurrogateFailureError("kernel matrix is singular even with jitter 1e-6")


def _solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    from scipy.linalg import solve_triangular

    return solve_triangular(L.T, solve_triangular(L, b, lower=True), lower=False)


def fit_surrogate(
    trials: Sequence[TrialRecord],
    space: SearchSpace,
    length_scale: float | None = None,
    signal_variance: float | None = None,
    noise: float = GP_NOISE,
) -> SurrogateState:
    """GP on encoded configs; kernel hyperparameters by grid-searched marginal likelihood.

    Objectives are standardized internally. Constant objectives leave the
    output scale at 0, so the posterior collapses onto the constant.
    """
    if len(trials) < 2:
        raise SurrogateFailureError(f"need >= 2 trials, got {len(trials)}")
    X = np.array([encode_config(t.config, space) for t in trials])
    y = np.array([t.objective for t in trials], dtype=np.float64)
    y_mean = float(y.mean())
    y_scale = float(y.std())
    ys = (y - y_mean) / (y_scale if y_scale > 0 else 1.0)

    lengths = LENGTH_GRID if length_scale is None else (length_scale,)
    variances = VARIANCE_GRID if signal_variance is None else (signal_variance,)
    n = len(y)
    best = None
    for ls in lengths:
        base = matern52(X, X, ls, 1.0)
        for var in variances:
            K = var * base + noise * np.eye(n)
            try:
                L, jitter = _cholesky(K)
            except SurrogateFailureError:
                continue
            w = _solve(L, ys)
            lml = -0.5 * ys @ w - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi)
            if best is None or lml > best[0]:
                best = (lml, ls, var, L, w, jitter)
    if best is None:
        raise SurrogateFailureError("no kernel hyperparameters gave a positive-definite kernel matrix")
    lml, ls, var, L, w, jitter = best
    return SurrogateState(X, y, y_mean, y_scale, float(ls), float(var), noise, L, w, jitter, float(lml))


def posterior_batch(s: SurrogateState, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Xq = np.atleast_2d(np.asarray(Xq, dtype=np.float64))
    Ks = matern52(Xq, s.X, s.length_scale, s.signal_variance)
    mu = Ks @ s.weights
    from scipy.linalg import solve_triangular

    v = solve_triangular(s.chol, Ks.T, lower=True)
    var = np.maximum(s.signal_variance - np.sum(v * v, axis=0), 0.0)
    return s.y_mean + s.y_scale * mu, s.y_scale * np.sqrt(var)


def posterior(s: SurrogateState, x: np.ndarray) -> tuple[float, float]:
    """Predictive mean and standard deviation at one encoded point."""
    mu, sigma = posterior_batch(s, x)
    return float(mu[0]), float(sigma[0])


def expected_improvement(mu, sigma, best: float):
    """Expected improvement over ``best`` for maximization."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    gain = mu - best
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, gain / np.where(sigma > 0, sigma, 1.0), 0.0)
    ei = np.where(
        sigma > 0,
        gain * ndtr(z) + sigma * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi),
        np.maximum(gain, 0.0),
    )
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def suggest_next(
    s: SurrogateState,
    space: SearchSpace,
    rng: np.random.Generator,
    candidates: int = 1000,
    evaluated: Sequence[HyperConfig] = (),
    max_rounds: int = 10,
) -> HyperConfig:
    """EI-argmax over random candidates, skipping configs already evaluated."""
    best = float(s.y.max())
    seen = set(evaluated)
    fallback = None
    for _ in range(max_rounds):
        pool = [sample_random(space, rng) for _ in range(candidates)]
        mu, sigma = posterior_batch(s, np.array([encode_config(c, space) for c in pool]))
        ei = expected_improvement(mu, sigma, best)
        if fallback is None:
            fallback = pool[int(np.argmax(ei))]
        fresh = np.array([c not in seen for c in pool])
        if fresh.any():
            ei = np.where(fresh, ei, -np.inf)
            return pool[int(np.argmax(ei))]
    log.warning("every candidate in %d rounds was already evaluated; returning a duplicate", max_rounds)
    return fallback


def read_ledger(path: str | Path) -> list[TrialRecord]:
    path = Path(path)
    trials = []
    try:
        lines = path.read_text().splitlines()
    except FileNotFoundError:
        raise ParseError(f"{path}: ledger not found") from None
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            trials.append(TrialRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}:{lineno}: bad ledger line ({exc})") from None
    for i, t in enumerate(trials):
        if t.trial_index != i:
            raise ParseError(f"{path}: trial indices must be dense from 0, found {t.trial_index} at line {i + 1}")
    return trials


def write_ledger(path: str | Path, trials: Sequence[TrialRecord], include_time: bool = False) -> None:
    atomic_write_text(path, "".join(t.to_json(include_time) + "\n" for t in trials))


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial_index])


def run_sweep(
    space: SearchSpace,
    objective: Callable[[HyperConfig], float],
    budget: int = 50,
    initial_random: int = 10,
    seed: int = 0,
    ledger_path: str | Path | None = None,
    resume: Sequence[TrialRecord] = (),
    candidates: int = 1000,
    record_time: bool = False,
) -> tuple[TrialRecord, list[TrialRecord]]:
    """Random initial design, then fit -> suggest -> evaluate until ``budget`` trials.

    Each trial draws from its own generator keyed by (seed, trial index),
    so resuming from a partial ledger reproduces the uninterrupted run.
    A trial whose objective raises is recorded with objective 0.
    """
    if not budget >= initial_random >= 2:
        raise ValueError(f"need budget >= initial_random >= 2, got {budget}, {initial_random}")
    trials = list(resume)
    if len(trials) > budget:
        raise ValueError(f"resume ledger has {len(trials)} trials, budget is {budget}")
    for i in range(len(trials), budget):
        rng = trial_rng(seed, i)
        if i < initial_random:
            cfg = sample_random(space, rng)
        else:
            state = fit_surrogate(trials, space)
            cfg = suggest_next(state, space, rng, candidates, [t.config for t in trials])
        started = time.perf_counter()
        try:
            value = float(objective(cfg))
            if not math.isfinite(value):
                raise ValueError(f"objective returned {value}")
        except Exception as exc:  # noqa: BLE001 - any failed trial scores 0
            log.warning("trial %d failed (%s: %s); recording objective 0", i, type(exc).__name__, exc)
            value = 0.0
        trials.append(TrialRecord(cfg, value, i, time.perf_counter() - started))
        log.info("trial %d/%d objective=%.4f %s", i + 1, budget, value, cfg.to_dict())
        if ledger_path is not None:
            write_ledger(ledger_path, trials, record_time)
    best = max(trials, key=lambda t: t.objective)
    return best, trials
