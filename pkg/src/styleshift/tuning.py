"""Sequential model-based search over the two contrast weights.

The first evaluation is pinned at (5, 5); afterwards a Gaussian-process
surrogate (squared-exponential kernel, length scale 2.0, observation noise
1e-6) ranks 256 seeded random candidates per iteration by expected
improvement. A pure random-search mode is available as a fallback for
environments without stable linear algebra.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

KERNEL_LENGTH_SCALE = 2.0
OBSERVATION_NOISE = 1e-6
CANDIDATES_PER_ITER = 256
START_POINT = (5.0, 5.0)


class TuningError(ValueError):
    pass


@dataclass
class SearchBox:
    alpha_range: tuple[float, float] = (0.0, 10.0)
    beta_range: tuple[float, float] = (0.0, 10.0)
    budget: int = 30

    def __post_init__(self) -> None:
        for low, high in (self.alpha_range, self.beta_range):
            if not low < high:
                raise TuningError("search intervals must be nonempty")
        if self.budget < 1:
            raise TuningError("budget must be >= 1")

    def clip(self, alpha: float, beta: float) -> tuple[float, float]:
        return (
            float(np.clip(alpha, *self.alpha_range)),
            float(np.clip(beta, *self.beta_range)),
        )


@dataclass
class Trial:
    alpha: float
    beta: float
    objective_value: float
    eval_index: int
    failed: bool = False


def _normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _normal_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _rbf_kernel(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (2.0 * KERNEL_LENGTH_SCALE**2))


def _expected_improvement(
    candidates: np.ndarray,
    train_x: np.ndarray,
    train_y: np.ndarray,
    best_y: float,
) -> np.ndarray:
    """EI for maximization, computed on standardized observations."""
    y_mean = train_y.mean()
    y_std = train_y.std()
    if y_std < 1e-12:
        y_std = 1.0
    y = (train_y - y_mean) / y_std
    best = (best_y - y_mean) / y_std

    k_train = _rbf_kernel(train_x, train_x) + OBSERVATION_NOISE * np.eye(len(train_x))
    chol = np.linalg.cholesky(k_train)
    alpha_vec = np.linalg.solve(chol.T, np.linalg.solve(chol, y))
    k_cross = _rbf_kernel(train_x, candidates)
    mu = k_cross.T @ alpha_vec
    v = np.linalg.solve(chol, k_cross)
    var = np.clip(1.0 - (v**2).sum(axis=0), 0.0, None)
    sigma = np.sqrt(var)

    ei = np.empty(len(candidates))
    for i in range(len(candidates)):
        if sigma[i] < 1e-12:
            ei[i] = max(mu[i] - best, 0.0)
        else:
            z = (mu[i] - best) / sigma[i]
            ei[i] = (mu[i] - best) * _normal_cdf(z) + sigma[i] * _normal_pdf(z)
    return ei


def _sample_candidates(
    box: SearchBox, best_point: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Multistart pool: half uniform over the box, half local to the best."""
    n_local = CANDIDATES_PER_ITER // 2
    n_global = CANDIDATES_PER_ITER - n_local
    lows = np.array([box.alpha_range[0], box.beta_range[0]])
    highs = np.array([box.alpha_range[1], box.beta_range[1]])
    global_pts = rng.uniform(lows, highs, size=(n_global, 2))
    scale = 0.05 * (highs - lows)
    local_pts = np.clip(best_point + rng.normal(0.0, scale, size=(n_local, 2)), lows, highs)
    return np.vstack([global_pts, local_pts])


def optimize(
    objective: Callable[[float, float], float],
    box: SearchBox | None = None,
    rng: np.random.Generator | None = None,
    method: str = "gp",
) -> tuple[Trial, list[Trial]]:
    """Maximize ``objective`` over the box; returns (best trial, full trace).

    The trace has exactly ``box.budget`` entries, failures included: an
    objective that raises is recorded as a failed trial with value -inf and
    the search continues.
    """
    if method not in ("gp", "random"):
        raise TuningError(f"unknown method {method!r}")
    box = box or SearchBox()
    rng = rng if rng is not None else np.random.default_rng(0)
    trace: list[Trial] = []

    def evaluate(alpha: float, beta: float) -> Trial:
        try:
            value = float(objective(alpha, beta))
            failed = False
        except Exception as exc:
            log.warning("objective failed at (%.3f, %.3f): %s", alpha, beta, exc)
            value, failed = float("-inf"), True
        trial = Trial(alpha, beta, value, eval_index=len(trace), failed=failed)
        trace.append(trial)
        return trial

    evaluate(*box.clip(*START_POINT))

    while len(trace) < box.budget:
        finite = [t for t in trace if not t.failed and math.isfinite(t.objective_value)]
        if method == "random" or not finite:
            lows = (box.alpha_range[0], box.beta_range[0])
            highs = (box.alpha_range[1], box.beta_range[1])
            point = rng.uniform(lows, highs)
            evaluate(float(point[0]), float(point[1]))
            continue
        train_x = np.array([[t.alpha, t.beta] for t in trace])
        worst = min(t.objective_value for t in finite)
        train_y = np.array(
            [t.objective_value if not t.failed and math.isfinite(t.objective_value)
             else worst - 1.0
             for t in trace]
        )
        best_trial = max(finite, key=lambda t: t.objective_value)
        candidates = _sample_candidates(
            box, np.array([best_trial.alpha, best_trial.beta]), rng
        )
        ei = _expected_improvement(candidates, train_x, train_y, best_trial.objective_value)
        pick = candidates[int(np.argmax(ei))]
        evaluate(float(pick[0]), float(pick[1]))

    best = max(trace, key=lambda t: (not t.failed, t.objective_value, -t.eval_index))
    return best, trace


def save_trace(trace: Sequence[Trial], path: str | Path) -> None:
    """Persist one trial per line as JSON."""
    lines = [json.dumps(asdict(t), sort_keys=True) for t in trace]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_trace(path: str | Path) -> list[Trial]:
    trials = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            trials.append(Trial(**json.loads(line)))
    return trials


def composite_objective(
    accuracy: float,
    r_sbleu: float,
    ppl: float,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
    ppl_cap: float = 500.0,
) -> float:
    """Scalar validation score: accuracy and BLEU up, capped perplexity down."""
    w_acc, w_bleu, w_ppl = weights
    return (
        w_acc * accuracy
        + w_bleu * (r_sbleu / 100.0)
        - w_ppl * min(ppl / ppl_cap, 1.0)
    )


class ValidationPipeline:
    """What validation needs from a transfer system: outputs plus scorers."""

    def transfer(self, x: str, target_style: str) -> str:
        raise NotImplementedError

    def classify(self, text: str) -> tuple[str, float]:
        raise NotImplementedError

    def perplexity(self, text: str) -> float:
        raise NotImplementedError


def validation_objective(
    pipeline: ValidationPipeline,
    dev_set: Sequence[tuple[str, str, str]],
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
    ppl_cap: float = 500.0,
) -> float:
    """Run the pipeline over (input, reference, target_style) items and score.

    Accuracy is the fraction classified as the target style, BLEU is the
    corpus score of outputs against references, and perplexity the mean of
    per-item values (items whose perplexity cannot be computed are skipped
    with a warning; if none can, the cap is charged in full).
    """
    from .metrics import corpus_bleu, style_accuracy

    if not dev_set:
        raise TuningError("dev set must be nonempty")
    outputs = [pipeline.transfer(x, style) for x, _, style in dev_set]
    targets = {style for _, _, style in dev_set}
    if len(targets) != 1:
        raise TuningError("dev set must share one target style")
    accuracy = style_accuracy(pipeline, outputs, targets.pop())
    r_sbleu = corpus_bleu(outputs, [[ref] for _, ref, _ in dev_set])
    ppls = []
    for out in outputs:
        try:
            ppls.append(pipeline.perplexity(out))
        except Exception as exc:
            log.warning("perplexity skipped for one item: %s", exc)
    ppl = float(np.mean(ppls)) if ppls else ppl_cap
    return composite_objective(accuracy, r_sbleu, ppl, weights=weights, ppl_cap=ppl_cap)
