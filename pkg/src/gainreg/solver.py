"""Empirical-gain maximization over finite hypothesis spaces.

The default solver is half-quadratic reweighting: the representing function
of a calibrated gain is convex and decreasing, so each weighted ridge
least-squares step maximizes a quadratic minorant tangent at the current
iterate and the empirical gain never decreases (with zero ridge).  A
backtracking gradient ascent covers differentiable gains without usable
weights, and a seeded random-plus-coordinate search handles the piecewise
constant box gain, whose objective counts consensus.

The objective is nonconcave, so fits run from an ordinary-least-squares
anchor plus seeded perturbations and keep the best restart.  An optional
scale-annealing ladder (fit at a chain of decreasing sigmas, warm-starting
each stage) makes very small target scales reachable; each stage is itself
monotone in its own objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateIterateError,
    InvalidInputError,
    InvalidParameterError,
    SingularSystemError,
    UnsupportedOperationError,
)
from .features import (
    FeatureMap,
    HypothesisModel,
    default_sup_bound,
    design_matrix,
)
from .gains import GainSpec, eval_gain, eval_gain_derivative, irls_weight
from .rng import generator
from .simulate import Dataset

IRLS = "irls"
GRADIENT = "gradient"
GRID_CONSENSUS = "grid_consensus"


@dataclass(frozen=True)
class SolverConfig:
    method: str = IRLS
    max_iters: int = 200
    tol: float = 1e-9
    ridge: Optional[float] = None  # None: 1e-8 tr(X'WX)/p guard; 0 disables
    restarts: int = 1
    seed: int = 0
    step_init: float = 1.0
    step_shrink: float = 0.5
    max_step_halvings: int = 40
    anneal: tuple[float, ...] = ()  # descending sigma stages before the target
    consensus_samples: int = 4000
    consensus_sweeps: int = 3

    def __post_init__(self) -> None:
        if self.method not in (IRLS, GRADIENT, GRID_CONSENSUS):
            raise InvalidParameterError(f"unknown method {self.method!r}")
        if self.max_iters < 1:
            raise InvalidParameterError("max_iters must be positive")
        if not (self.tol > 0):
            raise InvalidParameterError("tol must be positive")
        if self.ridge is not None and self.ridge < 0:
            raise InvalidParameterError("ridge must be non-negative")
        if self.restarts < 1:
            raise InvalidParameterError("restarts must be positive")
        if any(s <= 0 for s in self.anneal):
            raise InvalidParameterError("anneal stages must be positive")


@dataclass(frozen=True)
class FitReport:
    model: HypothesisModel
    empirical_gain: float
    sigma: float
    iterations: int
    gain_trace: tuple[float, ...]
    restart_gains: tuple[float, ...]
    converged: bool
    method: str
    clip_at_eval: bool = False


def empirical_gain(
    model: HypothesisModel, data: Dataset, spec: GainSpec, sigma: float
) -> float:
    """Mean gain of the residuals: (1/n) sum p_sigma(y_i - f(x_i))."""
    if data.n == 0:
        raise InvalidInputError("empirical gain needs at least one observation")
    residuals = data.outputs - np.asarray(predict_batch(model, data.inputs))
    return float(np.mean(eval_gain(spec, sigma, residuals)))


def predict_batch(model: HypothesisModel, inputs: np.ndarray) -> np.ndarray:
    values = design_matrix(model.feature_map, inputs) @ model.coefficients
    if model.clip:
        values = np.clip(values, -model.M, model.M)
    return values


def gain_gradient(
    model: HypothesisModel, data: Dataset, spec: GainSpec, sigma: float
) -> np.ndarray:
    """Gradient of the empirical gain in the coefficients."""
    X = design_matrix(model.feature_map, data.inputs)
    residuals = data.outputs - X @ model.coefficients
    slopes = eval_gain_derivative(spec, sigma, residuals)
    return -(X.T @ slopes) / data.n


def _mean_gain(spec: GainSpec, sigma: float, residuals: np.ndarray) -> float:
    return float(np.mean(eval_gain(spec, sigma, residuals)))


def _weighted_solve(
    X: np.ndarray, y: np.ndarray, w: np.ndarray, ridge: Optional[float]
) -> np.ndarray:
    p = X.shape[1]
    Xw = X * w[:, None]
    A = X.T @ Xw
    lam = 1e-8 * float(np.trace(A)) / p if ridge is None else float(ridge)
    A = A + lam * np.eye(p)
    b = Xw.T @ y
    try:
        coeffs = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        if lam == 0.0:
            raise SingularSystemError(
                "weighted normal equations are singular; set a positive ridge"
            ) from exc
        raise
    if not np.all(np.isfinite(coeffs)):
        raise SingularSystemError("weighted solve produced non-finite coefficients")
    return coeffs


def _ols(X: np.ndarray, y: np.ndarray, ridge: Optional[float]) -> np.ndarray:
    return _weighted_solve(X, y, np.ones(len(y)), ridge)


def _irls_stage(
    X: np.ndarray,
    y: np.ndarray,
    coeffs: np.ndarray,
    spec: GainSpec,
    sigma: float,
    cfg: SolverConfig,
    record: Optional[list[float]],
) -> tuple[np.ndarray, int, bool]:
    """Reweighted least squares at a fixed scale; returns (coeffs, iters, converged)."""
    gain = _mean_gain(spec, sigma, y - X @ coeffs)
    if record is not None:
        record.append(gain)
    converged = False
    iters = 0
    for _ in range(cfg.max_iters):
        iters += 1
        residuals = y - X @ coeffs
        w = np.asarray(irls_weight(spec, sigma, residuals), dtype=float)
        top = w.max()
        if not (top > 0.0):
            raise DegenerateIterateError(
                f"all half-quadratic weights vanished at sigma = {sigma}; "
                "increase sigma or anneal from a larger scale"
            )
        if cfg.ridge is None:
            # Auto ridge adapts to the normalized system, so rescaling the
            # weights guards against underflow without changing the problem.
            w = w / top
        coeffs = _weighted_solve(X, y, w, cfg.ridge)
        new_gain = _mean_gain(spec, sigma, y - X @ coeffs)
        if record is not None:
            record.append(new_gain)
        if abs(new_gain - gain) <= cfg.tol * max(1.0, abs(gain)):
            gain = new_gain
            converged = True
            break
        gain = new_gain
    return coeffs, iters, converged


def _gradient_stage(
    X: np.ndarray,
    y: np.ndarray,
    coeffs: np.ndarray,
    spec: GainSpec,
    sigma: float,
    cfg: SolverConfig,
    record: Optional[list[float]],
) -> tuple[np.ndarray, int, bool]:
    """Backtracking ascent; accepted steps never decrease the gain."""
    gain = _mean_gain(spec, sigma, y - X @ coeffs)
    if record is not None:
        record.append(gain)
    step = cfg.step_init
    converged = False
    iters = 0
    for _ in range(cfg.max_iters):
        iters += 1
        residuals = y - X @ coeffs
        grad = -(X.T @ eval_gain_derivative(spec, sigma, residuals)) / len(y)
        norm = float(np.linalg.norm(grad))
        if norm == 0.0:
            converged = True
            break
        accepted = False
        for _ in range(cfg.max_step_halvings):
            candidate = coeffs + step * grad
            cand_gain = _mean_gain(spec, sigma, y - X @ candidate)
            if cand_gain >= gain:
                accepted = True
                break
            step *= cfg.step_shrink
        if not accepted:
            converged = True
            break
        improvement = cand_gain - gain
        coeffs, gain = candidate, cand_gain
        if record is not None:
            record.append(gain)
        # Allow growth after success, capped so the step stays finite.
        step = min(step / cfg.step_shrink, 1e9 * cfg.step_init)
        if improvement <= cfg.tol * max(1.0, abs(gain)):
            converged = True
            break
    return coeffs, iters, converged


def _consensus_count(X: np.ndarray, y: np.ndarray, coeffs: np.ndarray, sigma: float) -> int:
    return int(np.sum(np.abs(y - X @ coeffs) <= sigma))


def _consensus_coordinate_sweep(
    X: np.ndarray, y: np.ndarray, coeffs: np.ndarray, sigma: float
) -> np.ndarray:
    """Exact 1-d updates: choose each coordinate by interval stabbing."""
    coeffs = coeffs.copy()
    for j in range(X.shape[1]):
        col = X[:, j]
        rest = y - X @ coeffs + col * coeffs[j]
        active = np.abs(col) > 1e-12
        if not np.any(active):
            continue
        lo = (rest[active] - sigma) / col[active]
        hi = (rest[active] + sigma) / col[active]
        lows = np.minimum(lo, hi)
        highs = np.maximum(lo, hi)
        events = np.concatenate([np.stack([lows, np.ones_like(lows)], axis=1),
                                 np.stack([highs, -np.ones_like(highs)], axis=1)])
        order = np.lexsort((-events[:, 1], events[:, 0]))
        events = events[order]
        running = np.cumsum(events[:, 1])
        best = int(np.argmax(running))
        if best + 1 < len(events):
            candidate = 0.5 * (events[best, 0] + events[best + 1, 0])
        else:
            candidate = events[best, 0]
        base = np.sum(np.abs(rest[~active]) <= sigma)
        if running[best] + base >= _consensus_count(X, y, coeffs, sigma):
            coeffs[j] = candidate
    return coeffs


def _grid_consensus(
    X: np.ndarray,
    y: np.ndarray,
    spec: GainSpec,
    sigma: float,
    cfg: SolverConfig,
) -> tuple[np.ndarray, int]:
    """Seeded box search plus coordinate refinement for the box gain."""
    try:
        anchor = _ols(X, y, cfg.ridge)
    except SingularSystemError:
        anchor = np.zeros(X.shape[1])
    rng = generator(cfg.seed, "consensus")
    width = 3.0 * (np.abs(anchor) + 1.0)
    samples = rng.uniform(-1.0, 1.0, size=(cfg.consensus_samples, X.shape[1]))
    samples = anchor[None, :] + samples * width[None, :]
    samples[0] = anchor
    inside = np.abs(y[None, :] - samples @ X.T) <= sigma
    counts = inside.sum(axis=1)
    # Refine several leading candidates; a single basin can trap the sweep.
    top = np.argsort(-counts)[:8]
    best, best_count = samples[int(top[0])], int(counts[int(top[0])])
    for idx in top:
        cand = samples[int(idx)]
        for _ in range(cfg.consensus_sweeps):
            cand = _consensus_coordinate_sweep(X, y, cand, sigma)
        count = _consensus_count(X, y, cand, sigma)
        if count > best_count:
            best, best_count = cand, count
    return best, best_count


def _validate_method(spec: GainSpec, method: str) -> None:
    if spec.name == "uniform" and method != GRID_CONSENSUS:
        raise UnsupportedOperationError(
            "the box objective is piecewise constant; use grid_consensus"
        )
    if method == IRLS and spec.calibration == "none":
        raise UnsupportedOperationError(
            f"{spec.name}: reweighting needs a calibrated (type-2) gain; "
            "use the gradient method"
        )
    if method == GRADIENT and spec.generating_deriv is None:
        raise UnsupportedOperationError(f"{spec.name}: gradient method needs a derivative")
    if method == GRID_CONSENSUS and spec.name != "uniform":
        raise UnsupportedOperationError("grid consensus applies to the uniform gain only")


def default_config(spec: GainSpec, **overrides) -> SolverConfig:
    """Method selection by gain class: IRLS, then gradient, then consensus."""
    if spec.name == "uniform":
        method = GRID_CONSENSUS
    elif spec.calibration != "none":
        method = IRLS
    else:
        method = GRADIENT
    return SolverConfig(method=method, **overrides)


def fit_egm(
    data: Dataset,
    spec: GainSpec,
    sigma: float,
    fmap: FeatureMap,
    cfg: Optional[SolverConfig] = None,
    M: Optional[float] = None,
    clip: bool = False,
    init_coefficients: Optional[np.ndarray] = None,
) -> FitReport:
    """Maximize the empirical gain of the data over the feature map's span.

    ``init_coefficients`` replaces the ordinary-least-squares anchor (warm
    start); perturbed restarts still scatter around it.
    """
    if sigma <= 0:
        raise InvalidParameterError("sigma must be positive")
    if data.n == 0:
        raise InvalidInputError("cannot fit an empty dataset")
    if cfg is None:
        cfg = default_config(spec)
    _validate_method(spec, cfg.method)

    X = design_matrix(fmap, data.inputs)
    y = data.outputs
    p = X.shape[1]
    ridge_off = cfg.ridge == 0.0
    if data.n < p and ridge_off:
        raise InvalidParameterError(
            f"n = {data.n} observations cannot identify {p} features without ridge"
        )
    bound = default_sup_bound(y) if M is None else float(M)

    stages = [s for s in sorted(cfg.anneal, reverse=True) if s > sigma]

    if cfg.method == GRID_CONSENSUS:
        coeffs, count = _grid_consensus(X, y, spec, sigma, cfg)
        model = HypothesisModel(feature_map=fmap, coefficients=coeffs, M=bound, clip=clip)
        gain = count / (data.n * 2.0 * sigma)
        return FitReport(
            model=model,
            empirical_gain=gain,
            sigma=sigma,
            iterations=cfg.consensus_sweeps,
            gain_trace=(gain,),
            restart_gains=(gain,),
            converged=True,
            method=cfg.method,
            clip_at_eval=clip,
        )

    stage_fn = _irls_stage if cfg.method == IRLS else _gradient_stage
    if init_coefficients is not None:
        anchor = np.asarray(init_coefficients, dtype=float).ravel()
        if anchor.shape[0] != p:
            raise InvalidParameterError(
                f"{anchor.shape[0]} warm-start coefficients for {p} features"
            )
    else:
        anchor = _ols(X, y, cfg.ridge)
    anchor_norm = float(np.linalg.norm(anchor))

    best: Optional[tuple[float, np.ndarray, list[float], int, bool]] = None
    restart_gains: list[float] = []
    degenerate: Optional[DegenerateIterateError] = None
    for r in range(cfg.restarts):
        if r == 0:
            coeffs = anchor.copy()
        else:
            noise = generator(cfg.seed, "restart", r).standard_normal(p)
            scale = 0.5 * (anchor_norm if anchor_norm > 0 else 1.0)
            coeffs = anchor + scale * noise / max(np.linalg.norm(noise), 1e-300)
        try:
            iters = 0
            for stage_sigma in stages:
                coeffs, it, _ = stage_fn(X, y, coeffs, spec, stage_sigma, cfg, None)
                iters += it
            trace: list[float] = []
            coeffs, it, converged = stage_fn(X, y, coeffs, spec, sigma, cfg, trace)
            iters += it
        except DegenerateIterateError as exc:
            # A wild restart can leave every residual outside the support;
            # skip it unless every restart degenerates.
            degenerate = exc
            restart_gains.append(-math.inf)
            continue
        gain = _mean_gain(spec, sigma, y - X @ coeffs)
        restart_gains.append(gain)
        if best is None or gain > best[0]:
            best = (gain, coeffs, trace, iters, converged)

    if best is None:
        raise degenerate if degenerate is not None else DegenerateIterateError(
            "no restart produced a usable iterate"
        )
    gain, coeffs, trace, iters, converged = best
    model = HypothesisModel(feature_map=fmap, coefficients=coeffs, M=bound, clip=clip)
    return FitReport(
        model=model,
        empirical_gain=gain,
        sigma=sigma,
        iterations=iters,
        gain_trace=tuple(trace),
        restart_gains=tuple(restart_gains),
        converged=converged,
        method=cfg.method,
        clip_at_eval=clip,
    )


def schedule_exponent(variant: str, epsilon: float, q: float) -> float:
    """Piecewise scale exponent matched to moment order and capacity."""
    if epsilon <= 0 or q <= 0:
        raise InvalidParameterError("epsilon and q must be positive")
    e, qq = float(epsilon), float(q)
    if variant == "theta1":
        if e <= 1.0:
            return 1.0 / ((qq + 1.0) * (e + 1.0))
        if e < 2.0:
            return (1.0 + e) / ((1.0 + e) * (e + qq + qq * e) + 2.0 * e)
        if e < 3.0:
            return (1.0 + e) / ((2.0 + 3.0 * qq) * (1.0 + e) + e)
        return 1.0 / (3.0 * (qq + 1.0))
    if variant == "theta2":
        if e <= 1.0:
            return 1.0 / ((qq + 1.0) * (e + 1.0))
        return (1.0 + e) / ((qq + e + qq * e) * (1.0 + e) + 2.0 * e)
    raise InvalidParameterError(f"unknown schedule variant {variant!r}")


def sigma_schedule(variant: str, epsilon: float, q: float, n: int) -> float:
    """Sample-size-driven scale sigma = n^theta(epsilon, q)."""
    if n < 1:
        raise InvalidParameterError("n must be positive")
    return float(n) ** schedule_exponent(variant, epsilon, q)


def _fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    order = generator(seed, "cv-shuffle").permutation(n)
    return [order[k::folds] for k in range(folds)]


def _subset(data: Dataset, idx: np.ndarray) -> Dataset:
    return Dataset(
        inputs=data.inputs[idx],
        outputs=data.outputs[idx],
        seed=data.seed,
        noise=data.noise,
        truth=data.truth,
    )


def cross_validate_sigma(
    data: Dataset,
    spec: GainSpec,
    sigma_grid: Sequence[float],
    fmap: FeatureMap,
    cfg: SolverConfig,
    folds: int = 5,
    seed: int = 0,
) -> tuple[float, list[tuple[float, float]]]:
    """Pick the scale with the best mean held-out gain; ties go to larger sigma."""
    if folds < 2:
        raise InvalidParameterError("cross-validation needs at least 2 folds")
    grid = [float(s) for s in sigma_grid]
    if not grid or any(s <= 0 for s in grid):
        raise InvalidParameterError("sigma grid must be non-empty and positive")
    parts = _fold_indices(data.n, folds, seed)
    all_idx = np.arange(data.n)
    table: list[tuple[float, float]] = []
    for sigma in grid:
        scores = []
        for k in range(folds):
            held = parts[k]
            train = np.setdiff1d(all_idx, held, assume_unique=False)
            report = fit_egm(_subset(data, train), spec, sigma, fmap, cfg)
            scores.append(empirical_gain(report.model, _subset(data, held), spec, sigma))
        table.append((sigma, float(np.mean(scores))))
    best_sigma, best_score = table[0]
    for sigma, score in table[1:]:
        if score > best_score or (score == best_score and sigma >= best_sigma):
            best_sigma, best_score = sigma, score
    return best_sigma, table
