from __future__ import annotations

import logging
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from joblib import Parallel, delayed

from services.dataset import UpliftDataset
from services.evaluation import EvaluationError, qini_score
from services.learners import LearnerError
from services.strategies import Scorer, StrategyError, StrategyKind, StrategySpec, fit_strategy, score
from services.transforms import TransformError

logger = logging.getLogger(__name__)

Fitter = Callable[[StrategySpec, UpliftDataset, int, int], Scorer]

METRICS = frozenset({"qini_revenue", "qini_conversion"})
_FIT_FAILURES = (LearnerError, StrategyError, TransformError, EvaluationError)


class SelectionError(RuntimeError):
    """Raised when no candidate of a strategy grid can be fitted and evaluated."""

    def __init__(self, message: str, failures: Sequence[CandidateResult] = ()) -> None:
        super().__init__(message)
        self.failures = tuple(failures)


@dataclass(frozen=True)
class CandidateResult:
    index: int
    spec: StrategySpec
    qini: float | None
    fit_seconds: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True, eq=False)
class Selection:
    best: CandidateResult
    model: Scorer
    candidates: tuple[CandidateResult, ...]

    @property
    def spec(self) -> StrategySpec:
        return self.best.spec


def _evaluate_candidate(
    index: int,
    spec: StrategySpec,
    train: UpliftDataset,
    valid: UpliftDataset,
    metric: str,
    bins: int,
    seed: int,
    fitter: Fitter,
) -> CandidateResult:
    started = time.perf_counter()
    try:
        model = fitter(spec, train, seed, 1)
        outcome = "conversion" if metric == "qini_conversion" else "revenue"
        value = qini_score(score(model, valid), valid, bins=bins, outcome=outcome)
    except _FIT_FAILURES as exc:
        elapsed = time.perf_counter() - started
        logger.warning("Candidate %s (%s) failed: %s", index, spec.label, exc)
        return CandidateResult(index, spec, None, elapsed, error=f"{type(exc).__name__}: {exc}")
    elapsed = time.perf_counter() - started
    logger.debug("Candidate %s (%s): Q=%.6g in %.2fs", index, spec.label, value, elapsed)
    return CandidateResult(index, spec, value, elapsed)


def select_model(
    kind: StrategyKind | str,
    grid: Sequence[StrategySpec],
    train: UpliftDataset,
    valid: UpliftDataset,
    metric: str = "qini_revenue",
    bins: int = 10,
    seed: int = 0,
    n_jobs: int = 1,
    fitter: Fitter = fit_strategy,
) -> Selection:
    """Fit every candidate on train, keep the best validation Qini and refit it on train + valid.

    Ties go to the earliest candidate in grid order. Candidates run concurrently
    when `n_jobs > 1`; results are always collected in grid order.
    """
    if not grid:
        raise SelectionError("The strategy grid is empty.")
    if metric not in METRICS:
        raise SelectionError(f"Unknown selection metric {metric!r}; expected one of {sorted(METRICS)}.")
    kind = StrategyKind(kind)
    strays = [spec.label for spec in grid if spec.kind is not kind]
    if strays:
        raise SelectionError(f"Grid for {kind.value} contains other strategy kinds: {strays}.")

    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_evaluate_candidate)(index, spec, train, valid, metric, bins, seed, fitter)
        for index, spec in enumerate(grid)
    )
    candidates = tuple(sorted(results, key=lambda result: result.index))

    best: CandidateResult | None = None
    for candidate in candidates:
        if candidate.ok and (best is None or candidate.qini > best.qini):  # type: ignore[operator]
            best = candidate
    if best is None:
        raise SelectionError(
            f"All {len(candidates)} candidates for {kind.value} failed to fit.", failures=candidates
        )

    logger.info("Selected %s with validation Q=%.6g", best.spec.label, best.qini)
    try:
        model = fitter(best.spec, train.concat(valid), seed, n_jobs)
    except _FIT_FAILURES as exc:
        raise SelectionError(f"Refitting {best.spec.label} on train + valid failed: {exc}") from exc
    return Selection(best=best, model=model, candidates=candidates)
