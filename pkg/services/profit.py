from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from services.evaluation import DecileTable

logger = logging.getLogger(__name__)


class ProfitError(RuntimeError):
    """Raised when campaign profit inputs are invalid."""


class CostModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    discount: float = Field(default=0.0, ge=0, lt=1, description="Relative discount granted to responders.")
    contact_cost: float = Field(default=0.0, ge=0, description="Cost per contacted customer.")


@dataclass(frozen=True)
class ProfitInputs:
    """Targeted treatment and matched control quantities for one campaign slice.

    `responder_revenue` is the summed basket value of treated responders the
    discount applies to; it defaults to `n_treatment * response_treatment * value_treatment`.
    """

    n_treatment: float
    n_control: float
    response_treatment: float
    response_control: float
    value_treatment: float
    value_control: float
    contact_cost: float = 0.0
    discount: float = 0.0
    responder_revenue: float | None = None

    def __post_init__(self) -> None:
        if self.n_treatment < 0 or self.n_control < 0:
            raise ProfitError("Customer counts must be non-negative.")
        for name in ("response_treatment", "response_control"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ProfitError(f"{name} must lie in [0, 1], got {getattr(self, name)}.")
        if self.value_treatment < 0 or self.value_control < 0:
            raise ProfitError("Revenue per responder must be non-negative.")
        if self.contact_cost < 0:
            raise ProfitError(f"Contact cost must be non-negative, got {self.contact_cost}.")
        if not 0.0 <= self.discount < 1.0:
            raise ProfitError(f"Discount must lie in [0, 1), got {self.discount}.")
        if self.responder_revenue is not None and self.responder_revenue < 0:
            raise ProfitError("Responder revenue must be non-negative.")

    @property
    def treatment_revenue(self) -> float:
        return self.n_treatment * self.response_treatment * self.value_treatment

    @property
    def control_revenue(self) -> float:
        return self.n_control * self.response_control * self.value_control


@dataclass(frozen=True)
class ProfitLine:
    depth: int
    targeted: float
    incremental_revenue: float
    contact_cost: float
    incentive_cost: float

    @property
    def profit(self) -> float:
        return self.incremental_revenue - self.contact_cost - self.incentive_cost


@dataclass(frozen=True)
class ProfitReport:
    lines: tuple[ProfitLine, ...]
    costs: CostModel

    @property
    def profits(self) -> np.ndarray:
        return np.array([line.profit for line in self.lines])

    @property
    def best_depth(self) -> int:
        return self.lines[int(np.argmax(self.profits))].depth

    def to_frame(self, benchmark: ProfitReport | None = None) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "decile": [line.depth for line in self.lines],
                "targeted": [line.targeted for line in self.lines],
                "incremental_revenue": [line.incremental_revenue for line in self.lines],
                "contact_cost": [line.contact_cost for line in self.lines],
                "incentive_cost": [line.incentive_cost for line in self.lines],
                "profit": self.profits,
            }
        )
        if benchmark is not None:
            frame["benchmark_profit"] = benchmark.profits
            frame["relative_gain"] = relative_gain(self, benchmark)
        return frame


def _line(depth: int, inputs: ProfitInputs) -> ProfitLine:
    incentive_base = inputs.treatment_revenue if inputs.responder_revenue is None else inputs.responder_revenue
    return ProfitLine(
        depth=depth,
        targeted=inputs.n_treatment,
        incremental_revenue=inputs.treatment_revenue - inputs.control_revenue,
        contact_cost=inputs.n_treatment * inputs.contact_cost,
        incentive_cost=inputs.discount * incentive_base,
    )


def campaign_profit(inputs: ProfitInputs | Sequence[ProfitInputs]) -> ProfitReport:
    """Incremental revenue minus contact and incentive costs, cumulated over targeting depth.

    Each element of `inputs` describes one additional slice of targeted customers;
    line d of the report covers slices 1..d.
    """
    slices = [inputs] if isinstance(inputs, ProfitInputs) else list(inputs)
    if not slices:
        raise ProfitError("At least one slice of profit inputs is required.")
    costs = {(item.discount, item.contact_cost) for item in slices}
    if len(costs) > 1:
        raise ProfitError("All slices must share the same discount and contact cost.")
    discount, contact_cost = costs.pop()

    lines: list[ProfitLine] = []
    targeted = revenue = contact = incentive = 0.0
    for depth, item in enumerate(slices, start=1):
        line = _line(depth, item)
        targeted += line.targeted
        revenue += line.incremental_revenue
        contact += line.contact_cost
        incentive += line.incentive_cost
        lines.append(ProfitLine(depth, targeted, revenue, contact, incentive))
    return ProfitReport(lines=tuple(lines), costs=CostModel(discount=discount, contact_cost=contact_cost))


def decile_inputs(table: DecileTable, costs: CostModel) -> list[ProfitInputs]:
    """One slice per bin; the control side is rescaled to the bin population."""
    slices = []
    for d in range(table.bins):
        size = float(table.sizes[d])
        n_t, n_c = float(table.n_treatment[d]), float(table.n_control[d])
        conv_t, conv_c = float(table.conversions_treatment[d]), float(table.conversions_control[d])
        sum_t, sum_c = float(table.sum_treatment[d]), float(table.sum_control[d])
        slices.append(
            ProfitInputs(
                n_treatment=size,
                n_control=size,
                response_treatment=conv_t / n_t,
                response_control=conv_c / n_c,
                value_treatment=sum_t / conv_t if conv_t else 0.0,
                value_control=sum_c / conv_c if conv_c else 0.0,
                contact_cost=costs.contact_cost,
                discount=costs.discount,
                responder_revenue=size * sum_t / n_t,
            )
        )
    return slices


def profit_report(table: DecileTable, costs: CostModel | None = None) -> ProfitReport:
    report = campaign_profit(decile_inputs(table, costs or CostModel()))
    logger.debug("Profit peaks at decile %s", report.best_depth)
    return report


def relative_gain(report: ProfitReport, benchmark: ProfitReport) -> np.ndarray:
    """Per-depth (profit - benchmark) / |benchmark|; NaN where the benchmark profit is zero."""
    if len(report.lines) != len(benchmark.lines):
        raise ProfitError("Profit reports must cover the same number of deciles.")
    base = benchmark.profits
    out = np.full(base.shape, np.nan)
    np.divide(report.profits - base, np.abs(base), out=out, where=base != 0)
    return out
