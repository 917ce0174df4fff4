"""Clearing the regression market.

A central agent (the data buyer) regresses its in-window values on lagged
features from itself and from support agents (the sellers). Each seller
attaches a reservation price ``u`` to every feature it offers; clearing
converts that reservation into the feature's lasso penalty ``(T/2) * u``,
fits the weighted lasso, and pays the seller ``|u * coefficient|`` per
feature. Because the buyer's own features are never penalized, the cleared
loss plus total payments can never exceed the buyer's own-features baseline
loss, so a correct solve is always viable for the buyer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ViabilityError
from .regression import (
    DesignMatrix,
    LossReport,
    SolverSettings,
    mse,
    ols_fit,
    weighted_lasso_fit,
)
from .timeseries import LagSpec, build_lag_matrix

__all__ = [
    "ReservationSchedule",
    "MarketConfig",
    "PaymentRecord",
    "MarketOutcome",
    "ViabilityCheck",
    "VIABILITY_TOLERANCE",
    "penalties_from_reservations",
    "clear_market",
    "verify_buyer_viability",
]

# Slack allowed in the buyer-viability inequality; the inequality is exact at
# an exact optimum, so this only absorbs finite solver tolerance.
VIABILITY_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ReservationSchedule:
    """Per-feature reservation prices: (agent_id, lag) -> u >= 0.

    Features missing from the schedule are offered for free (u = 0).
    """

    entries: dict

    def __post_init__(self):
        entries = {}
        for key, u in dict(self.entries).items():
            agent_id, lag = key
            if not isinstance(lag, int) or lag < 1:
                raise InvalidInputError(f"lag must be a positive integer, got {lag!r}")
            u = float(u)
            if not np.isfinite(u) or u < 0:
                raise InvalidInputError(
                    f"reservation for {key!r} must be finite and nonnegative, got {u}"
                )
            entries[(agent_id, lag)] = u
        object.__setattr__(self, "entries", entries)

    @classmethod
    def uniform(cls, agent_ids, max_lag: int, u: float) -> "ReservationSchedule":
        """Same reservation ``u`` on every lag of every listed agent."""
        return cls(
            {(agent_id, lag): u for agent_id in agent_ids for lag in range(1, max_lag + 1)}
        )

    def get(self, agent_id, lag: int) -> float:
        return self.entries.get((agent_id, lag), 0.0)

    def replacing(self, agent_id, max_lag: int, u: float) -> "ReservationSchedule":
        """Copy of the schedule with one agent's reservations set to ``u`` on all lags."""
        entries = dict(self.entries)
        for lag in range(1, max_lag + 1):
            entries[(agent_id, lag)] = u
        return ReservationSchedule(entries)


@dataclass(frozen=True)
class MarketConfig:
    """Who buys, who sells, and how the clearing regression is run."""

    central_agent: str
    support_agents: tuple
    lag_spec: LagSpec
    solver: SolverSettings = field(default_factory=SolverSettings)
    loss_scale: float = 1.0

    def __post_init__(self):
        supports = tuple(self.support_agents)
        if self.central_agent in supports:
            raise InvalidInputError(
                f"central agent {self.central_agent!r} cannot also be a support agent"
            )
        if len(set(supports)) != len(supports):
            raise InvalidInputError("duplicate support agent ids")
        if self.loss_scale != 1.0:
            raise InvalidInputError("loss_scale is fixed at 1")
        object.__setattr__(self, "support_agents", supports)


@dataclass(frozen=True)
class PaymentRecord:
    """What one support feature earned in a clearing: |reservation * coefficient|."""

    agent_id: str
    lag: int
    coefficient: float
    reservation: float
    amount: float


@dataclass(frozen=True)
class ViabilityCheck:
    """Recomputed buyer-viability inequality with both sides attached."""

    holds: bool
    market_mse: float
    total_payments: float
    baseline_mse: float
    gap: float
    tolerance: float

    def __bool__(self) -> bool:
        return self.holds


@dataclass(frozen=True)
class MarketOutcome:
    """Everything a clearing produced, plus the raw inputs needed to audit it."""

    config: MarketConfig
    baseline_beta: np.ndarray
    market_beta: np.ndarray
    baseline_loss: LossReport
    market_loss: LossReport
    payments: tuple
    buyer_net_gain: float
    viability: bool
    design_self: DesignMatrix
    design_all: DesignMatrix
    target: np.ndarray
    penalties: np.ndarray
    reservations: ReservationSchedule

    @property
    def total_payments(self) -> float:
        return sum(record.amount for record in self.payments)


def penalties_from_reservations(
    config: MarketConfig, reservations: ReservationSchedule, design: DesignMatrix
) -> np.ndarray:
    """Convert reservation prices into the per-column penalty vector.

    A support feature sold at reservation ``u`` is penalized by ``(T/2) * u``;
    the intercept and every column belonging to the central agent stay at
    zero so the buyer's own information is never shrunk.
    """
    expected = {config.central_agent, *config.support_agents}
    present = {agent for _, agent, _ in design.feature_columns()}
    if present != expected:
        raise InvalidInputError(
            f"design covers agents {sorted(map(str, present))}, "
            f"config needs {sorted(map(str, expected))}"
        )
    feature_index = {
        (agent, lag): j for j, agent, lag in design.feature_columns()
    }
    for agent_id, lag in reservations.entries:
        if agent_id == config.central_agent:
            if reservations.entries[(agent_id, lag)] != 0.0:
                raise InvalidInputError(
                    f"central agent {agent_id!r} cannot sell its own features"
                )
            continue
        if (agent_id, lag) not in feature_index:
            raise InvalidInputError(
                f"reservation for agent {agent_id!r} lag {lag} has no design column"
            )

    half_T = design.n_rows / 2.0
    penalties = np.zeros(design.n_cols)
    for j, agent_id, lag in design.feature_columns():
        if agent_id != config.central_agent:
            penalties[j] = half_T * reservations.get(agent_id, lag)
    return penalties


def clear_market(config: MarketConfig, all_series, reservations: ReservationSchedule) -> MarketOutcome:
    """Run one clearing: baseline fit, weighted-lasso fit, payments, viability.

    The baseline is the buyer's own-features least-squares fit; the market
    fit uses every agent's features with reservation-derived penalties. Each
    support feature with cleared coefficient ``b`` and reservation ``u`` is
    paid ``|u * b|``, which sums exactly to the fitted penalty term.

    Raises :class:`ViabilityError` if the cleared loss plus payments exceeds
    the baseline loss beyond solver slack, which a correct solve cannot do.
    """
    by_id = {}
    for series in all_series:
        if series.agent_id in by_id:
            raise InvalidInputError(f"duplicate series for agent {series.agent_id!r}")
        by_id[series.agent_id] = series
    missing = [a for a in (config.central_agent, *config.support_agents) if a not in by_id]
    if missing:
        raise InvalidInputError(f"no series provided for agents {missing}")

    spec = config.lag_spec
    central = by_id[config.central_agent]
    supports = [by_id[a] for a in config.support_agents]
    target = central.window(spec.window_length)

    design_self = build_lag_matrix([central], spec)
    baseline_beta = ols_fit(design_self, target)
    baseline_mse = mse(design_self, baseline_beta, target)
    baseline_loss = LossReport(mse=baseline_mse, penalty_term=0.0, lasso_loss=baseline_mse)

    design_all = build_lag_matrix([central, *supports], spec)
    penalties = penalties_from_reservations(config, reservations, design_all)
    market_beta = weighted_lasso_fit(design_all, target, penalties, config.solver)

    payments = []
    for agent in config.support_agents:
        for lag in range(1, spec.max_lag + 1):
            column = design_all.column_of(agent, lag)
            coefficient = float(market_beta[column])
            reservation = reservations.get(agent, lag)
            payments.append(
                PaymentRecord(
                    agent_id=agent,
                    lag=lag,
                    coefficient=coefficient,
                    reservation=reservation,
                    amount=abs(reservation * coefficient),
                )
            )
    total_payments = sum(record.amount for record in payments)

    market_mse = mse(design_all, market_beta, target)
    market_loss = LossReport(
        mse=market_mse,
        penalty_term=total_payments,
        lasso_loss=market_mse + total_payments,
    )
    buyer_net_gain = baseline_mse - market_mse - total_payments
    viability = market_loss.lasso_loss <= baseline_mse + VIABILITY_TOLERANCE
    if not viability:
        raise ViabilityError(
            "clearing lost the buyer money "
            f"(loss plus payments {market_loss.lasso_loss:.9g} vs baseline {baseline_mse:.9g}); "
            "this indicates a solver defect",
            market_side=market_loss.lasso_loss,
            baseline_side=baseline_mse,
        )

    return MarketOutcome(
        config=config,
        baseline_beta=baseline_beta,
        market_beta=market_beta,
        baseline_loss=baseline_loss,
        market_loss=market_loss,
        payments=tuple(payments),
        buyer_net_gain=buyer_net_gain,
        viability=viability,
        design_self=design_self,
        design_all=design_all,
        target=target,
        penalties=penalties,
        reservations=reservations,
    )


def verify_buyer_viability(outcome: MarketOutcome, tolerance: float = VIABILITY_TOLERANCE) -> ViabilityCheck:
    """Re-check buyer viability from the outcome's raw matrices.

    Both squared-error sides are recomputed from the stored designs, targets
    and coefficient vectors rather than trusting the cached loss reports;
    payments are taken from the payment records. Returns the inequality
    verdict with both sides and their gap, never raising.
    """
    market_mse = mse(outcome.design_all, outcome.market_beta, outcome.target)
    baseline_mse = mse(outcome.design_self, outcome.baseline_beta, outcome.target)
    total_payments = sum(record.amount for record in outcome.payments)
    market_side = market_mse + total_payments
    gap = market_side - baseline_mse
    return ViabilityCheck(
        holds=gap <= tolerance,
        market_mse=market_mse,
        total_payments=total_payments,
        baseline_mse=baseline_mse,
        gap=gap,
        tolerance=tolerance,
    )
