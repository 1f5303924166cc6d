"""Event-triggered model updates, data deletion and the offline/online certificate."""

import logging
from abc import ABC, abstractmethod
from typing import Optional, Tuple

import numpy as np

from ..exceptions import PreconditionViolationException
from ..models.entities import (
    BoundConstants,
    EtaBound,
    TradeoffInputs,
    TradeoffReport,
    TriggerPolicy,
)
from ..models.enums import DeletionKind
from .gp_regression import GpModel

logger = logging.getLogger(__name__)


class DeletionStrategy(ABC):
    """Chooses which training sample to evict when the model is full."""

    @abstractmethod
    def select(self, model: GpModel) -> int:
        """Get the index of the sample to delete."""
        pass


class OldestFirstDeletion(DeletionStrategy):
    """Evict the earliest added sample."""

    def select(self, model: GpModel) -> int:
        return 0


class NoDeletion(DeletionStrategy):
    """Never evict; the caller keeps the model unchanged."""

    def select(self, model: GpModel) -> int:
        return -1


class RandomDeletion(DeletionStrategy):
    """Evict a uniformly random sample from a seeded stream."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def select(self, model: GpModel) -> int:
        return int(self.rng.integers(model.size))


def strategy_for(policy: TriggerPolicy) -> DeletionStrategy:
    """Get the deletion strategy object of a policy."""
    if policy.deletion == DeletionKind.CUSTOM:
        return policy.strategy
    if policy.deletion == DeletionKind.NONE:
        return NoDeletion()
    return OldestFirstDeletion()


def min_error_bound(bc: BoundConstants) -> float:
    """ē₂ = 2χ(F + F_d + ξ L_f F) Δ̄ + χ ξ η̲_δ."""
    if bc.l_f > 0 and bc.delta_bar >= 1.0 / (2.0 * bc.l_f):
        raise PreconditionViolationException(
            f"Δ̄={bc.delta_bar} violates Δ̄ < 1/(2 L_f)"
        )
    slope = bc.f_const + bc.f_d + bc.xi * bc.l_f * bc.f_const
    return 2.0 * bc.chi * slope * bc.delta_bar + bc.chi * bc.xi * bc.eta_inf


def threshold(t_k: float, e_norm: float, policy: TriggerPolicy) -> float:
    """υ = ξ⁻¹ max(‖e(t_k)‖, χ⁻¹ ē) − 2(ξ⁻¹(F + F_d) + L_f F) Δ̄."""
    bc = policy.bc
    reach = max(e_norm, policy.e_bar / bc.chi) / bc.xi
    drift = 2.0 * ((bc.f_const + bc.f_d) / bc.xi + bc.l_f * bc.f_const) * bc.delta_bar
    return reach - drift


def should_update(eta_norm: float, upsilon: float) -> bool:
    """Fire when ‖η_δ(x(t_k))‖ ≥ υ; a nonpositive υ always fires."""
    return upsilon <= 0 or eta_norm >= upsilon


def apply_deletion(
    model: GpModel,
    policy: TriggerPolicy,
    strategy: Optional[DeletionStrategy] = None,
) -> GpModel:
    """Evict samples until one more fits below the capacity N̄."""
    if policy.deletion == DeletionKind.NONE:
        return model
    strategy = strategy or strategy_for(policy)
    while model.size >= policy.capacity:
        index = strategy.select(model)
        logger.debug(f"Deleting sample {index} of {model.size}")
        model = model.delete_sample(index)
    return model


def refresh_policy(policy: TriggerPolicy, eta: EtaBound) -> TriggerPolicy:
    """Widen the policy's η bound with the bound of the current model.

    γ and the η extrema only grow, and F follows η̄. The desired ē is kept;
    a warning is logged when it drops below the new minimal bound.
    """
    current = policy.eta_bound
    widened = EtaBound(
        beta=current.beta,
        gamma_per_dim=np.maximum(current.gamma, eta.gamma).tolist(),
        eta_sup=max(current.eta_sup, eta.eta_sup),
        eta_inf=max(current.eta_inf, eta.eta_inf),
    )
    bc = policy.bc
    growth = (widened.eta_sup - bc.eta_sup) / (1.0 - 2.0 * bc.l_f * bc.delta_bar)
    bc = bc.model_copy(
        update={
            "eta_sup": widened.eta_sup,
            "eta_inf": widened.eta_inf,
            "f_const": bc.f_const + max(growth, 0.0),
        }
    )
    minimum = min_error_bound(bc)
    if minimum > policy.e_bar:
        logger.warning(
            f"Refreshed η bound raises the minimal bound to {minimum:.6g}, "
            f"above ē={policy.e_bar:.6g}"
        )
    return policy.model_copy(update={"eta_bound": widened, "bc": bc})


def offline_bound(bc: BoundConstants, delta_bar_1: float, eta_sup: float) -> float:
    """ē₁ = χ ξ (2 L_f F Δ̄₁ + η̄_δ) with the common F of the comparison."""
    return bc.chi * bc.xi * (2.0 * bc.l_f * bc.f_const * delta_bar_1 + eta_sup)


def offline_beats_online(ti: TradeoffInputs) -> Tuple[bool, TradeoffReport]:
    """Check whether the offline model is certified to track at least as well."""
    bc = ti.bc
    drift = bc.f_const + bc.f_d
    first_rhs = bc.xi * ti.eta_tilde / (2.0 * drift)
    second_rhs = (bc.xi * ti.eta_tilde - 2.0 * drift * ti.delta_bar_1) / (
        2.0 * (bc.xi * bc.l_f * bc.f_const + drift)
    )
    first_holds = ti.delta_bar_2 >= first_rhs
    second_holds = ti.delta_tilde >= second_rhs

    online_bc = bc.model_copy(update={"delta_bar": ti.delta_bar_2, "eta_inf": ti.eta_inf})
    report = TradeoffReport(
        offline_certified=first_holds or second_holds,
        e_bar_offline=offline_bound(bc, ti.delta_bar_1, ti.eta_sup),
        e_bar_online=min_error_bound(online_bc),
        delta_bar_1=ti.delta_bar_1,
        delta_bar_2=ti.delta_bar_2,
        delta_tilde=ti.delta_tilde,
        eta_tilde=ti.eta_tilde,
        first_lhs=ti.delta_bar_2,
        first_rhs=first_rhs,
        first_holds=first_holds,
        second_lhs=ti.delta_tilde,
        second_rhs=second_rhs,
        second_holds=second_holds,
    )
    return report.offline_certified, report
