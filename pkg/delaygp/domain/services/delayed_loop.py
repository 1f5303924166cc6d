"""Fixed-step closed loop with zero-order-hold compensation on a delay schedule.

Evaluations start back to back: evaluation k reads x(t_k) at t_k and its
prediction becomes the held compensation at t_{k+1} = t_k + Δ(t_k). Before
t_1 the compensation is zero. Integration steps are split so that every
schedule time is hit exactly.
"""

import logging
from typing import List, Optional

import numpy as np

from ..exceptions import DivergenceException, InvalidArgumentException
from ..models.entities import (
    ControllerGains,
    DelayModel,
    DelaySchedule,
    LoopConfig,
    PlantSpec,
    Reference,
    ScheduleEvent,
    SimTrace,
    TriggerEvent,
    TriggerPolicy,
)
from .error_bound import eta_at
from .event_trigger import (
    apply_deletion,
    refresh_policy,
    should_update,
    strategy_for,
    threshold,
)
from .gp_regression import GpModel
from .plant_control import closed_loop_derivative

logger = logging.getLogger(__name__)

TIME_EPS = 1e-12


def kappa(schedule: DelaySchedule, t: float) -> int:
    """Largest k with t_{k+1} < t, or −1 before the first commit."""
    if t < 0:
        raise InvalidArgumentException("κ(t) is defined for t ≥ 0")
    later = np.asarray(schedule.eval_times[1:], dtype=float)
    return int(np.searchsorted(later, t, side="left")) - 1


def step(
    state: np.ndarray,
    t: float,
    dt: float,
    f_hat_held: np.ndarray,
    plant: PlantSpec,
    ref: Reference,
    gains: ControllerGains,
    guard_box: Optional[np.ndarray] = None,
    lambda_row: Optional[np.ndarray] = None,
) -> np.ndarray:
    """One classical RK4 step with the compensation held constant."""
    if dt <= 0:
        raise InvalidArgumentException("dt must be positive")
    row = gains.lambda_row if lambda_row is None else lambda_row

    def rhs(time: float, x: np.ndarray) -> np.ndarray:
        return closed_loop_derivative(time, x, ref, f_hat_held, gains, plant, row)

    k1 = rhs(t, state)
    k2 = rhs(t + dt / 2, state + dt / 2 * k1)
    k3 = rhs(t + dt / 2, state + dt / 2 * k2)
    k4 = rhs(t + dt, state + dt * k3)
    next_state = state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    box = guard_box if guard_box is not None else _guard(plant.box, 2.0)
    if not np.all(np.isfinite(next_state)) or np.any(next_state < box[:, 0]) or np.any(
        next_state > box[:, 1]
    ):
        raise DivergenceException(
            f"State {next_state.tolist()} left the guard box at t={t + dt:.6f}",
            time=t + dt,
            state=next_state.tolist(),
        )
    return next_state


def _guard(box: np.ndarray, factor: float) -> np.ndarray:
    center = box.mean(axis=1)
    half = (box[:, 1] - box[:, 0]) / 2.0 * factor
    return np.column_stack([center - half, center + half])


class _Recorder:
    def __init__(self, config: LoopConfig):
        self.config = config
        self.times: List[float] = []
        self.states: List[np.ndarray] = []
        self.references: List[np.ndarray] = []
        self.compensation: List[np.ndarray] = []

    def record(self, t: float, x: np.ndarray, f_hat: np.ndarray) -> None:
        self.times.append(t)
        self.states.append(x.copy())
        self.references.append(self.config.reference.state(t))
        self.compensation.append(f_hat.copy())

    def trace(
        self,
        schedule: List[ScheduleEvent],
        trigger_events: List[TriggerEvent],
        hypothesis: str,
    ) -> SimTrace:
        states = np.array(self.states)
        references = np.array(self.references)
        return SimTrace(
            times=np.array(self.times),
            states=states,
            references=references,
            error_norms=np.linalg.norm(states - references, axis=1),
            compensation=np.array(self.compensation),
            schedule=schedule,
            trigger_events=trigger_events,
            initial_hypothesis=hypothesis,
        )


def run(
    config: LoopConfig,
    model: Optional[GpModel],
    delay: Optional[DelayModel],
    trigger: Optional[TriggerPolicy] = None,
    seed: int = 0,
) -> SimTrace:
    """Simulate the closed loop; model=None is the uncompensated baseline."""
    if model is not None and delay is None:
        raise InvalidArgumentException("A delay model is required with a GP model")
    if trigger is not None and model is None:
        raise InvalidArgumentException("Event-triggered runs need an initial model")

    rng = np.random.default_rng(seed)
    plant, ref, gains = config.plant, config.reference, config.gains
    lambda_row = gains.lambda_row
    guard_box = config.guard_box
    noise_std = np.asarray(config.noise_std, dtype=float)
    strategy = strategy_for(trigger) if trigger is not None else None
    policy = trigger
    added_since_refresh = 0

    x = config.x0
    t = 0.0
    initial_error = float(np.linalg.norm(x - ref.state(0.0)))
    if initial_error == 0.0:
        hypothesis = "zero-initial-error"
    elif trigger is None:
        hypothesis = "nonzero-initial-error"
    elif initial_error <= trigger.e_bar:
        hypothesis = "initial-error-within-bound"
    else:
        hypothesis = "initial-error-outside-bound"

    f_hat = np.zeros(plant.dim)
    recorder = _Recorder(config)
    recorder.record(t, x, f_hat)
    schedule: List[ScheduleEvent] = []
    trigger_events: List[TriggerEvent] = []

    next_eval = 0.0 if model is not None else np.inf
    pending: Optional[np.ndarray] = None
    pending_model: Optional[GpModel] = None
    if model is not None:
        logger.info(
            "Compensation is zero until the first prediction commits at t_1 = Δ(t_0)"
        )

    grid_index = 0
    horizon = config.horizon
    while t < horizon - TIME_EPS:
        if t >= next_eval - TIME_EPS:
            t = max(t, next_eval)
            if pending is not None:
                f_hat = pending
                model = pending_model

            error_norm = float(np.linalg.norm(x - ref.state(t)))
            active = model
            if policy is not None:
                eta_norm = eta_at(active, x, policy.eta_bound)
                upsilon = threshold(t, error_norm, policy)
                fired = should_update(eta_norm, upsilon)
                added = False
                if fired and plant.contains(x):
                    measurement = plant.f(x) + rng.normal(0.0, noise_std)
                    active = apply_deletion(active, policy, strategy).add_sample(
                        x, measurement
                    )
                    added = True
                    added_since_refresh += 1
                elif fired:
                    logger.warning(f"Trigger fired outside X at t={t:.4f}, sample skipped")
                trigger_events.append(
                    TriggerEvent(
                        time=t,
                        eta_norm=eta_norm,
                        upsilon=upsilon,
                        error_norm=error_norm,
                        triggered=fired,
                        added=added,
                        data_size=active.size,
                    )
                )
                if policy.refresh_every and added_since_refresh >= policy.refresh_every:
                    policy = refresh_policy(policy, policy.eta_refresh(active))
                    added_since_refresh = 0

            mean, _ = active.posterior(x)
            delta = delay.evaluate(active.size)
            schedule.append(
                ScheduleEvent(
                    index=len(schedule),
                    start_time=t,
                    commit_time=t + delta,
                    data_size=active.size,
                    state=x.tolist(),
                    prediction=mean.tolist(),
                )
            )
            pending, pending_model = mean, active
            next_eval = t + delta

        next_grid = (grid_index + 1) * config.dt
        target = min(next_grid, next_eval, horizon)
        x = step(x, t, target - t, f_hat, plant, ref, gains, guard_box, lambda_row)
        t = target
        if abs(t - next_grid) <= TIME_EPS:
            grid_index += 1
        recorder.record(t, x, f_hat)

    return recorder.trace(schedule, trigger_events, hypothesis)
