import logging
import math
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from ...domain.exceptions import DivergenceException, PreconditionViolationException
from ...domain.models.entities import (
    DelayModel,
    EtaBound,
    LoopConfig,
    TradeoffInputs,
    TradeoffReport,
    TriggerPolicy,
)
from ...domain.models.enums import DelayKind, ExperimentKind
from ...domain.repositories import ResultRepository
from ...domain.services import delayed_loop
from ...domain.services.error_bound import joint_confidence
from ...domain.services.event_trigger import min_error_bound, offline_beats_online
from ...domain.services.gp_regression import GpModel
from ...domain.services.plant_control import lyapunov_constants, tracking_bound_offline
from ..dtos import ExperimentConfig, ResultTable, SeedRecord, ValidationSummary
from .scenario import (
    Scenario,
    build_scenario,
    constants_for,
    derive_seed,
    eta_bound_for,
    hold,
    initial_model,
    loop_config,
    resample,
    series_grid,
)

logger = logging.getLogger(__name__)

# Diverged runs carry no curves
Outcome = Tuple[SeedRecord, Optional[np.ndarray], Optional[np.ndarray]]
Job = Callable[[], Outcome]


class _Repetition:
    """Initial model of one Monte-Carlo repetition with its η bound."""

    def __init__(self, index: int, seed: int, model: GpModel, eta: EtaBound):
        self.index = index
        self.seed = seed
        self.model = model
        self.eta = eta


class ExperimentUseCases:
    """Use cases for the delay, data-set, online and trade-off experiments."""

    def __init__(
        self,
        result_repository: ResultRepository,
        default_seed: int = 0,
        default_workers: int = 1,
    ):
        self.result_repository = result_repository
        self.default_seed = default_seed
        self.default_workers = default_workers

    def run(self, config: ExperimentConfig) -> Union[ResultTable, TradeoffReport]:
        """Run the experiment named by config.kind."""
        handlers = {
            ExperimentKind.DELAY_SWEEP: self.run_delay_sweep,
            ExperimentKind.DATASET_SWEEP: self.run_dataset_sweep,
            ExperimentKind.ONLINE_TRIGGER: self.run_online_trigger,
            ExperimentKind.TRADEOFF_SWEEP: self.run_tradeoff_sweep,
        }
        return handlers[config.kind](config)

    # Validation

    def validate_config(self, config: ExperimentConfig) -> ValidationSummary:
        """Build the full scenario and check the delay bounds without simulating."""
        scenario = build_scenario(config)
        checked = self._certified_delta_bars(config)
        self._require_admissible(scenario, checked)
        if config.kind == ExperimentKind.TRADEOFF_SWEEP:
            self._require_ordered(config.online.delta_bar_1, config.online.delta_bar_2)

        xi, chi = lyapunov_constants(scenario.p_matrix, scenario.gains.q_array)
        return ValidationSummary(
            kind=config.kind,
            state_dim=scenario.plant.state_dim,
            l_f=scenario.l_f,
            delta_bar_limit=scenario.delta_bar_limit,
            p_matrix=scenario.p_matrix.tolist(),
            xi=xi,
            chi=chi,
            beta=scenario.beta,
            joint_confidence=joint_confidence(config.bound.delta, scenario.plant.dim),
            checked_delta_bars=checked,
        )

    def _certified_delta_bars(self, config: ExperimentConfig) -> List[float]:
        online = config.online
        if config.kind == ExperimentKind.ONLINE_TRIGGER:
            return sorted(set(online.delta_bars + [online.offline_delta_bar]))
        if config.kind == ExperimentKind.TRADEOFF_SWEEP:
            values = online.tradeoff_delta_bars + [
                online.offline_delta_bar,
                online.delta_bar_1,
                online.delta_bar_2,
            ]
            return sorted(set(values))
        return []

    def _require_admissible(self, scenario: Scenario, delta_bars: List[float]) -> None:
        rejected = [d for d in delta_bars if not scenario.is_admissible(d)]
        if rejected:
            raise PreconditionViolationException(
                f"Delay bounds {rejected} violate Δ̄ < 1/(2 L_f) = "
                f"{scenario.delta_bar_limit:.6f} (L_f = {scenario.l_f:.6f})"
            )

    def _require_ordered(self, delta_bar_1: float, delta_bar_2: float) -> None:
        if delta_bar_1 > delta_bar_2:
            raise PreconditionViolationException(
                f"Offline Δ̄₁={delta_bar_1} must not exceed online Δ̄₂={delta_bar_2}"
            )

    # Offline experiments

    def run_delay_sweep(self, config: ExperimentConfig) -> ResultTable:
        """Fixed N₀ model under constant delays, plus the f̂ = 0 baseline."""
        scenario = build_scenario(config)
        lc = loop_config(scenario, config)
        grid = series_grid(config.horizon, config.series_step)
        repetitions = self._repetitions(scenario, config, config.n0)
        logger.info(
            f"Delay sweep over Δ̄ = {config.delay.delta_bars} with "
            f"{len(repetitions)} repetitions"
        )

        jobs: List[Job] = []
        for rep in repetitions:
            jobs.append(self._job(lc, grid, "baseline", 0.0, rep, model=None, delay=None))
            for delta_bar in config.delay.delta_bars:
                delay = DelayModel(
                    kind=DelayKind.CONSTANT,
                    coefficient=delta_bar,
                    min_delay=min(1e-3, delta_bar),
                )
                bound = self._offline_bound(scenario, rep.eta, delta_bar)
                jobs.append(
                    self._job(lc, grid, "gp", delta_bar, rep, rep.model, delay, bound=bound)
                )

        return self._finish(config, "delta_bar", jobs)

    def run_dataset_sweep(self, config: ExperimentConfig) -> ResultTable:
        """Accuracy-delay trade-off: Δ̄ = c N₀ for a range of N₀."""
        scenario = build_scenario(config)
        lc = loop_config(scenario, config)
        grid = series_grid(config.horizon, config.series_step)
        c = config.delay.c
        logger.info(f"Data-set sweep over N₀ = {config.delay.n0_values} with c = {c}")

        jobs: List[Job] = []
        for n0 in config.delay.n0_values:
            if c > 0:
                delta_bar = c * n0
                delay = DelayModel(
                    kind=DelayKind.LINEAR,
                    coefficient=c,
                    cap=delta_bar,
                    min_delay=min(1e-3, delta_bar),
                )
            else:
                delta_bar = config.dt
                delay = DelayModel(
                    kind=DelayKind.CONSTANT, coefficient=delta_bar, min_delay=delta_bar
                )
            for rep in self._repetitions(scenario, config, n0):
                bound = self._offline_bound(scenario, rep.eta, delta_bar)
                jobs.append(
                    self._job(
                        lc, grid, "gp", float(n0), rep, rep.model, delay, bound=bound
                    )
                )

        return self._finish(config, "n0", jobs)

    def _offline_bound(
        self, scenario: Scenario, eta: EtaBound, delta_bar: float
    ) -> Optional[float]:
        if not scenario.is_admissible(delta_bar):
            return None
        return tracking_bound_offline(constants_for(scenario, eta, delta_bar))

    # Online experiments

    def run_online_trigger(self, config: ExperimentConfig) -> ResultTable:
        """Event-triggered learning with Δ = c N², compared to the offline GP."""
        scenario = build_scenario(config)
        self._require_admissible(scenario, self._certified_delta_bars(config))
        jobs = self._online_jobs(scenario, config, config.online.delta_bars)
        logger.info(
            f"Online trigger over Δ̄ = {config.online.delta_bars}, "
            f"offline Δ̄ = {config.online.offline_delta_bar}"
        )
        return self._finish(config, "delta_bar", jobs)

    def run_tradeoff_report(self, config: ExperimentConfig) -> TradeoffReport:
        """Evaluate the offline-vs-online certificate at (Δ̄₁, Δ̄₂)."""
        return self._report(build_scenario(config), config)

    def _report(self, scenario: Scenario, config: ExperimentConfig) -> TradeoffReport:
        online = config.online
        self._require_admissible(scenario, [online.delta_bar_1, online.delta_bar_2])
        self._require_ordered(online.delta_bar_1, online.delta_bar_2)
        rep = self._repetitions(scenario, config, config.n0, count=1)[0]

        report = self._tradeoff(scenario, rep.eta, online.delta_bar_1, online.delta_bar_2)
        location = self.result_repository.save_report("tradeoff_report", report)
        verdict = "offline certified" if report.offline_certified else "no certificate"
        logger.info(
            f"ē₁ = {report.e_bar_offline:.6g}, ē₂ = {report.e_bar_online:.6g}: "
            f"{verdict} ({location})"
        )
        return report

    def run_tradeoff_sweep(self, config: ExperimentConfig) -> ResultTable:
        """Certificate per Δ̄₂ plus the online/offline Monte-Carlo comparison."""
        scenario = build_scenario(config)
        online = config.online
        self._report(scenario, config)
        self._require_admissible(scenario, self._certified_delta_bars(config))
        delta_bars = [d for d in online.tradeoff_delta_bars if d >= online.offline_delta_bar]

        first = self._repetitions(scenario, config, config.n0, count=1)[0]
        for delta_bar in delta_bars:
            report = self._tradeoff(scenario, first.eta, online.offline_delta_bar, delta_bar)
            self.result_repository.save_report(f"tradeoff_report_{delta_bar:g}", report)

        jobs = self._online_jobs(scenario, config, delta_bars)
        return self._finish(config, "delta_bar", jobs)

    def _tradeoff(
        self, scenario: Scenario, eta: EtaBound, delta_bar_1: float, delta_bar_2: float
    ) -> TradeoffReport:
        bc = constants_for(scenario, eta, delta_bar_2)
        inputs = TradeoffInputs(
            delta_bar_1=delta_bar_1,
            delta_bar_2=delta_bar_2,
            eta_sup=eta.eta_sup,
            eta_inf=eta.eta_inf,
            bc=bc,
        )
        _, report = offline_beats_online(inputs)
        return report

    def _online_jobs(
        self, scenario: Scenario, config: ExperimentConfig, delta_bars: List[float]
    ) -> List[Job]:
        online = config.online
        lc = loop_config(scenario, config)
        grid = series_grid(config.horizon, config.series_step)
        offline_delay = DelayModel(
            kind=DelayKind.CONSTANT,
            coefficient=online.offline_delta_bar,
            min_delay=min(1e-3, online.offline_delta_bar),
        )

        jobs: List[Job] = []
        for rep in self._repetitions(scenario, config, config.n0):
            offline_bound = self._offline_bound(scenario, rep.eta, online.offline_delta_bar)
            jobs.append(
                self._job(
                    lc,
                    grid,
                    "offline",
                    online.offline_delta_bar,
                    rep,
                    rep.model,
                    offline_delay,
                    bound=offline_bound,
                )
            )
            for delta_bar in delta_bars:
                bc = constants_for(scenario, rep.eta, delta_bar)
                policy = TriggerPolicy(
                    e_bar=online.e_bar or min_error_bound(bc),
                    bc=bc,
                    eta_bound=rep.eta,
                    deletion=online.deletion,
                    capacity=online.capacity,
                    eta_refresh=partial(eta_bound_for, scenario),
                    refresh_every=online.eta_refresh_every,
                )
                delay = DelayModel(
                    kind=DelayKind.QUADRATIC,
                    coefficient=delta_bar / online.capacity**2,
                    cap=delta_bar,
                    min_delay=min(1e-3, delta_bar),
                )
                jobs.append(
                    self._job(
                        lc,
                        grid,
                        "online",
                        delta_bar,
                        rep,
                        rep.model,
                        delay,
                        trigger=policy,
                        bound=policy.e_bar,
                        delta_tilde=delta_bar - online.offline_delta_bar,
                    )
                )
        return jobs

    # Monte-Carlo plumbing

    def _seed(self, config: ExperimentConfig) -> int:
        return self.default_seed if config.seed is None else config.seed

    def _workers(self, config: ExperimentConfig) -> int:
        return self.default_workers if config.workers is None else config.workers

    def _repetitions(
        self,
        scenario: Scenario,
        config: ExperimentConfig,
        n0: int,
        count: Optional[int] = None,
    ) -> List[_Repetition]:
        master = self._seed(config)

        def build(index: int) -> _Repetition:
            seed = derive_seed(master, index)
            rng = np.random.default_rng(seed)
            model = initial_model(scenario, n0, rng, config.initial_layout)
            return _Repetition(index, seed, model, eta_bound_for(scenario, model))

        indices = range(config.repetitions if count is None else count)
        return self._map(build, list(indices), self._workers(config))

    def _job(
        self,
        lc: LoopConfig,
        grid: np.ndarray,
        series: str,
        sweep_value: float,
        rep: _Repetition,
        model: Optional[GpModel],
        delay: Optional[DelayModel],
        trigger: Optional[TriggerPolicy] = None,
        bound: Optional[float] = None,
        delta_tilde: Optional[float] = None,
    ) -> Job:
        def job() -> Outcome:
            record = SeedRecord(
                series=series,
                sweep_value=sweep_value,
                repetition=rep.index,
                seed=rep.seed,
                max_error=math.inf,
                bound=bound,
                delta_tilde=delta_tilde,
                diverged=True,
            )
            try:
                trace = delayed_loop.run(lc, model, delay, trigger, seed=rep.seed)
            except DivergenceException as exc:
                logger.warning(
                    f"{series} {sweep_value:g} rep {rep.index} diverged at "
                    f"t={exc.time:.4f}"
                )
                return record, None, None

            record = record.model_copy(
                update={
                    "max_error": trace.max_error,
                    "diverged": False,
                    "evaluated": trace.evaluated_count,
                    "selected": trace.selected_count,
                    "final_data_size": trace.final_data_size,
                }
            )
            logger.debug(
                f"{series} {sweep_value:g} rep {rep.index}: max ‖e‖ = {record.max_error:.6g}"
            )
            errors = resample(trace.times, trace.error_norms, grid)
            return record, errors, hold(trace.data_size_history, grid)

        return job

    def _map(self, fn: Callable, items: List, workers: int) -> List:
        if workers <= 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(fn, items))

    def _finish(
        self, config: ExperimentConfig, sweep_variable: str, jobs: List[Job]
    ) -> ResultTable:
        outcomes: List[Outcome] = self._map(lambda job: job(), jobs, self._workers(config))
        records = [record for record, _, _ in outcomes]
        if all(record.diverged for record in records):
            raise DivergenceException(f"Every run of {config.kind.value} diverged")
        table = ResultTable.from_records(config.kind, sweep_variable, records)

        name = config.kind.value
        self.result_repository.save_table(f"{name}_seeds", table.seed_rows())
        self.result_repository.save_table(f"{name}_summary", table.summary_rows())
        self._save_series(name, config, outcomes)

        for summary in table.summaries:
            message = (
                f"{summary.series} {sweep_variable}={summary.sweep_value:g}: max ‖e‖ "
                f"mean {summary.mean_max_error:.4g} "
                f"[{summary.min_max_error:.4g}, {summary.max_max_error:.4g}]"
            )
            if summary.bound is not None:
                message += (
                    f", bound {summary.bound:.4g} "
                    f"(held in {summary.within_bound_fraction:.0%})"
                )
            if summary.evaluated:
                message += f", selected {summary.selected} of {summary.evaluated}"
            if summary.diverged:
                message += f", {summary.diverged} of {summary.count} diverged"
            logger.info(message)
        return table

    def _save_series(
        self, name: str, config: ExperimentConfig, outcomes: List[Outcome]
    ) -> None:
        grid = series_grid(config.horizon, config.series_step)
        groups: Dict[Tuple[str, float], List[Outcome]] = {}
        for outcome in sorted(outcomes, key=lambda item: item[0].sort_key):
            record = outcome[0]
            groups.setdefault((record.series, record.sweep_value), []).append(outcome)
        for (series, value), group in groups.items():
            finished = [outcome for outcome in group if outcome[1] is not None]
            if not finished:
                continue
            stacked = np.vstack([errors for _, errors, _ in finished])
            columns = {
                "t": grid,
                "mean": stacked.mean(axis=0),
                "min": stacked.min(axis=0),
                "max": stacked.max(axis=0),
            }
            if any(record.evaluated for record, _, _ in finished):
                sizes = np.vstack([size for _, _, size in finished])
                columns["data_size"] = sizes.mean(axis=0)
            self.result_repository.save_series(f"{name}_series_{series}_{value:g}", columns)
