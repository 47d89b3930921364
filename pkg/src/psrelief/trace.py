"""Run instrumentation: stable trace records, iteration trajectories, and
stage profiles for generated systems.

Trace format (one record per line, stable for golden tests):

    step=<n> membrane=<label> rule=<id> count=<k>
    polarization <label> <0|+|->

Rule lines of a step are ordered by membrane label and rule declaration
order; polarization lines report every membrane whose charge changed in that
step, sorted by label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO

from psrelief.builder import GeneratedSystem
from psrelief.engine import FiringPlan, RunReport, run
from psrelief.psystem import Configuration, PSystemDef

INIT_STAGE = "initialization"
UPDATE_STAGE = "update"
COMPARE_STAGE = "comparison"

#: Families that run asynchronously to the three stages (step-size counter
#: plumbing and cleanup); they never define the stage of a step.
_UNSTAGED = {"2.68", "2.69", "2.70", "2.71", "2.72", "2.73", "2.74",
             "2.75", "2.76", "2.77", "2.78", "4.1"}


class TraceWriter:
    """Observer that appends trace records for every applied step."""

    def __init__(self, definition: PSystemDef, sink: IO[str]):
        self._definition = definition
        self._sink = sink
        self._decl_index = {r.id: i for i, r in enumerate(definition.rules)}
        self._membrane = {r.id: r.membrane for r in definition.rules}
        self._last_pols = {lab: pol for lab, pol in Configuration.initial(definition).polarizations.items()}

    def __call__(self, step: int, plan: FiringPlan, config: Configuration) -> None:
        records = sorted(
            plan.counts.items(),
            key=lambda item: (self._membrane[item[0]], self._decl_index[item[0]]),
        )
        for rid, count in records:
            self._sink.write(f"step={step} membrane={self._membrane[rid]} rule={rid} count={count}\n")
        for lab in sorted(config.polarizations):
            pol = config.polarizations[lab]
            if pol is not self._last_pols[lab]:
                self._sink.write(f"polarization {lab} {pol.value}\n")
                self._last_pols[lab] = pol


@dataclass
class IterationProfile:
    index: int
    initialization: int = 0
    update: int = 0
    comparison: int = 0

    def total(self) -> int:
        return self.initialization + self.update + self.comparison


@dataclass
class GeneratedRun:
    """Result of an instrumented engine run of a generated system."""

    report: RunReport
    q_trajectory: list[list[list[int]]]  # per iteration, m x n counts (incl. start)
    profiles: list[IterationProfile]
    halted: bool = field(init=False)

    def __post_init__(self):
        self.halted = self.report.halted


class _IterationLimit(Exception):
    pass


class _Recorder:
    def __init__(self, gen: GeneratedSystem, max_iterations: int):
        self.gen = gen
        self.max_iterations = max_iterations
        self.boundary_rules = set(gen.rule_index["3.26"])
        self.q_trajectory: list[list[list[int]]] = []
        self.profiles: list[IterationProfile] = []
        self.last_config: Configuration | None = None
        self._current = IterationProfile(index=0)
        self._stage_rank = {INIT_STAGE: 0, UPDATE_STAGE: 1, COMPARE_STAGE: 2}

    def _step_stage(self, plan: FiringPlan) -> str | None:
        best = None
        for rid in plan.counts:
            family = self.gen.family_of[rid]
            if family in _UNSTAGED:
                continue
            stage = {"1": INIT_STAGE, "2": UPDATE_STAGE, "3": COMPARE_STAGE}[family.split(".")[0]]
            if best is None or self._stage_rank[stage] < self._stage_rank[best]:
                best = stage
        return best

    def _read_init_counts(self, config: Configuration) -> list[list[int]]:
        init = config.contents["INIT"]
        return [
            [init.count(self.gen.symbol_index[("x", k, l)]) for l in range(1, self.gen.n + 1)]
            for k in range(1, self.gen.m + 1)
        ]

    def __call__(self, step: int, plan: FiringPlan, config: Configuration) -> None:
        self.last_config = config
        stage = self._step_stage(plan)
        if stage == INIT_STAGE:
            self._current.initialization += 1
        elif stage == UPDATE_STAGE:
            self._current.update += 1
        elif stage == COMPARE_STAGE:
            self._current.comparison += 1
        else:
            # counter or cleanup activity only; attribute to the stage the
            # iteration is currently in (trailing cleanup is comparison)
            if self._current.comparison:
                self._current.comparison += 1
            elif self._current.update:
                self._current.update += 1
            elif self._current.initialization:
                self._current.initialization += 1
        if not self.boundary_rules.isdisjoint(plan.counts):
            self.q_trajectory.append(self._read_init_counts(config))
            self.profiles.append(self._current)
            self._current = IterationProfile(index=self._current.index + 1)
            if len(self.q_trajectory) >= self.max_iterations:
                raise _IterationLimit()

    def finish(self, report: RunReport) -> None:
        if report.halted:
            output = report.final.contents["OUTPUT"]
            final = [
                [output.count(self.gen.symbol_index[("o", k, l)]) for l in range(1, self.gen.n + 1)]
                for k in range(1, self.gen.m + 1)
            ]
            self.q_trajectory.append(final)
            if self._current.total():
                self.profiles.append(self._current)


def run_generated(
    gen: GeneratedSystem,
    max_iterations: int,
    extra_observer=None,
    policy: str = "deterministic",
    seed: int = 0,
) -> GeneratedRun:
    """Run a generated system for at most ``max_iterations`` rounds of the
    seed/update/compare loop, recording the per-iteration flow counts.

    The returned trajectory starts with the initial counts and, when the run
    halts, ends with the counts decoded from OUTPUT.  A run cut off at the
    iteration limit reports ``halted=False``.
    """
    from psrelief.relief import quantized_halvings

    recorder = _Recorder(gen, max_iterations)
    start = recorder._read_init_counts(Configuration.initial(gen.definition))

    def observer(step: int, plan: FiringPlan, config: Configuration) -> None:
        recorder(step, plan, config)
        if extra_observer is not None:
            extra_observer(step, plan, config)

    # an iteration takes 3 + (9 + halvings) + 6 steps (7 on the last one),
    # plus a short tail; the recorder stops the run at the iteration limit
    budget = max_iterations * (19 + quantized_halvings(max_iterations)) + 100
    try:
        report = run(gen.definition, policy=policy, seed=seed, max_steps=budget, observer=observer)
    except _IterationLimit:
        final = recorder.last_config
        report = RunReport(
            final=final,
            halted=False,
            steps=final.step_index,
            output=final.contents[gen.definition.output].copy(),
        )
    recorder.finish(report)
    trajectory = [start] + recorder.q_trajectory
    return GeneratedRun(report=report, q_trajectory=trajectory, profiles=recorder.profiles)
