"""Execution of transition P systems under maximal parallelism.

Step semantics
--------------

Every step is selected against a frozen snapshot of the configuration:
applicability guards (polarization and left-hand-side coverage) are evaluated
on the state at time t, and all consumptions, productions, and polarization
changes commit simultaneously to form the state at time t+1.

A firing plan must satisfy four conditions:

* resource feasibility: summed consumption per region never exceeds the
  snapshot contents;
* polarization compatibility: for each membrane, all fired communication
  rules that change its polarization agree on the new value.  Rules that
  keep the polarization (beta equal to alpha) are neutral and may fire in
  the same step as one polarization change;
* weak priority: a lower-priority rule receives only objects the higher rule
  cannot use.  Concretely, whenever (r1, r2) is a priority pair and r2 fires,
  r1 must be unfireable both on the plan's residual and on the residual plus
  everything r2 consumed;
* maximality: no further rule instance can be added without breaking one of
  the above.

Non-determinism that survives these constraints is resolved by policy.  The
deterministic policy processes rules in a topological order of the priority
relation, tie-broken by declaration order, firing each rule to maximality on
the remaining objects.  The seeded-random policy draws a random linear
extension of the priority relation instead, which reproducibly explores the
alternative maximal plans of confluent systems.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Callable

from psrelief.multiset import Multiset
from psrelief.psystem import (
    ENVIRONMENT_LABEL,
    Configuration,
    DefinitionError,
    Polarization,
    PSystemDef,
    Rule,
    RuleKind,
)

DETERMINISTIC = "deterministic"
SEEDED_RANDOM = "seeded-random"


class EngineError(RuntimeError):
    """Contract violation inside the engine (an engine bug, not user error)."""


@dataclass
class FiringPlan:
    """Selected rule applications for one step: rule id -> count."""

    counts: dict[str, int] = field(default_factory=dict)

    def count(self, rule_id: str) -> int:
        return self.counts.get(rule_id, 0)

    def by_membrane(self, definition: PSystemDef) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for rid, cnt in self.counts.items():
            rule = definition.rule_by_id(rid)
            out.setdefault(rule.membrane, {})[rid] = cnt
        return out

    def __bool__(self) -> bool:
        return bool(self.counts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FiringPlan):
            return NotImplemented
        return self.counts == other.counts

    def __hash__(self):
        return hash(frozenset(self.counts.items()))


@dataclass
class RunReport:
    final: Configuration
    halted: bool
    steps: int
    output: Multiset


Observer = Callable[[int, FiringPlan, Configuration], None]


# ---------------------------------------------------------------------------
# Compiled form of a definition (per-run caches)
# ---------------------------------------------------------------------------


class _CRule:
    __slots__ = ("rule", "index", "consume", "lhs", "charging", "higher")

    def __init__(self, rule: Rule, index: int, consume: str):
        self.rule = rule
        self.index = index
        self.consume = consume  # region whose objects the rule consumes
        self.lhs = tuple(rule.lhs.items())
        self.charging = rule.changes_polarization
        self.higher: list["_CRule"] = []


class _Compiled:
    def __init__(self, definition: PSystemDef):
        definition.validate()
        self.definition = definition
        self.skin = definition.skin
        self.crules: list[_CRule] = []
        by_id: dict[str, _CRule] = {}
        for i, rule in enumerate(definition.rules):
            if rule.kind is RuleKind.SEND_IN:
                consume = definition.parent[rule.membrane]
                assert consume is not None  # skin send-in rejected by validation
            else:
                consume = rule.membrane
            cr = _CRule(rule, i, consume)
            self.crules.append(cr)
            by_id[rule.id] = cr
        self.by_id = by_id
        for hi, lo in definition.priorities:
            by_id[lo].higher.append(by_id[hi])
        # successors for topological orderings
        self.successors: dict[int, list[int]] = {cr.index: [] for cr in self.crules}
        self.n_preds: list[int] = [0] * len(self.crules)
        for hi, lo in definition.priorities:
            self.successors[by_id[hi].index].append(by_id[lo].index)
            self.n_preds[by_id[lo].index] += 1
        self.deterministic_order = self._linear_extension(rng=None)

    def _linear_extension(self, rng: random.Random | None) -> list[_CRule]:
        n_preds = list(self.n_preds)
        order: list[_CRule] = []
        if rng is None:
            ready = [i for i in range(len(self.crules)) if n_preds[i] == 0]
            heapq.heapify(ready)
            while ready:
                i = heapq.heappop(ready)
                order.append(self.crules[i])
                for j in self.successors[i]:
                    n_preds[j] -= 1
                    if n_preds[j] == 0:
                        heapq.heappush(ready, j)
        else:
            ready = sorted(i for i in range(len(self.crules)) if n_preds[i] == 0)
            while ready:
                i = ready.pop(rng.randrange(len(ready)))
                order.append(self.crules[i])
                fresh = []
                for j in self.successors[i]:
                    n_preds[j] -= 1
                    if n_preds[j] == 0:
                        fresh.append(j)
                ready.extend(sorted(fresh))
        if len(order) != len(self.crules):
            raise DefinitionError("priority relation is cyclic")
        return order


def _guard_passes(cr: _CRule, config: Configuration) -> bool:
    return config.polarizations[cr.rule.membrane] is cr.rule.alpha


def _max_applications(lhs: tuple[tuple[str, int], ...], pool: dict[str, int]) -> int:
    k = None
    for sym, need in lhs:
        have = pool.get(sym, 0)
        avail = have // need
        if avail == 0:
            return 0
        k = avail if k is None else min(k, avail)
    return k or 0


def _select(compiled: _Compiled, config: Configuration, order: list[_CRule]) -> FiringPlan:
    pools: dict[str, dict[str, int]] = {}

    def pool(label: str) -> dict[str, int]:
        p = pools.get(label)
        if p is None:
            p = dict(config.region(label).counts())
            pools[label] = p
        return p

    fired: dict[str, int] = {}
    pending_beta: dict[str, Polarization] = {}

    # Greedy to a fixed point: a later consumption can strip a higher-priority
    # rule of its resources and thereby unblock a lower one, so passes repeat
    # until nothing new fires.
    progress = True
    while progress:
        progress = False
        for cr in order:
            rule = cr.rule
            if not _guard_passes(cr, config):
                continue
            if cr.charging:
                pend = pending_beta.get(rule.membrane)
                if pend is not None and pend is not rule.beta:
                    continue
            p = pool(cr.consume)
            k = _max_applications(cr.lhs, p)
            if k == 0:
                continue
            blocked = False
            for hi in cr.higher:
                if _guard_passes(hi, config) and _max_applications(hi.lhs, pool(hi.consume)) > 0:
                    blocked = True
                    break
            if blocked:
                continue
            for sym, need in cr.lhs:
                p[sym] -= need * k
            fired[rule.id] = fired.get(rule.id, 0) + k
            if cr.charging:
                pending_beta[rule.membrane] = rule.beta
            progress = True
    return FiringPlan(counts=fired)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def applicable_rules(definition: PSystemDef, config: Configuration, label: str) -> list[str]:
    """Rule ids attached to ``label`` whose guard and left-hand side pass on
    the frozen configuration (priority and compatibility are selection-time
    concerns and are not checked here)."""
    if label not in definition.parent:
        raise DefinitionError(f"unknown membrane label {label!r}")
    out = []
    for rule in definition.rules_of(label):
        if config.polarizations[label] is not rule.alpha:
            continue
        if rule.kind is RuleKind.SEND_IN:
            source = definition.parent[label]
            region = config.region(source) if source is not None else Multiset()
        else:
            region = config.region(label)
        if region.covers(rule.lhs):
            out.append(rule.id)
    return out


def select_firing(
    definition: PSystemDef,
    config: Configuration,
    policy: str = DETERMINISTIC,
    seed: int = 0,
) -> FiringPlan:
    compiled = _Compiled(definition)
    if policy == DETERMINISTIC:
        order = compiled.deterministic_order
    elif policy == SEEDED_RANDOM:
        order = compiled._linear_extension(random.Random(seed))
    else:
        raise ValueError(f"unknown selection policy {policy!r}")
    return _select(compiled, config, order)


def apply_step(definition: PSystemDef, config: Configuration, plan: FiringPlan) -> Configuration:
    compiled = _Compiled(definition)
    return _apply(compiled, config, plan)


def _apply(compiled: _Compiled, config: Configuration, plan: FiringPlan) -> Configuration:
    definition = compiled.definition
    new_contents = dict(config.contents)
    new_env = config.environment
    touched: set[str] = set()

    def region_for_write(label: str) -> Multiset:
        nonlocal new_env
        if label == ENVIRONMENT_LABEL:
            if new_env is config.environment:
                new_env = config.environment.copy()
            return new_env
        if label not in touched:
            new_contents[label] = new_contents[label].copy()
            touched.add(label)
        return new_contents[label]

    new_pols = dict(config.polarizations)
    changed_to: dict[str, Polarization] = {}

    for rid, count in plan.counts.items():
        cr = compiled.by_id.get(rid)
        if cr is None:
            raise EngineError(f"plan names unknown rule {rid!r}")
        if count <= 0:
            raise EngineError(f"plan has non-positive count for {rid!r}")
        rule = cr.rule
        try:
            for sym, need in cr.lhs:
                region_for_write(cr.consume).remove(sym, need * count)
        except Exception as exc:
            raise EngineError(f"infeasible plan at rule {rid!r}: {exc}") from exc
        h = rule.membrane
        parent = definition.parent[h]
        outer = ENVIRONMENT_LABEL if parent is None else parent
        if rule.kind is RuleKind.EVOLUTION:
            dest_primary, dest_aux = h, None
        elif rule.kind is RuleKind.SEND_OUT:
            dest_primary, dest_aux = outer, h
        else:
            dest_primary, dest_aux = h, outer
        for sym, cnt in rule.rhs.items():
            region_for_write(dest_primary).add(sym, cnt * count)
        if rule.rhs_aux and dest_aux is not None:
            for sym, cnt in rule.rhs_aux.items():
                region_for_write(dest_aux).add(sym, cnt * count)
        if cr.charging:
            prev = changed_to.get(h)
            if prev is not None and prev is not rule.beta:
                raise EngineError(f"incompatible polarization targets for membrane {h!r}")
            changed_to[h] = rule.beta
            new_pols[h] = rule.beta

    return Configuration(
        contents=new_contents,
        polarizations=new_pols,
        environment=new_env,
        step_index=config.step_index + 1,
    )


def run(
    definition: PSystemDef,
    policy: str = DETERMINISTIC,
    seed: int = 0,
    max_steps: int = 10_000,
    observer: Observer | None = None,
) -> RunReport:
    """Iterate selection and commit until no rule is applicable or the step
    budget runs out.  Reaching ``max_steps`` is reported via ``halted=False``,
    never as an exception.

    For the seeded-random policy each step draws a fresh linear extension
    from a generator seeded with (seed, step), so a run is reproducible from
    its seed alone.
    """
    if max_steps <= 0:
        raise ValueError("max_steps must be positive")
    compiled = _Compiled(definition)
    config = Configuration.initial(definition)
    halted = False
    while config.step_index < max_steps:
        if policy == DETERMINISTIC:
            order = compiled.deterministic_order
        elif policy == SEEDED_RANDOM:
            order = compiled._linear_extension(random.Random((seed << 20) ^ config.step_index))
        else:
            raise ValueError(f"unknown selection policy {policy!r}")
        plan = _select(compiled, config, order)
        if not plan:
            halted = True
            break
        config = _apply(compiled, config, plan)
        if observer is not None:
            observer(config.step_index, plan, config)
    if definition.output == ENVIRONMENT_LABEL:
        output = config.environment.copy()
    else:
        output = config.contents[definition.output].copy()
    return RunReport(final=config, halted=halted, steps=config.step_index, output=output)
