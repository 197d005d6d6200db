"""The SWITCH-family attack state machine and its baselines.

Variants:
  switch      probe the surrogate step, fall back to its mirror, and when
              both fail take the better of the two;
  switch_rgf  as above, but when both directions fail estimate a gradient
              with q random finite differences and follow it;
  no_switch   plain PGD along the surrogate direction, one query/iteration;
  rgf         gradient estimation from scratch every iteration (baseline).

Per-iteration query costs are fixed by branch: accept_forward 1,
switch_accepted / pick_better_of_two 2, rgf_fallback q+3, rgf_step q+1.
Success is checked on every queried point and the first adversarial
queried point is returned immediately (it is feasible by construction).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import List, Literal, Optional

import numpy as np

from .errors import BudgetExhausted, ConfigError, OracleFailure, ZeroGradient
from .oracles import QueryLedger, query_loss
from .objectives import AttackGoal, LossName
from .tensors import box_clamp, clip_epsilon, l2_norm, lp_normalize, random_unit_vector

__all__ = [
    "AttackConfig",
    "IterationTrace",
    "AttackResult",
    "run_switch",
    "run_no_switch",
    "run_rgf_baseline",
    "run_attack",
    "rgf_estimate",
    "choose_target_class",
    "default_step_size",
]

Variant = Literal["switch", "switch_rgf", "no_switch", "rgf"]
VARIANTS = ("switch", "switch_rgf", "no_switch", "rgf")

ACCEPT_FORWARD = "accept_forward"
SWITCH_ACCEPTED = "switch_accepted"
PICK_BETTER = "pick_better_of_two"
RGF_FALLBACK = "rgf_fallback"
RGF_STEP = "rgf_step"


def default_step_size(p: float, epsilon: float, targeted: bool) -> float:
    """Paper defaults: eps/10 for l2; 0.01 untargeted / 0.003 targeted
    under l-infinity."""
    if p == 2:
        return epsilon / 10.0
    return 0.003 if targeted else 0.01


def choose_target_class(y: int, num_classes: int) -> int:
    """Target-class rule for targeted attacks: (y + 1) mod C."""
    if num_classes < 2 or not 0 <= y < num_classes:
        raise ConfigError(f"bad (y={y}, C={num_classes})")
    return (y + 1) % num_classes


@dataclass
class AttackConfig:
    p: float = 2.0                      # 2 or math.inf
    epsilon: float = 1.0
    eta: Optional[float] = None         # None -> default_step_size
    variant: Variant = "switch"
    q: int = 50
    delta_rgf: float = 1e-4
    budget: int = 10000
    loss: Optional[LossName] = None     # override the goal's default pairing
    seed: int = 0
    record_iterates: bool = False       # keep accepted x_adv per iteration

    def __post_init__(self):
        if self.p not in (2, 2.0) and not math.isinf(self.p):
            raise ConfigError(f"p must be 2 or inf, got {self.p}")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.eta is not None and self.eta <= 0:
            raise ConfigError("eta must be positive")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.q < 1:
            raise ConfigError("q must be >= 1")
        if self.delta_rgf <= 0:
            raise ConfigError("delta_rgf must be positive")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")

    def resolved_eta(self, goal: AttackGoal) -> float:
        if self.eta is not None:
            return self.eta
        return default_step_size(self.p, self.epsilon, goal.targeted)


@dataclass
class IterationTrace:
    l_last: float                      # accepted loss entering the iteration
    l1: float
    branch: str
    direction_sign: object             # +1, -1 or "rgf"
    queries: int
    l2: Optional[float] = None
    zero_gradient_fallback: bool = False
    tie_l1_l2: bool = False
    iterate: Optional[np.ndarray] = None

    @property
    def switched(self) -> bool:
        """True when the mirrored direction -g was adopted."""
        return self.branch == SWITCH_ACCEPTED or (
            self.branch == PICK_BETTER and self.direction_sign == -1
        )

    @property
    def probe_failed(self) -> bool:
        """True when the forward probe lost to the last accepted loss
        (Algorithm line where switching is considered)."""
        return self.branch != ACCEPT_FORWARD


@dataclass
class AttackResult:
    outcome: Literal["success", "budget_exhausted", "oracle_failure"]
    final_image: np.ndarray
    queries_used: int
    iterations: List[IterationTrace] = field(default_factory=list)
    pending_queries: int = 0           # spent inside an unfinished iteration
    final_loss: Optional[float] = None
    wall_time: float = 0.0
    error: Optional[str] = None

    @property
    def success(self) -> bool:
        return self.outcome == "success"


def rgf_estimate(oracle, ledger: QueryLedger, x: np.ndarray, goal: AttackGoal,
                 q: int, delta: float, base_loss: float,
                 rng: np.random.Generator,
                 loss: Optional[LossName] = None) -> np.ndarray:
    """Random gradient-free estimate: average of q directional finite
    differences along uniform unit vectors.

    The base loss at x is reused from the caller's cache, so exactly q
    queries are consumed.  Probe points are transient and never
    success-checked, but every probe is ledger-counted.
    """
    x = np.asarray(x, dtype=np.float32).reshape(-1)
    acc = np.zeros(x.size, dtype=np.float64)
    for _ in range(q):
        u = random_unit_vector(x.size, rng)
        probe = x + np.float32(delta) * u
        loss_probe, _, _ = query_loss(oracle, ledger, probe, goal, loss)
        acc += ((loss_probe - base_loss) / delta) * u.astype(np.float64)
    return (acc / q).astype(np.float32)


def _surrogate_direction(surrogate, x, goal, p, rng):
    """Normalized surrogate direction; a zero gradient is replaced by a
    seeded random unit direction so the iteration still makes progress."""
    g = np.asarray(surrogate.gradient(x, goal), dtype=np.float32).reshape(-1)
    fallback = False
    if l2_norm(g) == 0.0:
        g = random_unit_vector(x.size, rng)
        fallback = True
    try:
        return lp_normalize(g, p), fallback
    except ZeroGradient:
        return lp_normalize(random_unit_vector(x.size, rng), p), True


def _result(outcome, x, ledger, traces, pending, loss, t0, error=None):
    return AttackResult(
        outcome=outcome,
        final_image=np.asarray(x, dtype=np.float32).copy(),
        queries_used=ledger.count,
        iterations=traces,
        pending_queries=pending,
        final_loss=loss,
        wall_time=time.perf_counter() - t0,
        error=error,
    )


def run_switch(image, goal: AttackGoal, target, surrogate, cfg: AttackConfig,
               rng: Optional[np.random.Generator] = None) -> AttackResult:
    """SWITCH / SWITCH_RGF attack loop (selected by cfg.variant)."""
    if cfg.variant not in ("switch", "switch_rgf"):
        raise ConfigError(f"run_switch cannot run variant {cfg.variant!r}")
    use_rgf = cfg.variant == "switch_rgf"
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    x0 = box_clamp(image)
    x = x0.copy()
    eta = np.float32(cfg.resolved_eta(goal))
    ledger = QueryLedger(budget=cfg.budget)
    traces: List[IterationTrace] = []

    def trace(l_last, l1, branch, sign, queries, l2=None, zero=False, tie=False):
        traces.append(IterationTrace(
            l_last=l_last, l1=l1, branch=branch, direction_sign=sign,
            queries=queries, l2=l2, zero_gradient_fallback=zero, tie_l1_l2=tie,
            iterate=x.copy() if cfg.record_iterates else None,
        ))

    try:
        l_last, _, ok = query_loss(target, ledger, x, goal, cfg.loss)
        if ok:
            return _result("success", x, ledger, traces, 0, l_last, t0)
        while True:
            if ledger.remaining < 1:
                return _result("budget_exhausted", x, ledger, traces, 0, l_last, t0)
            gbar, zero = _surrogate_direction(surrogate, x, goal, cfg.p, rng)
            entry_loss = l_last
            x_temp = clip_epsilon(x + eta * gbar, x0, cfg.epsilon, cfg.p)
            l1, _, ok = query_loss(target, ledger, x_temp, goal, cfg.loss)
            if ok or l1 >= l_last:
                x = x_temp
                l_last = l1
                trace(entry_loss, l1, ACCEPT_FORWARD, +1, 1, zero=zero)
                if ok:
                    return _result("success", x, ledger, traces, 0, l_last, t0)
                continue
            if ledger.remaining < 1:
                return _result("budget_exhausted", x, ledger, traces, 1, l_last, t0)
            x_temp2 = clip_epsilon(x - eta * gbar, x0, cfg.epsilon, cfg.p)
            l2, _, ok = query_loss(target, ledger, x_temp2, goal, cfg.loss)
            if ok or l2 >= l_last:
                x = x_temp2
                l_last = l2
                trace(entry_loss, l1, SWITCH_ACCEPTED, -1, 2, l2=l2, zero=zero)
                if ok:
                    return _result("success", x, ledger, traces, 0, l_last, t0)
                continue
            if use_rgf:
                # Need q probes plus one post-step evaluation to finish the
                # iteration; refuse to start a partial estimate.
                if ledger.remaining < cfg.q + 1:
                    return _result("budget_exhausted", x, ledger, traces, 2,
                                   l_last, t0)
                g_rgf = rgf_estimate(target, ledger, x, goal, cfg.q,
                                     cfg.delta_rgf, l_last, rng, cfg.loss)
                x = clip_epsilon(x + eta * g_rgf, x0, cfg.epsilon, cfg.p)
                l_last, _, ok = query_loss(target, ledger, x, goal, cfg.loss)
                trace(entry_loss, l1, RGF_FALLBACK, "rgf", cfg.q + 3, l2=l2,
                      zero=zero)
                if ok:
                    return _result("success", x, ledger, traces, 0, l_last, t0)
            else:
                tie = l2 == l1
                if l2 >= l1:      # Alg. line 21 uses >=, so exact ties switch
                    x = x_temp2
                    l_last = l2
                    sign = -1
                else:
                    x = x_temp
                    l_last = l1
                    sign = +1
                trace(entry_loss, l1, PICK_BETTER, sign, 2, l2=l2, zero=zero,
                      tie=tie)
    except BudgetExhausted:
        pending = ledger.count - 1 - sum(t.queries for t in traces)
        return _result("budget_exhausted", x, ledger, traces, pending, None, t0)
    except OracleFailure as exc:
        pending = ledger.count - 1 - sum(t.queries for t in traces)
        return _result("oracle_failure", x, ledger, traces, max(pending, 0),
                       None, t0, error=str(exc))


def run_no_switch(image, goal: AttackGoal, target, surrogate, cfg: AttackConfig,
                  rng: Optional[np.random.Generator] = None) -> AttackResult:
    """PGD along the surrogate direction every iteration; one query per
    iteration, solely to evaluate loss/success at the accepted point."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    x0 = box_clamp(image)
    x = x0.copy()
    eta = np.float32(cfg.resolved_eta(goal))
    ledger = QueryLedger(budget=cfg.budget)
    traces: List[IterationTrace] = []
    try:
        l_last, _, ok = query_loss(target, ledger, x, goal, cfg.loss)
        if ok:
            return _result("success", x, ledger, traces, 0, l_last, t0)
        while True:
            if ledger.remaining < 1:
                return _result("budget_exhausted", x, ledger, traces, 0, l_last, t0)
            gbar, zero = _surrogate_direction(surrogate, x, goal, cfg.p, rng)
            entry_loss = l_last
            x = clip_epsilon(x + eta * gbar, x0, cfg.epsilon, cfg.p)
            l_last, _, ok = query_loss(target, ledger, x, goal, cfg.loss)
            traces.append(IterationTrace(
                l_last=entry_loss, l1=l_last, branch=ACCEPT_FORWARD,
                direction_sign=+1, queries=1, zero_gradient_fallback=zero,
                iterate=x.copy() if cfg.record_iterates else None,
            ))
            if ok:
                return _result("success", x, ledger, traces, 0, l_last, t0)
    except OracleFailure as exc:
        pending = ledger.count - 1 - sum(t.queries for t in traces)
        return _result("oracle_failure", x, ledger, traces, max(pending, 0),
                       None, t0, error=str(exc))


def run_rgf_baseline(image, goal: AttackGoal, target, cfg: AttackConfig,
                     rng: Optional[np.random.Generator] = None) -> AttackResult:
    """Pure RGF attack: q probe queries plus one post-step evaluation per
    iteration (the base loss is cached from the previous evaluation)."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    x0 = box_clamp(image)
    x = x0.copy()
    eta = np.float32(cfg.resolved_eta(goal))
    ledger = QueryLedger(budget=cfg.budget)
    traces: List[IterationTrace] = []
    try:
        l_last, _, ok = query_loss(target, ledger, x, goal, cfg.loss)
        if ok:
            return _result("success", x, ledger, traces, 0, l_last, t0)
        while True:
            if ledger.remaining < cfg.q + 1:
                return _result("budget_exhausted", x, ledger, traces, 0, l_last, t0)
            entry_loss = l_last
            est = rgf_estimate(target, ledger, x, goal, cfg.q, cfg.delta_rgf,
                               l_last, rng, cfg.loss)
            x = clip_epsilon(x + eta * est, x0, cfg.epsilon, cfg.p)
            l_last, _, ok = query_loss(target, ledger, x, goal, cfg.loss)
            traces.append(IterationTrace(
                l_last=entry_loss, l1=l_last, branch=RGF_STEP,
                direction_sign="rgf", queries=cfg.q + 1,
                iterate=x.copy() if cfg.record_iterates else None,
            ))
            if ok:
                return _result("success", x, ledger, traces, 0, l_last, t0)
    except OracleFailure as exc:
        pending = ledger.count - 1 - sum(t.queries for t in traces)
        return _result("oracle_failure", x, ledger, traces, max(pending, 0),
                       None, t0, error=str(exc))


def run_attack(image, goal: AttackGoal, target, surrogate, cfg: AttackConfig,
               rng: Optional[np.random.Generator] = None) -> AttackResult:
    """Dispatch on cfg.variant; baselines ignore the surrogate."""
    if cfg.variant in ("switch", "switch_rgf"):
        if surrogate is None:
            raise ConfigError(f"variant {cfg.variant!r} needs a surrogate")
        return run_switch(image, goal, target, surrogate, cfg, rng)
    if cfg.variant == "no_switch":
        if surrogate is None:
            raise ConfigError("variant 'no_switch' needs a surrogate")
        return run_no_switch(image, goal, target, surrogate, cfg, rng)
    if cfg.variant == "rgf":
        return run_rgf_baseline(image, goal, target, cfg, rng)
    raise ConfigError(f"unknown variant {cfg.variant!r}")
