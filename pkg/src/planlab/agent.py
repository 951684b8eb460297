"""Q-learning over left-deep plan construction.

The agent's state couples the learned subquery representation with the
context vector of remaining predicates; actions are the pending operations of
the query. Rewards are negative log-scaled intermediate-result sizes, taken
from the trained model, the exact oracle, or the classical baseline. Both a
tabular Q (context exact, representation coordinates quantized) and a
semi-gradient network Q are provided, plus an exhaustive enumerator that
scores every legal left-deep ordering for evaluation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .baseline import estimate_join, estimate_selection
from .catalog import Catalog, apply_action, context_exhausted, encode_action, init_context
from .data import Relation
from .errors import CapacityError, ConfigError
from .executor import CardinalityOracle, touched_component
from .models import CardinalityModel, initial_state, transition, decode_cardinality
from .nn import Network, backward, forward, init_network, sgd_step
from .query import (
    Action,
    JoinAction,
    PrefixState,
    QuerySpec,
    SelectionAction,
    advance,
    initial_prefix_state,
    legal_actions as prefix_legal_actions,
)

REWARD_MODES = ("learned-cardinality", "true-cardinality", "baseline-cost")
Q_MODES = ("tabular", "approximate")
MAX_EXHAUSTIVE_RELATIONS = 5


@dataclass(frozen=True)
class AgentConfig:
    alpha: float = 0.1
    gamma: float = 1.0
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.5
    episodes: int = 1000
    reward_mode: str = "true-cardinality"
    q_mode: str = "tabular"
    seed: int = 0
    log_scale_rewards: bool = True
    hidden_quant_decimals: int = 1
    approx_hidden: int = 32

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0 <= self.gamma <= 1:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        for eps in (self.epsilon_start, self.epsilon_end):
            if not 0 <= eps <= 1:
                raise ConfigError(f"epsilon must be in [0, 1], got {eps}")
        if not 0 <= self.epsilon_decay_fraction <= 1:
            raise ConfigError("epsilon_decay_fraction must be in [0, 1]")
        if self.episodes < 0:
            raise ConfigError("episodes must be non-negative")
        if self.reward_mode not in REWARD_MODES:
            raise ConfigError(f"reward_mode must be one of {REWARD_MODES}")
        if self.q_mode not in Q_MODES:
            raise ConfigError(f"q_mode must be one of {Q_MODES}")

    def epsilon_at(self, episode: int) -> float:
        horizon = int(self.episodes * self.epsilon_decay_fraction)
        if horizon <= 0 or episode >= horizon:
            return self.epsilon_end
        frac = episode / horizon
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


@dataclass(frozen=True, eq=False)
class PlanState:
    """RL state: learned representation + remaining-work context + chain."""

    hidden: np.ndarray
    context: np.ndarray
    joined: frozenset[str]

    @property
    def terminal(self) -> bool:
        return context_exhausted(self.context)

    def key(self, decimals: int = 1) -> tuple:
        return (
            tuple(np.round(self.hidden, decimals).tolist()),
            tuple(self.context.tolist()),
        )


class TabularQ:
    """Finite state-action table; unseen pairs read as 0."""

    def __init__(self, decimals: int = 1):
        self.decimals = decimals
        self.table: dict[tuple, float] = {}

    def value(self, state: PlanState, action: Action) -> float:
        return self.table.get((state.key(self.decimals), action.sort_key()), 0.0)

    def set(self, state: PlanState, action: Action, v: float) -> None:
        self.table[(state.key(self.decimals), action.sort_key())] = v

    def __len__(self):
        return len(self.table)


class ApproxQ:
    """Network Q over [hidden; context; action encoding], trained with
    semi-gradient steps (the bootstrapped target is held constant)."""

    def __init__(self, catalog: Catalog, hidden_dim: int, state_dim: int,
                 width: int = 32, seed: int = 0):
        self.catalog = catalog
        self.hidden_dim = hidden_dim
        in_dim = hidden_dim + catalog.context_dim + catalog.action_dim
        self.net: Network = init_network([in_dim, width, 1], ["sigmoid", "identity"], seed)
        self._enc_cache: dict[Action, np.ndarray] = {}

    def _features(self, state: PlanState, action: Action) -> np.ndarray:
        enc = self._enc_cache.get(action)
        if enc is None:
            enc = self._enc_cache[action] = encode_action(action, self.catalog)
        return np.concatenate([state.hidden, state.context, enc])

    def value(self, state: PlanState, action: Action) -> float:
        y, _ = forward(self.net, self._features(state, action))
        return float(y[0])

    def update(self, state: PlanState, action: Action, target: float, lr: float) -> None:
        y, tape = forward(self.net, self._features(state, action))
        grad = backward(self.net, tape, np.array([float(y[0]) - target]))
        self.net = sgd_step(self.net, grad, lr)


QFunction = TabularQ | ApproxQ


def q_update(
    qf: QFunction,
    state: PlanState,
    action: Action,
    reward: float,
    next_state: PlanState,
    next_legal: Sequence[Action],
    cfg: AgentConfig,
) -> None:
    """One backup toward r + gamma * max_a' Q(s', a'); terminal states
    contribute 0."""
    if next_legal:
        best_next = max(qf.value(next_state, a) for a in next_legal)
    else:
        best_next = 0.0
    target = reward + cfg.gamma * best_next
    if isinstance(qf, TabularQ):
        old = qf.value(state, action)
        qf.set(state, action, old + cfg.alpha * (target - old))
    else:
        qf.update(state, action, target, cfg.alpha)


@dataclass
class EpisodeStep:
    state: PlanState
    action: Action
    reward: float


@dataclass
class Episode:
    steps: list[EpisodeStep] = field(default_factory=list)

    @property
    def actions(self) -> list[Action]:
        return [s.action for s in self.steps]

    @property
    def total_reward(self) -> float:
        return sum(s.reward for s in self.steps)


class PlanEnvironment:
    """Episodic environment for one query: tracks the action prefix, the
    representation state, the context vector, and whatever running sizes the
    configured reward mode needs."""

    def __init__(
        self,
        db: Mapping[str, Relation],
        q: QuerySpec,
        catalog: Catalog,
        reward_mode: str = "true-cardinality",
        model: CardinalityModel | None = None,
        db_vec: np.ndarray | None = None,
        oracle: CardinalityOracle | None = None,
        log_scale_rewards: bool = True,
    ):
        if reward_mode not in REWARD_MODES:
            raise ConfigError(f"reward_mode must be one of {REWARD_MODES}")
        if reward_mode == "learned-cardinality" and model is None:
            raise ConfigError("learned-cardinality rewards need a trained model")
        q.validate(db)
        self.db = db
        self.q = q
        self.catalog = catalog
        self.reward_mode = reward_mode
        self.model = model
        self.db_vec = db_vec
        self.oracle = oracle or CardinalityOracle(db)
        self.log_scale = log_scale_rewards
        self._initial_context = init_context(q, catalog)
        self._state_dim = model.state_dim if model is not None else 0
        self._enc_cache: dict[Action, np.ndarray] = {}
        self.reset()

    def reset(self) -> PlanState:
        self._prefix: PrefixState = initial_prefix_state(self.q)
        self._applied: list[Action] = []
        self._hidden = np.zeros(self._state_dim)
        self._context = self._initial_context.copy()
        # Running component sizes for learned/baseline stage scales.
        self._sizes: dict[str, float] = {}
        self._members: dict[str, set[str]] = {}
        self.state = PlanState(self._hidden, self._context, frozenset())
        return self.state

    def legal(self) -> list[Action]:
        return prefix_legal_actions(self._prefix)

    def _encode(self, action: Action) -> np.ndarray:
        enc = self._enc_cache.get(action)
        if enc is None:
            enc = self._enc_cache[action] = encode_action(action, self.catalog)
        return enc

    def _side_size(self, rel: str) -> float:
        if rel not in self._sizes:
            self._sizes[rel] = float(self.catalog.row_counts[rel])
            self._members[rel] = {rel}
        return self._sizes[rel]

    def _record_size(self, action: Action, value: float) -> None:
        if isinstance(action, SelectionAction):
            self._sizes[action.relation] = value
            self._members[action.relation] = {action.relation}
        else:
            a, b = sorted(action.predicate.relations)
            merged = self._members[a] | self._members[b]
            for rel in merged:
                self._sizes[rel] = value
                self._members[rel] = merged

    def _stage_estimate(self, action: Action, hidden: np.ndarray) -> float:
        if self.reward_mode == "true-cardinality":
            comp = touched_component(self.q, self._applied)
            return float(self.oracle.cardinality(comp))
        if self.reward_mode == "learned-cardinality":
            if isinstance(action, SelectionAction):
                scale = float(self.catalog.row_counts[action.relation])
            else:
                scale = 1.0
                for rel in sorted(action.predicate.relations):
                    scale *= self._side_size(rel)
            card = decode_cardinality(self.model, hidden, max(scale, 1.0))
            self._record_size(action, max(card, 1.0))
            return card
        # baseline-cost
        if isinstance(action, SelectionAction):
            est = estimate_selection(self.catalog, action.relation, action.predicates)
        else:
            pred = action.predicate
            a, b = sorted(pred.relations)
            st_a = self.catalog.stats[(a, pred.endpoint(a))]
            st_b = self.catalog.stats[(b, pred.endpoint(b))]
            est = estimate_join(
                self._side_size(a), self._side_size(b),
                st_a.distinct_count, st_b.distinct_count,
            )
        self._record_size(action, est)
        return est

    def step(self, action: Action) -> tuple[PlanState, float]:
        enc = self._encode(action)
        self._prefix = advance(self._prefix, action)
        self._applied.append(action)
        if self.model is not None:
            if len(self._applied) == 1:
                self._hidden = initial_state(self.model, self.db_vec, enc)
            else:
                self._hidden = transition(self.model, self._hidden, enc)
        self._context = apply_action(self._context, action, self.catalog)
        card = self._stage_estimate(action, self._hidden)
        reward = -math.log10(1.0 + max(card, 0.0)) if self.log_scale else -card
        self.state = PlanState(self._hidden, self._context, self._prefix.joined)
        return self.state, reward


def _greedy(qf: QFunction, state: PlanState, options: Sequence[Action]) -> Action:
    scored = [(-qf.value(state, a), a.sort_key(), a) for a in options]
    scored.sort(key=lambda t: (t[0], t[1]))
    return scored[0][2]


def rollout(
    env: PlanEnvironment,
    qf: QFunction,
    epsilon: float,
    rng: np.random.Generator | None,
    cfg: AgentConfig,
    update: bool = True,
) -> Episode:
    """One episode from s0 to terminal under an epsilon-greedy behavior
    policy, applying greedy-target backups along the way when `update`."""
    state = env.reset()
    episode = Episode()
    while True:
        options = env.legal()
        if not options:
            break
        if rng is not None and epsilon > 0 and rng.random() < epsilon:
            action = options[int(rng.integers(len(options)))]
        else:
            action = _greedy(qf, state, options)
        next_state, reward = env.step(action)
        if update:
            q_update(qf, state, action, reward, next_state, env.legal(), cfg)
        episode.steps.append(EpisodeStep(state, action, reward))
        state = next_state
    return episode


def run_training(
    db: Mapping[str, Relation],
    queries: Sequence[QuerySpec],
    catalog: Catalog,
    cfg: AgentConfig,
    model: CardinalityModel | None = None,
    db_vec: np.ndarray | None = None,
    collect_log: bool = False,
) -> tuple[QFunction, list[dict]]:
    """Train one Q-function across the query workload.

    Episodes pick queries uniformly at random (seeded); exploration decays
    linearly to its floor over the configured fraction of episodes. The
    optional log holds one JSON-ready record per step.
    """
    if not queries:
        raise ConfigError("empty query workload")
    if cfg.reward_mode == "learned-cardinality" and model is None:
        raise ConfigError("learned-cardinality rewards need a trained model")
    rng = np.random.default_rng(cfg.seed)
    envs = [
        PlanEnvironment(
            db, q, catalog,
            reward_mode=cfg.reward_mode,
            model=model,
            db_vec=db_vec,
            log_scale_rewards=cfg.log_scale_rewards,
        )
        for q in queries
    ]
    state_dim = model.state_dim if model is not None else 0
    if cfg.q_mode == "tabular":
        qf: QFunction = TabularQ(decimals=cfg.hidden_quant_decimals)
    else:
        qf = ApproxQ(catalog, state_dim, state_dim, width=cfg.approx_hidden, seed=cfg.seed)
    log: list[dict] = []
    for episode_idx in range(cfg.episodes):
        env = envs[int(rng.integers(len(envs)))]
        eps = cfg.epsilon_at(episode_idx)
        episode = rollout(env, qf, eps, rng, cfg, update=True)
        if collect_log:
            for t, step in enumerate(episode.steps):
                log.append(
                    {
                        "episode": episode_idx,
                        "step": t,
                        "state": repr(step.state.key(cfg.hidden_quant_decimals)),
                        "action": str(step.action),
                        "reward": step.reward,
                        "q_value": qf.value(step.state, step.action),
                    }
                )
    return qf, log


def best_plan(
    qf: QFunction,
    db: Mapping[str, Relation],
    q: QuerySpec,
    catalog: Catalog,
    cfg: AgentConfig,
    model: CardinalityModel | None = None,
    db_vec: np.ndarray | None = None,
) -> Episode:
    """Greedy (epsilon = 0) rollout; ties break to the lowest action id."""
    env = PlanEnvironment(
        db, q, catalog,
        reward_mode=cfg.reward_mode,
        model=model,
        db_vec=db_vec,
        log_scale_rewards=cfg.log_scale_rewards,
    )
    return rollout(env, qf, epsilon=0.0, rng=None, cfg=cfg, update=False)


def write_episode_log(path: str | Path, log: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in log:
            f.write(json.dumps(rec, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Exhaustive evaluation oracle

def exhaustive_optimum(
    db: Mapping[str, Relation],
    q: QuerySpec,
    cost_mode: str = "true",
    catalog: Catalog | None = None,
    oracle: CardinalityOracle | None = None,
) -> tuple[list[Action], float]:
    """Minimum-cost legal action ordering by full enumeration.

    Cost is the sum of log10(1 + intermediate size) over every stage, sized
    by the exact oracle ("true") or the classical estimator ("baseline").
    Ties break to the lexicographically smallest action sequence. Capped at
    five relations; the search is factorial.
    """
    if len(q.relations) > MAX_EXHAUSTIVE_RELATIONS:
        raise CapacityError(
            f"exhaustive search capped at {MAX_EXHAUSTIVE_RELATIONS} relations, "
            f"query has {len(q.relations)}"
        )
    if cost_mode not in ("true", "baseline"):
        raise ConfigError(f"cost_mode must be 'true' or 'baseline', got {cost_mode!r}")
    if cost_mode == "baseline" and catalog is None:
        raise ConfigError("baseline cost mode needs a catalog")
    q.validate(db)
    oracle = oracle or CardinalityOracle(db)

    best: tuple[float, tuple, list[Action]] | None = None

    def stage_cost(prefix: list[Action]) -> float:
        if cost_mode == "true":
            card = oracle.cardinality(touched_component(q, prefix))
        else:
            from .baseline import estimate_stage_cardinalities

            card = estimate_stage_cardinalities(catalog, prefix)[-1]
        return math.log10(1.0 + max(float(card), 0.0))

    def dfs(prefix_state: PrefixState, prefix: list[Action], cost: float):
        nonlocal best
        options = prefix_legal_actions(prefix_state)
        if not options:
            key = (cost, tuple(a.sort_key() for a in prefix))
            if best is None or key < (best[0], best[1]):
                best = (cost, key[1], list(prefix))
            return
        for action in options:
            prefix.append(action)
            dfs(advance(prefix_state, action), prefix, cost + stage_cost(prefix))
            prefix.pop()

    dfs(initial_prefix_state(q), [], 0.0)
    assert best is not None
    return best[2], best[0]


def render_plan(q: QuerySpec, actions: Sequence[Action]) -> str:
    """Indented text form of the realized left-deep plan: each join nests its
    chain on the left and the incoming base relation (with any pushed-down
    filters) as the right leaf."""
    sel_by_rel = {a.relation: a for a in actions if isinstance(a, SelectionAction)}

    def leaf(rel: str) -> str:
        sel = sel_by_rel.get(rel)
        if sel is None:
            return f"scan {rel}"
        preds = ", ".join(f"{attr} <= {v:g}" for attr, v in sel.predicates)
        return f"scan {rel} [{preds}]"

    joins = [a for a in actions if isinstance(a, JoinAction)]
    if not joins:
        return "\n".join(leaf(r) for r in sorted(q.relations))
    chain = set(joins[0].predicate.relations)
    a, b = sorted(joins[0].predicate.relations)
    tree: list[str] = [f"join {joins[0].predicate}", f"  {leaf(a)}", f"  {leaf(b)}"]
    for ja in joins[1:]:
        (new_rel,) = ja.predicate.relations - chain
        chain |= ja.predicate.relations
        tree = [f"join {ja.predicate}"] + ["  " + t for t in tree] + [f"  {leaf(new_rel)}"]
    return "\n".join(tree)
