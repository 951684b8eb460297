"""Recursive subquery-representation model for cardinality prediction.

Three networks share a state space: `init_net` maps (database vector, first
action) to a state, `transition_net` maps (state, action) to the next state,
and `readout_net` maps any state to a scalar prediction. Training runs whole
action sequences, sums the per-stage relative-error losses, and backpropagates
through the transition chain, so early states are shaped by the losses of the
stages built on top of them.

Predictions are normalized: in the default "selectivity" mode the readout
emits a fraction of the stage's input size (the base-table size for a
selection, the product of the two joined components' sizes for a join).
Training scales with the true input sizes carried by each example; inference
has no oracle, so join scales fall back to the model's own upstream
predictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .catalog import Catalog, encode_action
from .errors import ConfigError, ContractViolation, ShapeError
from .nn import (
    Network,
    backward,
    forward,
    init_network,
    load_networks,
    relative_error_loss,
    save_networks,
    sgd_step,
    zero_gradient,
)
from .query import (
    Action,
    JoinAction,
    QuerySpec,
    Selection,
    SelectionAction,
    fold_prefix,
)

MODES = ("selectivity", "raw")
METRIC_FLOOR = 1.0  # reported relative errors always clamp the denominator at one tuple


@dataclass(frozen=True)
class SequenceExample:
    """One training sequence: legal actions, per-stage true cardinalities and
    the true input sizes used to normalize each stage's target."""

    actions: tuple[Action, ...]
    labels: tuple[float, ...]
    input_sizes: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.actions) == len(self.labels) == len(self.input_sizes)):
            raise ShapeError("actions, labels and input_sizes must align")
        if any(l < 0 for l in self.labels):
            raise ConfigError("cardinality labels must be non-negative")
        if any(s <= 0 for s in self.input_sizes):
            raise ConfigError("stage input sizes must be positive")


@dataclass
class CardinalityModel:
    init_net: Network
    transition_net: Network
    readout_net: Network
    state_dim: int
    mode: str = "selectivity"
    loss_floor: float = 1.0
    # Training-only: lift the loss denominator to this fraction of the stage
    # input size. Caps the per-example gradient at 1/fraction; without it a
    # single near-zero label can saturate the readout beyond recovery.
    loss_floor_fraction: float = 0.05

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.loss_floor <= 0 or self.loss_floor_fraction < 0:
            raise ConfigError("loss_floor must be positive, loss_floor_fraction >= 0")
        n = self.state_dim
        if self.init_net.output_dim != n or self.transition_net.output_dim != n:
            raise ShapeError("init/transition nets must emit the state dimension")
        if self.readout_net.input_dim != n or self.readout_net.output_dim != 1:
            raise ShapeError("readout net must map the state to a scalar")

    def training_floor(self, input_size: float) -> float:
        return max(self.loss_floor, self.loss_floor_fraction * input_size)


def build_model(
    vector_dim: int,
    action_dim: int,
    state_dim: int = 64,
    init_hidden: int = 50,
    transition_hidden: int = 64,
    readout_hidden: int = 32,
    mode: str = "selectivity",
    loss_floor: float = 1.0,
    loss_floor_fraction: float = 0.05,
    hidden_activation: str = "tanh",
    seed: int = 0,
) -> CardinalityModel:
    """Assemble the three networks.

    Hidden layers default to tanh (stacked sigmoids starve the input signal
    of gradient at learning rates this small); the layers emitting the state
    stay sigmoid so state entries live in (0,1), and the readout output is
    sigmoid in selectivity mode (a fraction of the stage input size) or
    identity in raw mode.
    """
    out_act = "sigmoid" if mode == "selectivity" else "identity"
    return CardinalityModel(
        init_net=init_network(
            [vector_dim + action_dim, init_hidden, state_dim],
            [hidden_activation, "sigmoid"], seed,
        ),
        transition_net=init_network(
            [state_dim + action_dim, transition_hidden, state_dim],
            [hidden_activation, "sigmoid"], seed + 1,
        ),
        readout_net=init_network(
            [state_dim, readout_hidden, 1], [hidden_activation, out_act], seed + 2
        ),
        state_dim=state_dim,
        mode=mode,
        loss_floor=loss_floor,
        loss_floor_fraction=loss_floor_fraction,
    )


def initial_state(model: CardinalityModel, db_vec: np.ndarray, action_enc: np.ndarray) -> np.ndarray:
    y, _ = forward(model.init_net, np.concatenate([db_vec, action_enc]))
    return y


def transition(model: CardinalityModel, state: np.ndarray, action_enc: np.ndarray) -> np.ndarray:
    y, _ = forward(model.transition_net, np.concatenate([state, action_enc]))
    return y


def decode_cardinality(model: CardinalityModel, state: np.ndarray, input_size: float) -> float:
    """Denormalize the readout into a cardinality, clamped at zero."""
    y, _ = forward(model.readout_net, state)
    raw = float(y[0])
    card = raw * input_size if model.mode == "selectivity" else raw
    return max(card, 0.0)


# ---------------------------------------------------------------------------
# Scale recipes: how each stage's normalization resolves without an oracle.

def scale_recipe(actions: Sequence[Action], row_counts: Mapping[str, int]):
    """Per stage, the factors making up its input size, each either a raw
    table size or a reference to an earlier stage's prediction."""
    comp_of: dict[str, int] = {}
    factor: dict[int, tuple] = {}  # component id -> ("raw", size) | ("stage", t)
    members: dict[int, set[str]] = {}
    counter = iter(range(len(row_counts) + len(actions) + 1))

    def comp_for(rel: str) -> int:
        if rel not in comp_of:
            cid = next(counter)
            comp_of[rel] = cid
            factor[cid] = ("raw", float(row_counts[rel]))
            members[cid] = {rel}
        return comp_of[rel]

    recipe: list[list[tuple]] = []
    for t, action in enumerate(actions):
        if isinstance(action, SelectionAction):
            cid = comp_for(action.relation)
            recipe.append([factor[cid]])
            factor[cid] = ("stage", t)
        else:
            a, b = sorted(action.predicate.relations)
            ca, cb = comp_for(a), comp_for(b)
            recipe.append([factor[ca], factor[cb]])
            if ca != cb:
                for r in members[cb]:
                    comp_of[r] = ca
                members[ca] |= members.pop(cb)
                del factor[cb]
            factor[ca] = ("stage", t)
    return recipe


def _resolve_scale(factors, preds: list[float]) -> float:
    size = 1.0
    for kind, ref in factors:
        size *= ref if kind == "raw" else max(preds[int(ref)], 1.0)
    return size


def _implied_query(actions: Sequence[Action]) -> QuerySpec:
    rels: set[str] = set()
    sels: list[Selection] = []
    joins = []
    for a in actions:
        if isinstance(a, SelectionAction):
            rels.add(a.relation)
            sels.extend(Selection(a.relation, attr, v) for attr, v in a.predicates)
        else:
            rels.update(a.predicate.relations)
            joins.append(a.predicate)
    return QuerySpec(frozenset(rels), tuple(sels), tuple(joins))


def predict_sequence(
    model: CardinalityModel,
    catalog: Catalog,
    db_vec: np.ndarray,
    actions: Sequence[Action],
) -> list[float]:
    """Predicted cardinality after each stage of a legal action sequence.

    Oracle-free: join normalization scales use the model's own predictions
    for already-built components.
    """
    if not actions:
        raise ContractViolation("predict_sequence needs at least one action")
    fold_prefix(_implied_query(actions), actions)  # legality
    encodings = [encode_action(a, catalog) for a in actions]
    recipe = scale_recipe(actions, catalog.row_counts)
    preds: list[float] = []
    state = initial_state(model, db_vec, encodings[0])
    for t in range(len(actions)):
        if t > 0:
            state = transition(model, state, encodings[t])
        preds.append(decode_cardinality(model, state, _resolve_scale(recipe[t], preds)))
    return preds


# ---------------------------------------------------------------------------
# Joint training

@dataclass(frozen=True)
class EpochRow:
    epoch: int
    split: str
    mean_rel_err: float
    median_rel_err: float
    std_rel_err: float


@dataclass
class TrainingMetrics:
    rows: list[EpochRow] = field(default_factory=list)
    skipped_examples: int = 0


class _ActionEncoder:
    def __init__(self, catalog: Catalog):
        self.catalog = catalog
        self._cache: dict[Action, np.ndarray] = {}

    def __call__(self, action: Action) -> np.ndarray:
        enc = self._cache.get(action)
        if enc is None:
            enc = self._cache[action] = encode_action(action, self.catalog)
        return enc


def _example_step(model: CardinalityModel, db_vec, example, encoder, lr):
    """One SGD step on one sequence; returns the updated model or None when
    the example produced a non-finite loss."""
    n = model.state_dim
    encs = [encoder(a) for a in example.actions]
    states, tapes = [], []
    state_in = np.concatenate([db_vec, encs[0]])
    h, tape = forward(model.init_net, state_in)
    states.append(h)
    tapes.append(tape)
    for enc in encs[1:]:
        h, tape = forward(model.transition_net, np.concatenate([h, enc]))
        states.append(h)
        tapes.append(tape)
    readout_tapes = []
    dL_dy = []
    finite = True
    for t, h in enumerate(states):
        y, ro_tape = forward(model.readout_net, h)
        readout_tapes.append(ro_tape)
        raw = float(y[0])
        scale = example.input_sizes[t]
        card = raw * scale if model.mode == "selectivity" else raw
        floor = model.training_floor(scale)
        loss, dcard = relative_error_loss(card, example.labels[t], floor)
        if not np.isfinite(loss):
            finite = False
            break
        dL_dy.append(dcard * scale if model.mode == "selectivity" else dcard)
    if not finite:
        return None

    g_init = zero_gradient(model.init_net)
    g_st = zero_gradient(model.transition_net)
    g_ro = zero_gradient(model.readout_net)
    dh = np.zeros(n)
    for t in range(len(states) - 1, -1, -1):
        ro_grad = backward(model.readout_net, readout_tapes[t], np.array([dL_dy[t]]))
        g_ro.add_(ro_grad)
        dh = dh + ro_grad.input_grad
        if t == 0:
            g_init.add_(backward(model.init_net, tapes[0], dh))
        else:
            st_grad = backward(model.transition_net, tapes[t], dh)
            g_st.add_(st_grad)
            dh = st_grad.input_grad[:n]
    return CardinalityModel(
        init_net=sgd_step(model.init_net, g_init, lr),
        transition_net=sgd_step(model.transition_net, g_st, lr),
        readout_net=sgd_step(model.readout_net, g_ro, lr),
        state_dim=model.state_dim,
        mode=model.mode,
        loss_floor=model.loss_floor,
        loss_floor_fraction=model.loss_floor_fraction,
    )


def stage_predictions(
    model: CardinalityModel,
    catalog: Catalog,
    db_vec: np.ndarray,
    dataset: Sequence[SequenceExample],
) -> list[list[tuple[float, float]]]:
    """(truth, prediction) per stage per example, oracle-free."""
    out = []
    for ex in dataset:
        preds = predict_sequence(model, catalog, db_vec, ex.actions)
        out.append(list(zip(ex.labels, preds)))
    return out


def _relative_errors(pairs: list[list[tuple[float, float]]]) -> np.ndarray:
    errs = [
        abs(pred - truth) / max(truth, METRIC_FLOOR)
        for stages in pairs
        for truth, pred in stages
    ]
    return np.asarray(errs)


def _metric_row(epoch: int, split: str, errs: np.ndarray) -> EpochRow:
    return EpochRow(
        epoch=epoch,
        split=split,
        mean_rel_err=float(errs.mean()),
        median_rel_err=float(np.median(errs)),
        std_rel_err=float(errs.std()),
    )


def train_combined(
    model: CardinalityModel,
    catalog: Catalog,
    db_vec: np.ndarray,
    train_set: Sequence[SequenceExample],
    epochs: int,
    lr: float,
    seed: int,
    eval_set: Sequence[SequenceExample] = (),
) -> tuple[CardinalityModel, TrainingMetrics]:
    """Per-example SGD over shuffled sequences, losses summed over stages.

    Examples whose loss goes non-finite are skipped and counted. After each
    epoch, relative errors (denominator clamped at one tuple) are reported on
    the training set and, when given, the held-out set.
    """
    if not train_set:
        raise ConfigError("training set is empty")
    metrics = TrainingMetrics()
    if epochs == 0:
        return model, metrics
    encoder = _ActionEncoder(catalog)
    rng = np.random.default_rng(seed)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(train_set))
        for i in order:
            stepped = _example_step(model, db_vec, train_set[int(i)], encoder, lr)
            if stepped is None:
                metrics.skipped_examples += 1
            else:
                model = stepped
        train_errs = _relative_errors(stage_predictions(model, catalog, db_vec, train_set))
        metrics.rows.append(_metric_row(epoch, "train", train_errs))
        if eval_set:
            test_errs = _relative_errors(stage_predictions(model, catalog, db_vec, eval_set))
            metrics.rows.append(_metric_row(epoch, "test", test_errs))
    return model, metrics


# ---------------------------------------------------------------------------
# Checkpointing

def save_model(path: str | Path, model: CardinalityModel) -> None:
    save_networks(
        path,
        {
            "init": model.init_net,
            "transition": model.transition_net,
            "readout": model.readout_net,
        },
        meta={
            "state_dim": model.state_dim,
            "mode": model.mode,
            "loss_floor": model.loss_floor,
            "loss_floor_fraction": model.loss_floor_fraction,
        },
    )


def load_model(path: str | Path) -> CardinalityModel:
    nets, meta = load_networks(path)
    return CardinalityModel(
        init_net=nets["init"],
        transition_net=nets["transition"],
        readout_net=nets["readout"],
        state_dim=int(meta["state_dim"]),
        mode=meta["mode"],
        loss_floor=float(meta["loss_floor"]),
        loss_floor_fraction=float(meta.get("loss_floor_fraction", 0.0)),
    )
