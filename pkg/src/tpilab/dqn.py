"""The value network: per-node 3-way action values over a circuit graph,
with legality masking and epsilon-greedy selection.

Node features are the pre-trained 64-d embedding concatenated with a 3-d
gate-kind one-hot (order PI, AND, NOT); with pretraining disabled the one-hot
stands alone and the input projection shrinks to match.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aig import AigGraph, TpType
from .env import Action, NoLegalActions, legal_action_pairs
from .gnn import EncoderConfig, GraphTensors, encoder_forward, graph_tensors, init_encoder
from .nn import Mlp, ParamStore, Tensor, load_checkpoint, no_grad, save_checkpoint
from .pretrain import FEATURE_DIM, PretrainModel, embed, one_hot_features

N_ACTION_TYPES = 3  # AND-CP, OR-CP, OP (TpType.order)
EMBED_DIM = 64
READOUT_HIDDEN = 32


class DimensionMismatch(Exception):
    pass


@dataclass(frozen=True)
class DqnConfig:
    attention: str = "testability"  # "testability" | "tied" | "none"
    use_pretrain: bool = True
    hidden: int = 64
    iterations: int = 10

    @property
    def in_dim(self) -> int:
        return EMBED_DIM + FEATURE_DIM if self.use_pretrain else FEATURE_DIM

    def encoder(self) -> EncoderConfig:
        return EncoderConfig(in_dim=self.in_dim, hidden=self.hidden,
                             iterations=self.iterations, attention=self.attention)


def build_features(g: AigGraph, emb: np.ndarray | None) -> np.ndarray:
    """[embedding || kind one-hot], or the one-hot alone without pretraining."""
    onehot = one_hot_features(g)
    if emb is None:
        return onehot
    if emb.shape != (g.node_count, EMBED_DIM):
        raise DimensionMismatch(f"embeddings {emb.shape} vs ({g.node_count}, {EMBED_DIM})")
    return np.concatenate([emb, onehot], axis=1)


@dataclass
class QValues:
    q: np.ndarray  # (n, 3), row order = node id, column order = TpType.order
    legal_mask: np.ndarray  # (n, 3) bool

    def legal_actions(self) -> list[Action]:
        nodes, types = np.nonzero(self.legal_mask)
        return [Action(int(v), _TP_BY_ORDER[t]) for v, t in zip(nodes, types)]


_TP_BY_ORDER = {tp.order: tp for tp in TpType}


def legal_mask_for(g: AigGraph) -> np.ndarray:
    mask = np.zeros((g.node_count, N_ACTION_TYPES), dtype=bool)
    for a in legal_action_pairs(g):
        mask[a.node, a.tp.order] = True
    return mask


@dataclass
class GraphSnapshot:
    """One graph version with everything the value network needs."""

    graph: AigGraph
    tensors: GraphTensors
    features: np.ndarray
    legal_mask: np.ndarray

    @classmethod
    def build(cls, g: AigGraph, pretrain_model: PretrainModel | None) -> "GraphSnapshot":
        emb = embed(pretrain_model, g) if pretrain_model is not None else None
        return cls(
            graph=g,
            tensors=graph_tensors(g),
            features=build_features(g, emb),
            legal_mask=legal_mask_for(g),
        )


class GraphDqn:
    """Value network instance: config plus its parameter store."""

    def __init__(self, config: DqnConfig, store: ParamStore):
        self.config = config
        self.store = store

    @classmethod
    def new(cls, seed: int, config: DqnConfig = DqnConfig()) -> "GraphDqn":
        store = ParamStore(seed=seed)
        init_encoder(store, config.encoder(), prefix="enc.")
        Mlp("readout", (config.hidden, READOUT_HIDDEN, N_ACTION_TYPES)).init(store)
        return cls(config, store)

    def forward_tensor(self, snap: GraphSnapshot, store: ParamStore | None = None,
                       collect_attention: list | None = None) -> Tensor:
        """Differentiable (n, 3) action values for one graph."""
        store = store if store is not None else self.store
        h = encoder_forward(store, self.config.encoder(), snap.tensors, snap.features,
                            prefix="enc.", collect_attention=collect_attention)
        return Mlp("readout", (self.config.hidden, READOUT_HIDDEN, N_ACTION_TYPES))(store, h)

    def q_values(self, snap: GraphSnapshot, store: ParamStore | None = None) -> QValues:
        with no_grad():
            q = self.forward_tensor(snap, store=store)
        return QValues(q=q.data, legal_mask=snap.legal_mask)

    def save(self, path: str, extra_meta: dict | None = None) -> None:
        meta = {
            "kind": "graph-dqn",
            "attention": self.config.attention,
            "use_pretrain": self.config.use_pretrain,
            "hidden": self.config.hidden,
            "iterations": self.config.iterations,
        }
        if extra_meta:
            meta.update(extra_meta)
        self.save_arrays(path, meta)

    def save_arrays(self, path: str, meta: dict) -> None:
        save_checkpoint(path, {k: t.data for k, t in self.store.tensors.items()}, meta)

    @classmethod
    def load(cls, path: str) -> "GraphDqn":
        arrays, meta = load_checkpoint(path)
        if meta.get("kind") != "graph-dqn":
            raise ValueError(f"{path} is not a graph-dqn checkpoint")
        config = DqnConfig(
            attention=meta["attention"],
            use_pretrain=bool(meta["use_pretrain"]),
            hidden=int(meta["hidden"]),
            iterations=int(meta["iterations"]),
        )
        dqn = cls.new(seed=0, config=config)
        dqn.store.load_arrays(arrays)
        return dqn


def select_action(qv: QValues, epsilon: float, rng: np.random.Generator | None) -> Action:
    """Epsilon-greedy over legal pairs; greedy ties break to the smallest
    (node id, AND-CP < OR-CP < OP)."""
    legal = qv.legal_actions()
    if not legal:
        raise NoLegalActions("no legal (node, type) pairs")
    if epsilon > 0.0:
        if rng is None:
            raise ValueError("epsilon > 0 requires an rng")
        if rng.random() < epsilon:
            return legal[int(rng.integers(len(legal)))]
    best, best_q = None, -np.inf
    for a in legal:  # already sorted by (node, type order)
        val = qv.q[a.node, a.tp.order]
        if val > best_q:
            best, best_q = a, val
    return best
