"""Signal-probability pre-training: the encoder learns to predict each node's
probability of being 1 under random patterns, and its final hidden states are
then reused as node embeddings for the RL value network.

The probability head is only used during training; ``embed`` returns the
64-wide hidden states and drops the head.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .aig import AigGraph, dump_aig
from .gnn import EncoderConfig, encoder_forward, graph_tensors, init_encoder
from .nn import (
    Mlp,
    ParamStore,
    Tensor,
    absolute,
    adam_step,
    backward,
    load_checkpoint,
    no_grad,
    save_checkpoint,
    sigmoid,
    tmean,
)
from .simulate import PatternSet, simulate_good

FEATURE_DIM = 3  # one-hot over (PI, AND, NOT)


class EmptyCorpus(Exception):
    pass


def one_hot_features(g: AigGraph) -> np.ndarray:
    x = np.zeros((g.node_count, FEATURE_DIM))
    x[np.arange(g.node_count), g.kinds] = 1.0
    return x


@dataclass
class PretrainModel:
    store: ParamStore
    config: EncoderConfig
    meta: dict

    @classmethod
    def new(cls, seed: int, attention: str = "testability") -> "PretrainModel":
        cfg = EncoderConfig(in_dim=FEATURE_DIM, attention=attention)
        store = ParamStore(seed=seed)
        init_encoder(store, cfg)
        Mlp("head", (cfg.hidden, 32, 1)).init(store)
        return cls(store=store, config=cfg, meta={"seed": seed, "attention": attention})

    def hidden_states(self, g: AigGraph) -> Tensor:
        return encoder_forward(self.store, self.config, graph_tensors(g), one_hot_features(g))

    def predict_probability(self, g: AigGraph) -> np.ndarray:
        with no_grad():
            h = self.hidden_states(g)
            p = sigmoid(Mlp("head", (self.config.hidden, 32, 1))(self.store, h))
        return p.data.reshape(-1)


def embed(model: PretrainModel, g: AigGraph) -> np.ndarray:
    """Final-iteration hidden state per node; pure in (model, graph)."""
    with no_grad():
        h = model.hidden_states(g)
    return h.data


def probability_labels(g: AigGraph, n_patterns: int, seed: int) -> np.ndarray:
    """Simulated per-node 1-probability; exhaustive when the PI count allows."""
    if len(g.pi_index) <= 12:
        p = PatternSet.exhaustive(len(g.pi_index))
    else:
        p = PatternSet(seed=seed, n_patterns=n_patterns)
    _, probs = simulate_good(g, p)
    return probs


def corpus_hash(corpus: list[AigGraph]) -> str:
    h = hashlib.sha256()
    for g in corpus:
        h.update(dump_aig(g).encode())
    return h.hexdigest()[:16]


def pretrain(corpus: list[AigGraph], epochs: int, seed: int,
             n_patterns: int = 4096, lr: float = 1e-3,
             attention: str = "testability") -> tuple[PretrainModel, list[dict]]:
    """Minimize mean |predicted - simulated| probability over the corpus.

    One ADAM step per circuit per epoch; deterministic in ``seed``.
    """
    if not corpus:
        raise EmptyCorpus("pretraining needs at least one circuit")
    model = PretrainModel.new(seed=seed, attention=attention)
    head = Mlp("head", (model.config.hidden, 32, 1))
    rng = np.random.default_rng(np.random.SeedSequence([0x9E7A, seed]))
    prepared = []
    for i, g in enumerate(corpus):
        prepared.append(
            (graph_tensors(g), one_hot_features(g),
             probability_labels(g, n_patterns, seed=seed * 100003 + i))
        )
    log: list[dict] = []
    final_loss = None
    for epoch in range(epochs):
        order = rng.permutation(len(prepared))
        losses = []
        for idx in order:
            gt, feats, labels = prepared[idx]
            h = encoder_forward(model.store, model.config, gt, feats)
            pred = sigmoid(head(model.store, h))
            loss = tmean(absolute(pred - Tensor(labels.reshape(-1, 1))))
            backward(loss)
            adam_step(model.store, lr=lr)
            losses.append(float(loss.data))
        final_loss = float(np.mean(losses))
        log.append({"epoch": epoch, "mae": final_loss})
    model.meta.update(
        corpus_hash=corpus_hash(corpus),
        epochs=epochs,
        final_loss=final_loss,
        n_patterns=n_patterns,
        lr=lr,
    )
    return model, log


def save_pretrain(model: PretrainModel, path: str) -> None:
    meta = dict(model.meta)
    meta["kind"] = "pretrain"
    meta["attention"] = model.config.attention
    arrays = {name: t.data for name, t in model.store.tensors.items()}
    save_checkpoint(path, arrays, meta)


def load_pretrain(path: str) -> PretrainModel:
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "pretrain":
        raise ValueError(f"{path} is not a pretrain checkpoint")
    model = PretrainModel.new(seed=int(meta.get("seed", 0)), attention=meta["attention"])
    model.store.load_arrays(arrays)
    model.meta = meta
    return model
