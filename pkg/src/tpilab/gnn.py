"""Shared circuit-graph encoder: bidirectional attention message passing with
a GRU state update, run for a fixed number of synchronous iterations.

Per iteration, each node scores its predecessors with (w0 . h_self + w_pre .
h_neighbor), softmax-normalizes within the predecessor set, and sums the
weighted neighbor states; successors are handled symmetrically with w_suc.
Aggregation reads the previous iteration's states everywhere (all nodes
update simultaneously). Ablations: "tied" shares one weight vector for both
directions, "none" replaces attention with neighbor means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aig import AigGraph
from .nn import (
    GruCell,
    Linear,
    ParamStore,
    Tensor,
    concat_cols,
    gather_rows,
    matmul,
    mul,
    segment_sum,
    softmax_over_set,
    unsqueeze_col,
)

HIDDEN_DIM = 64
ITERATIONS = 10

ATTENTION_MODES = ("testability", "tied", "none")


@dataclass(frozen=True)
class EncoderConfig:
    in_dim: int
    hidden: int = HIDDEN_DIM
    iterations: int = ITERATIONS
    attention: str = "testability"

    def __post_init__(self):
        if self.attention not in ATTENTION_MODES:
            raise ValueError(f"unknown attention mode {self.attention!r}")


@dataclass
class GraphTensors:
    """Flat edge arrays for one graph; build once per graph version."""

    n: int
    pre_src: np.ndarray
    pre_dst: np.ndarray
    suc_src: np.ndarray
    suc_dst: np.ndarray
    pre_inv_count: np.ndarray  # 1/|P(i)| columns, 0 for empty sets
    suc_inv_count: np.ndarray


def graph_tensors(g: AigGraph) -> GraphTensors:
    pre_src, pre_dst = [], []
    for v in range(g.node_count):
        for f in g.fanins[v]:
            pre_src.append(f)
            pre_dst.append(v)
    suc_src = np.asarray(pre_dst, dtype=np.int64)  # successors: reverse edges
    suc_dst = np.asarray(pre_src, dtype=np.int64)
    pre_src = np.asarray(pre_src, dtype=np.int64)
    pre_dst = np.asarray(pre_dst, dtype=np.int64)

    def inv_count(dst):
        c = np.zeros(g.node_count)
        np.add.at(c, dst, 1.0)
        with np.errstate(divide="ignore"):
            inv = np.where(c > 0, 1.0 / np.maximum(c, 1.0), 0.0)
        return inv.reshape(-1, 1)

    return GraphTensors(
        n=g.node_count,
        pre_src=pre_src,
        pre_dst=pre_dst,
        suc_src=suc_src,
        suc_dst=suc_dst,
        pre_inv_count=inv_count(pre_dst),
        suc_inv_count=inv_count(suc_dst),
    )


def init_encoder(store: ParamStore, cfg: EncoderConfig, prefix: str = "enc.") -> None:
    Linear(f"{prefix}proj", cfg.in_dim, cfg.hidden).init(store)
    if cfg.attention != "none":
        store.add(f"{prefix}attn.w0", (cfg.hidden,), fan_in=cfg.hidden)
        store.add(f"{prefix}attn.w_pre", (cfg.hidden,), fan_in=cfg.hidden)
        if cfg.attention == "testability":
            store.add(f"{prefix}attn.w_suc", (cfg.hidden,), fan_in=cfg.hidden)
    GruCell(f"{prefix}gru", 2 * cfg.hidden, cfg.hidden).init(store)


def _message(store: ParamStore, cfg: EncoderConfig, prefix: str, h: Tensor,
             src: np.ndarray, dst: np.ndarray, inv_count: np.ndarray, side: str,
             n: int, collect: list | None) -> Tensor:
    if len(src) == 0:
        return Tensor(np.zeros((n, cfg.hidden)))
    if cfg.attention == "none":
        summed = segment_sum(gather_rows(h, src), dst, n)
        return mul(summed, Tensor(inv_count))
    if cfg.attention == "tied" or side == "pre":
        w_nb = store[f"{prefix}attn.w_pre"]
    else:
        w_nb = store[f"{prefix}attn.w_suc"]
    self_scores = matmul(h, store[f"{prefix}attn.w0"])
    nb_scores = matmul(h, w_nb)
    scores = gather_rows(self_scores, dst) + gather_rows(nb_scores, src)
    alpha = softmax_over_set(scores, dst, n)
    if collect is not None:
        collect.append((side, alpha.data.copy(), dst))
    weighted = mul(gather_rows(h, src), unsqueeze_col(alpha))
    return segment_sum(weighted, dst, n)


def encoder_forward(store: ParamStore, cfg: EncoderConfig, gt: GraphTensors,
                    features: np.ndarray, prefix: str = "enc.",
                    collect_attention: list | None = None) -> Tensor:
    """Run the message-passing stack; returns final hidden states (n, hidden)."""
    if features.shape != (gt.n, cfg.in_dim):
        raise ValueError(f"features {features.shape} do not match ({gt.n}, {cfg.in_dim})")
    h = Linear(f"{prefix}proj", cfg.in_dim, cfg.hidden)(store, Tensor(features))
    gru = GruCell(f"{prefix}gru", 2 * cfg.hidden, cfg.hidden)
    for _ in range(cfg.iterations):
        m_pre = _message(store, cfg, prefix, h, gt.pre_src, gt.pre_dst,
                         gt.pre_inv_count, "pre", gt.n, collect_attention)
        m_suc = _message(store, cfg, prefix, h, gt.suc_src, gt.suc_dst,
                         gt.suc_inv_count, "suc", gt.n, collect_attention)
        h = gru(store, concat_cols(m_pre, m_suc), h)
    return h
