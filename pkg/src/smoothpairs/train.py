"""Skip-gram with negative sampling over a stream of positive pairs."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numba
import numpy as np

from .graph import Graph, NodeDistribution, neg_sampling_distribution

logger = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 128
    negatives: int = 5
    neg_alpha: float = 0.75
    optimizer: str = "adam"
    lr: float = 0.01
    batch_size: int = 1000
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-7

    def __post_init__(self):
        if self.dim < 1 or self.negatives < 1 or self.batch_size < 1:
            raise ValueError("dim, negatives and batch_size must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class EmbeddingMatrices:
    center: np.ndarray
    context: np.ndarray

    @property
    def dim(self) -> int:
        return self.center.shape[1]

    @property
    def n(self) -> int:
        return self.center.shape[0]

    def copy(self) -> "EmbeddingMatrices":
        return EmbeddingMatrices(self.center.copy(), self.context.copy())


def init_embeddings(n: int, dim: int, seed: int) -> EmbeddingMatrices:
    rng = np.random.default_rng(seed)
    half = 0.5 / dim
    return EmbeddingMatrices(rng.uniform(-half, half, (n, dim)), rng.uniform(-half, half, (n, dim)))


def _softplus(x: float) -> float:
    return max(x, 0.0) + np.log1p(np.exp(-abs(x)))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def pair_loss_and_gradient(u_vec, v_vec, label: int):
    """Logistic loss of one (center, context) example and its gradients.

    ``loss = -log sigmoid(s)`` for positives and ``-log sigmoid(-s)`` for
    negatives, with ``s = u . v``.
    """
    u_vec = np.asarray(u_vec, dtype=np.float64)
    v_vec = np.asarray(v_vec, dtype=np.float64)
    s = float(u_vec @ v_vec)
    loss = _softplus(-s) if label == 1 else _softplus(s)
    g = _sigmoid(s) - label
    return loss, g * v_vec, g * u_vec


def negative_samples(k: int, mu: NodeDistribution, rng: np.random.Generator) -> np.ndarray:
    """``k`` i.i.d. node ids drawn from ``mu``."""
    return mu.sample(k, rng)


@numba.njit(cache=True)
def _accumulate(center, context, cu, cv, neg, g_c, g_x, mark_c, mark_x, rows_c, rows_x):
    """Loss and summed gradients of one batch, parameters held fixed."""
    dim = center.shape[1]
    k = neg.shape[1]
    n_c = 0
    n_x = 0
    loss = 0.0
    for i in range(cu.shape[0]):
        u = cu[i]
        if not mark_c[u]:
            mark_c[u] = True
            rows_c[n_c] = u
            n_c += 1
        for j in range(k + 1):
            if j == 0:
                x = cv[i]
                y = 1.0
            else:
                x = neg[i, j - 1]
                y = 0.0
            if not mark_x[x]:
                mark_x[x] = True
                rows_x[n_x] = x
                n_x += 1
            s = 0.0
            for d in range(dim):
                s += center[u, d] * context[x, d]
            z = -s if y == 1.0 else s
            loss += max(z, 0.0) + np.log1p(np.exp(-abs(z)))
            if s >= 0:
                sig = 1.0 / (1.0 + np.exp(-s))
            else:
                e = np.exp(s)
                sig = e / (1.0 + e)
            g = sig - y
            for d in range(dim):
                g_c[u, d] += g * context[x, d]
                g_x[x, d] += g * center[u, d]
    return loss, n_c, n_x


@numba.njit(cache=True)
def _apply_sgd(param, grad, mark, rows, n_rows, lr):
    dim = param.shape[1]
    for r in range(n_rows):
        i = rows[r]
        for d in range(dim):
            param[i, d] -= lr * grad[i, d]
            grad[i, d] = 0.0
        mark[i] = False


@numba.njit(cache=True)
def _apply_adam(param, grad, m, v, mark, rows, n_rows, lr, b1, b2, eps, step, scale):
    # lazy Adam: moments only move for rows present in the batch
    dim = param.shape[1]
    c1 = 1.0 - b1 ** step
    c2 = 1.0 - b2 ** step
    for r in range(n_rows):
        i = rows[r]
        for d in range(dim):
            g = grad[i, d] * scale
            m[i, d] = b1 * m[i, d] + (1.0 - b1) * g
            v[i, d] = b2 * v[i, d] + (1.0 - b2) * g * g
            param[i, d] -= lr * (m[i, d] / c1) / (np.sqrt(v[i, d] / c2) + eps)
            grad[i, d] = 0.0
        mark[i] = False


def _batches(stream: Iterable, size: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    buf_u, buf_v, have = [], [], 0
    for u, v in stream:
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        while len(u):
            take = min(size - have, len(u))
            buf_u.append(u[:take])
            buf_v.append(v[:take])
            have += take
            u, v = u[take:], v[take:]
            if have == size:
                yield np.concatenate(buf_u), np.concatenate(buf_v)
                buf_u, buf_v, have = [], [], 0
    if have:
        yield np.concatenate(buf_u), np.concatenate(buf_v)


class Trainer:
    """Stateful SGNS trainer; :meth:`fit` may be called repeatedly.

    For ``sgd`` each example contributes a full ``lr``-scaled step (the
    word2vec convention, gradients summed over the batch); for ``adam`` the
    batch gradient is the mean over positives.
    """

    def __init__(self, n: int, cfg: TrainConfig, mu: NodeDistribution,
                 init: EmbeddingMatrices | None = None):
        self.cfg = cfg
        self.mu = mu
        self.emb = init.copy() if init is not None else init_embeddings(n, cfg.dim, cfg.seed)
        n, dim = self.emb.center.shape
        self._rng = np.random.default_rng([cfg.seed, 1])
        self._g_c = np.zeros((n, dim))
        self._g_x = np.zeros((n, dim))
        self._mark_c = np.zeros(n, dtype=np.bool_)
        self._mark_x = np.zeros(n, dtype=np.bool_)
        self._rows_c = np.zeros(n, dtype=np.int64)
        self._rows_x = np.zeros(n, dtype=np.int64)
        if cfg.optimizer == "adam":
            self._m = [np.zeros((n, dim)), np.zeros((n, dim))]
            self._v = [np.zeros((n, dim)), np.zeros((n, dim))]
        self.step = 0
        self.losses: list[float] = []

    def fit(self, positives: Iterable) -> EmbeddingMatrices:
        cfg = self.cfg
        c, x = self.emb.center, self.emb.context
        k = cfg.negatives
        for cu, cv in _batches(positives, cfg.batch_size):
            neg = self.mu.sample((len(cu), k), self._rng)
            loss, n_c, n_x = _accumulate(c, x, cu, cv, neg, self._g_c, self._g_x,
                                         self._mark_c, self._mark_x, self._rows_c, self._rows_x)
            self.step += 1
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at step {self.step}")
            self.losses.append(loss / len(cu))
            if cfg.optimizer == "sgd":
                _apply_sgd(c, self._g_c, self._mark_c, self._rows_c, n_c, cfg.lr)
                _apply_sgd(x, self._g_x, self._mark_x, self._rows_x, n_x, cfg.lr)
            else:
                args = (cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, self.step, 1.0 / len(cu))
                _apply_adam(c, self._g_c, self._m[0], self._v[0], self._mark_c, self._rows_c, n_c, *args)
                _apply_adam(x, self._g_x, self._m[1], self._v[1], self._mark_x, self._rows_x, n_x, *args)
            if not (np.isfinite(c[self._rows_c[:n_c]]).all() and np.isfinite(x[self._rows_x[:n_x]]).all()):
                raise TrainingDiverged(f"non-finite embedding entries at step {self.step}")
        return self.emb


def train(positives: Iterable, g: Graph, cfg: TrainConfig, mu: NodeDistribution | None = None,
          init: EmbeddingMatrices | None = None) -> EmbeddingMatrices:
    """Train center/context tables on ``positives`` (an iterable of (u, v) chunks).

    ``mu`` defaults to the ``neg_alpha``-smoothed degree distribution of ``g``.
    """
    if mu is None:
        mu = neg_sampling_distribution(g, cfg.neg_alpha)
    return Trainer(g.n, cfg, mu, init).fit(positives)


def export_embeddings(emb: EmbeddingMatrices | np.ndarray, ids, path) -> None:
    """Write ``n d`` then one ``<external id> v_1 ... v_d`` line per node, sorted by id."""
    mat = emb.center if isinstance(emb, EmbeddingMatrices) else np.asarray(emb)
    ids = np.arange(len(mat)) if ids is None else np.asarray(ids)
    order = np.argsort(ids, kind="stable")
    n, d = mat.shape
    with Path(path).open("w") as fh:
        fh.write(f"{n} {d}\n")
        for i in order:
            fh.write(str(ids[i]) + " " + " ".join(repr(float(val)) for val in mat[i]) + "\n")


def load_embeddings(path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`export_embeddings`: ``(ids, matrix)`` in file order."""
    with open(path) as fh:
        n, d = (int(x) for x in fh.readline().split())
        tbl = np.loadtxt(fh, ndmin=2)
    if tbl.shape != (n, d + 1):
        raise ValueError(f"{path}: expected {n} rows of {d + 1} columns, got {tbl.shape}")
    return tbl[:, 0].astype(np.int64), tbl[:, 1:]
