"""Embedding analysis: cosine distances, average-linkage dendrograms, t-SNE.

All three model families expose a tied input-embedding table; its rows are
the vectors analyzed here. Distances are 1 - cos(u, v), in [0, 2].
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, InsufficientData, OOVWordError, ShapeError,
                     ZeroVectorError)
from .models import LanguageModel
from .vocab import Vocabulary

log = logging.getLogger(__name__)


@dataclass
class EmbeddingMatrix:
    words: list[str]
    vectors: np.ndarray  # one row per word


def extract_embeddings(model: LanguageModel, vocab: Vocabulary,
                       words: list[str]) -> EmbeddingMatrix:
    """Input-embedding rows for the requested words, in request order."""
    table = model.params["embedding"].data
    rows = []
    for word in words:
        if word not in vocab.word_to_id:
            raise OOVWordError(f"word {word!r} is not in the vocabulary")
        rows.append(table[vocab.word_to_id[word]])
    return EmbeddingMatrix(list(words), np.array(rows))


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine distance undefined for a zero vector")
    d = 1.0 - float(np.dot(u, v)) / (nu * nv)
    return min(2.0, max(0.0, d))


def distance_matrix(vectors: np.ndarray) -> np.ndarray:
    """Pairwise 1 - cos matrix: symmetric, zero diagonal, entries in [0, 2]."""
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVectorError("zero vector in embedding matrix")
    unit = vectors / norms[:, None]
    d = 1.0 - unit @ unit.T
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    return np.clip(d, 0.0, 2.0)


# ---------------------------------------------------------------------------
# average-linkage clustering


@dataclass
class DendrogramNode:
    left: "DendrogramNode | str | int"
    right: "DendrogramNode | str | int"
    height: float

    def leaves(self) -> list:
        out = []
        for child in (self.left, self.right):
            if isinstance(child, DendrogramNode):
                out.extend(child.leaves())
            else:
                out.append(child)
        return out


@dataclass
class Merge:
    a: int  # smallest leaf index of one cluster
    b: int  # smallest leaf index of the other (a < b)
    height: float
    members: tuple[int, ...]  # sorted leaves of the merged cluster


def linkage(dist: np.ndarray) -> list[Merge]:
    """Sequential average-linkage merges under the Lance-Williams update.
    Ties pick the pair with the smallest leaf indices."""
    dist = np.asarray(dist, dtype=np.float64)
    n = dist.shape[0]
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise ShapeError("distance matrix must be square", dist.shape)
    if n < 2:
        raise InsufficientData("need at least 2 points to cluster")
    members: dict[int, tuple[int, ...]] = {i: (i,) for i in range(n)}
    d: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            d[(i, j)] = float(dist[i, j])
    merges: list[Merge] = []
    while len(members) > 1:
        (a, b), height = min(d.items(), key=lambda kv: (kv[1], kv[0]))
        na, nb = len(members[a]), len(members[b])
        for k in list(members):
            if k in (a, b):
                continue
            key_ka = (min(k, a), max(k, a))
            key_kb = (min(k, b), max(k, b))
            dka = d.pop(key_ka)
            dkb = d.pop(key_kb)
            d[key_ka] = (na * dka + nb * dkb) / (na + nb)
        del d[(a, b)]
        members[a] = tuple(sorted(members[a] + members[b]))
        del members[b]
        merges.append(Merge(a, b, height, members[a]))
    return merges


def agglomerative_cluster(dist: np.ndarray, labels: list | None = None) -> DendrogramNode:
    """Root of the average-linkage dendrogram (leaves are labels or indices)."""
    merges = linkage(dist)
    nodes: dict[int, DendrogramNode | str | int] = {}
    n = np.asarray(dist).shape[0]
    for i in range(n):
        nodes[i] = labels[i] if labels is not None else i
    root = None
    for m in merges:
        root = DendrogramNode(nodes[m.a], nodes[m.b], m.height)
        nodes[m.a] = root
        del nodes[m.b]
    return root


# ---------------------------------------------------------------------------
# t-SNE


def _conditional_probs(dist_row: np.ndarray, i: int, target_entropy: float,
                       tol: float = 1e-5, max_iter: int = 50) -> np.ndarray:
    """Binary-search the precision beta so the conditional distribution over
    the other points has the requested Shannon entropy (nats)."""
    beta, beta_lo, beta_hi = 1.0, 0.0, np.inf
    d = np.delete(dist_row, i)
    for _ in range(max_iter):
        p = np.exp(-d * beta)
        total = p.sum()
        if total <= 0.0:
            entropy = 0.0
            p = np.zeros_like(d)
        else:
            p = p / total
            nz = p > 0
            entropy = float(-(p[nz] * np.log(p[nz])).sum())
        diff = entropy - target_entropy
        if abs(diff) < tol:
            break
        if diff > 0:  # too flat: sharpen
            beta_lo = beta
            beta = beta * 2.0 if beta_hi == np.inf else (beta + beta_hi) / 2.0
        else:
            beta_hi = beta
            beta = beta / 2.0 if beta_lo == 0.0 else (beta + beta_lo) / 2.0
    out = np.insert(p, i, 0.0)
    return out


def tsne(dist: np.ndarray, perplexity: float = 30.0, iterations: int = 1000,
         seed: int = 0, learning_rate: float = 200.0,
         return_trace: bool = False):
    """2-D embedding of a precomputed distance matrix.

    Standard recipe: per-point bandwidths matched to the target perplexity by
    binary search, symmetrized affinities, Student-t low-dimensional kernel,
    early exaggeration x12 for the first 250 iterations, momentum 0.5 then
    0.8. Deterministic for a fixed seed.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise ShapeError("t-SNE needs a square distance matrix", dist.shape)
    if not np.allclose(dist, dist.T, atol=1e-8):
        raise ShapeError("t-SNE needs a symmetric distance matrix", dist.shape)
    n = dist.shape[0]
    if n < 4:
        raise InsufficientData("t-SNE needs at least 4 points")
    effective = min(perplexity, (n - 1) / 3.0)
    target_entropy = float(np.log(effective))

    cond = np.zeros((n, n))
    for i in range(n):
        cond[i] = _conditional_probs(dist[i], i, target_entropy)
    p = (cond + cond.T) / (2.0 * n)
    p = np.maximum(p, 1e-12)

    exaggeration_until = min(250, iterations)
    momentum_switch = 250
    rng = np.random.default_rng(seed)
    y = rng.normal(0.0, 1e-4, (n, 2))
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)
    trace = []

    def kl(q):
        return float((p * np.log(p / q)).sum())

    for it in range(iterations):
        pe = p * 12.0 if it < exaggeration_until else p
        diff = y[:, None, :] - y[None, :, :]
        num = 1.0 / (1.0 + (diff ** 2).sum(axis=2))
        np.fill_diagonal(num, 0.0)
        q_raw = num / num.sum()
        q = np.maximum(q_raw, 1e-12)
        pq = (pe - q_raw) * num
        grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)
        momentum = 0.5 if it < momentum_switch else 0.8
        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        velocity = momentum * velocity - learning_rate * gains * grad
        y = y + velocity
        y = y - y.mean(axis=0)
        if return_trace and (it + 1) % 50 == 0:
            trace.append((it + 1, kl(q)))
    if return_trace:
        return y, trace
    return y


def select_category_words(category_words: list[str], frequencies,
                          vocab: Vocabulary, k: int = 6) -> list[str]:
    """k most frequent in-vocabulary members (frequency desc, then word);
    fewer than k available emits a warning and returns them all."""
    known = set(vocab.words())
    usable = [w for w in category_words if w in known]
    usable.sort(key=lambda w: (-frequencies.get(w, 0), w))
    if len(usable) < k:
        log.warning("category has only %d in-vocabulary words (wanted %d)",
                    len(usable), k)
        return usable
    return usable[:k]


def load_categories(path) -> dict[str, list[str]]:
    """Category file: one `label: w1 w2 ...` per line; labels disjoint."""
    categories: dict[str, list[str]] = {}
    seen_words: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ConfigError(f"category line {line_no}: expected 'label: words'")
            label, _, words = line.partition(":")
            label = label.strip()
            if label in categories:
                raise ConfigError(f"category line {line_no}: duplicate label {label!r}")
            members = words.split()
            for w in members:
                if w in seen_words:
                    raise ConfigError(f"category line {line_no}: word {w!r} already "
                                      f"in category {seen_words[w]!r}")
                seen_words[w] = label
            categories[label] = members
    if not categories:
        raise ConfigError(f"no categories in {path}")
    return categories


# ---------------------------------------------------------------------------
# exports


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _deterministic_figure():
    import matplotlib
    matplotlib.use("Agg", force=True)
    matplotlib.rcParams["svg.hashsalt"] = "tinylm"
    import matplotlib.pyplot as plt
    return plt


def export_scatter_csv(path, words: list[str], labels: list[str],
                       coords: np.ndarray) -> None:
    """CSV word,category,x,y; floats use repr so parsing round-trips exactly."""
    if len(words) == 0:
        raise ConfigError("nothing to export")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["word", "category", "x", "y"])
        for word, label, (x, y) in zip(words, labels, coords):
            writer.writerow([word, label, repr(float(x)), repr(float(y))])


def read_scatter_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    words = [r[0] for r in rows]
    labels = [r[1] for r in rows]
    coords = np.array([[float(r[2]), float(r[3])] for r in rows])
    return words, labels, coords


def export_scatter_svg(path, words: list[str], labels: list[str],
                       coords: np.ndarray, title: str = "") -> None:
    if len(words) == 0:
        raise ConfigError("nothing to export")
    plt = _deterministic_figure()
    fig, ax = plt.subplots(figsize=(8, 8))
    order = list(dict.fromkeys(labels))
    colors = {label: _PALETTE[i % len(_PALETTE)] for i, label in enumerate(order)}
    for label in order:
        idx = [i for i, l in enumerate(labels) if l == label]
        ax.scatter(coords[idx, 0], coords[idx, 1], s=36, color=colors[label],
                   label=label)
        for i in idx:
            ax.annotate(words[i], coords[i], fontsize=7,
                        xytext=(3, 3), textcoords="offset points")
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def export_merges_csv(path, merges: list[Merge], words: list[str]) -> None:
    if not merges:
        raise ConfigError("nothing to export")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "height", "members"])
        for step, m in enumerate(merges, start=1):
            names = " ".join(words[i] for i in m.members)
            writer.writerow([str(step), repr(float(m.height)), names])


def _leaf_order(node) -> list:
    if isinstance(node, DendrogramNode):
        return _leaf_order(node.left) + _leaf_order(node.right)
    return [node]


def export_dendrogram_svg(path, root: DendrogramNode, labels: list[str],
                          title: str = "") -> None:
    """Hand-drawn dendrogram: leaves on the x axis, merge height on y."""
    if root is None:
        raise ConfigError("nothing to export")
    plt = _deterministic_figure()
    order = _leaf_order(root)
    x_of = {leaf: i for i, leaf in enumerate(order)}
    fig, ax = plt.subplots(figsize=(max(6, len(order) * 0.35), 6))

    def draw(node) -> tuple[float, float]:
        if not isinstance(node, DendrogramNode):
            return float(x_of[node]), 0.0
        xl, hl = draw(node.left)
        xr, hr = draw(node.right)
        h = node.height
        ax.plot([xl, xl], [hl, h], color="#444444", lw=1.0)
        ax.plot([xr, xr], [hr, h], color="#444444", lw=1.0)
        ax.plot([xl, xr], [h, h], color="#444444", lw=1.0)
        return (xl + xr) / 2.0, h

    draw(root)
    ax.set_xticks(range(len(order)))
    ax.set_xticklabels([str(l) for l in order], rotation=90, fontsize=7)
    ax.set_ylabel("merge distance (1 - cos)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
