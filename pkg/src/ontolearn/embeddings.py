"""Skip-gram word embeddings with negative sampling.

Training runs single-threaded with a linear congruential generator for all
random draws, so identical inputs and seed reproduce identical tables.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numba
import numpy as np

from .corpus import Verbatim
from .fileio import atomic_open


@dataclass
class EmbeddingTable:
    dim: int
    words: list[str]
    matrix: np.ndarray
    min_count: int = 5
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64).reshape(len(self.words), self.dim)
        self.index = {w: i for i, w in enumerate(self.words)}
        self._zero = np.zeros(self.dim)
        self._zero.setflags(write=False)

    @property
    def vectors(self) -> dict[str, np.ndarray]:
        return {w: self.matrix[i] for i, w in enumerate(self.words)}

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def __len__(self) -> int:
        return len(self.words)

    def lookup(self, word: str) -> np.ndarray:
        i = self.index.get(word)
        return self._zero if i is None else self.matrix[i]

    def save(self, path) -> None:
        with atomic_open(path) as fh:
            fh.write(f"{len(self.words)} {self.dim}\n")
            for w, row in zip(self.words, self.matrix):
                fh.write(w + " " + " ".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path, min_count: int = 1) -> "EmbeddingTable":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError(f"{path}: header must be '<vocab_size> <dim>'")
            size, dim = int(header[0]), int(header[1])
            words, rows = [], []
            for k, line in enumerate(fh, start=2):
                parts = line.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    raise ValueError(f"{path}:{k}: expected {dim} values")
                words.append(parts[0])
                rows.append([float(x) for x in parts[1:]])
        if len(words) != size:
            raise ValueError(f"{path}: header announces {size} words, found {len(words)}")
        return cls(dim, words, np.array(rows).reshape(len(words), dim), min_count)


def lookup(table: EmbeddingTable, word: str) -> np.ndarray:
    return table.lookup(word)


def average_embedding(table: EmbeddingTable, phrase: str | Sequence[str]) -> np.ndarray:
    words = phrase.split() if isinstance(phrase, str) else list(phrase)
    if not words:
        raise ValueError("phrase must contain at least one token")
    return np.mean([table.lookup(w) for w in words], axis=0)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"vector length mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


@numba.njit(cache=True)
def _sgns_epochs(tokens, offsets, w_in, w_out, cum_noise, window, negative,
                 epochs, alpha0, seed):
    dim = w_in.shape[1]
    n_tokens = tokens.shape[0]
    total = epochs * n_tokens
    done = 0
    state = np.uint64(seed) * np.uint64(2654435761) + np.uint64(1)
    mult = np.uint64(25214903917)
    inc = np.uint64(11)
    noise_total = cum_noise[-1]
    grad = np.zeros(dim)
    for _ in range(epochs):
        for s in range(offsets.shape[0] - 1):
            lo = offsets[s]
            hi = offsets[s + 1]
            for pos in range(lo, hi):
                alpha = alpha0 * max(1.0 - done / (total + 1.0), 0.0001)
                done += 1
                center = tokens[pos]
                state = state * mult + inc
                b = np.int64((state >> np.uint64(16)) % np.uint64(window))
                for cpos in range(pos - window + b, pos + window - b + 1):
                    if cpos == pos or cpos < lo or cpos >= hi:
                        continue
                    ctx = tokens[cpos]
                    for k in range(dim):
                        grad[k] = 0.0
                    for d in range(negative + 1):
                        if d == 0:
                            target = center
                            label = 1.0
                        else:
                            state = state * mult + inc
                            r = ((state >> np.uint64(16)) % np.uint64(1 << 30)) / float(1 << 30)
                            target = np.searchsorted(cum_noise, r * noise_total, side="right")
                            if target >= cum_noise.shape[0]:
                                target = cum_noise.shape[0] - 1
                            if target == center:
                                continue
                            label = 0.0
                        f = 0.0
                        for k in range(dim):
                            f += w_in[ctx, k] * w_out[target, k]
                        if f > 6.0:
                            sig = 1.0
                        elif f < -6.0:
                            sig = 0.0
                        else:
                            sig = 1.0 / (1.0 + np.exp(-f))
                        g = (label - sig) * alpha
                        for k in range(dim):
                            grad[k] += g * w_out[target, k]
                            w_out[target, k] += g * w_in[ctx, k]
                    for k in range(dim):
                        w_in[ctx, k] += grad[k]
    return w_in


def train_skipgram(
    corpus: Iterable[Verbatim] | Iterable[Sequence[str]],
    dim: int = 100,
    window: int = 5,
    epochs: int = 5,
    negative: int = 5,
    min_count: int = 5,
    seed: int = 1,
    alpha: float = 0.025,
) -> EmbeddingTable:
    sentences = [v.norms if isinstance(v, Verbatim) else list(v) for v in corpus]
    if not sentences:
        raise ValueError("corpus is empty")
    counts = Counter(w for s in sentences for w in s)
    vocab = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))
    if not vocab:
        raise ValueError(f"no word occurs at least min_count={min_count} times")
    index = {w: i for i, w in enumerate(vocab)}

    flat: list[int] = []
    offsets = [0]
    for s in sentences:
        ids = [index[w] for w in s if w in index]
        if len(ids) > 1:
            flat.extend(ids)
            offsets.append(len(flat))
    tokens = np.asarray(flat, dtype=np.int64)
    offsets_arr = np.asarray(offsets, dtype=np.int64)

    rng = np.random.default_rng(seed)
    w_in = (rng.random((len(vocab), dim)) - 0.5) / dim
    w_out = np.zeros((len(vocab), dim))
    cum_noise = np.cumsum(np.array([counts[w] for w in vocab], dtype=np.float64) ** 0.75)
    if len(tokens):
        _sgns_epochs(tokens, offsets_arr, w_in, w_out, cum_noise, int(window),
                     int(negative), int(epochs), float(alpha), int(seed))
    return EmbeddingTable(dim, vocab, w_in, min_count)
