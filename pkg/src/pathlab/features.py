"""Heterogeneous path-opcode graph construction and dataset export.

Token vocabulary over the path corpus, window-presence PPMI weights
between opcode tokens, TF-IDF weights between paths and tokens, the
combined symmetric adjacency (paths first, opcodes after, unit diagonal,
zero path-path block), and a deterministic text bundle for the classifier.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._kernels import window_counts
from .paths import DataPath, write_paths

DEFAULT_WINDOW = 20
GRAPH_FORMAT_VERSION = 1


class EmptyCorpus(ValueError):
    pass


class IndexClash(ValueError):
    pass


class MissingLabels(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    index: dict[str, int] = field(compare=False)

    def __len__(self) -> int:
        return len(self.tokens)


def build_vocab(corpus: list[DataPath]) -> Vocabulary:
    """Every distinct token, ordered by first appearance across the corpus."""
    if not corpus:
        raise EmptyCorpus("no paths to build a vocabulary from")
    tokens: list[str] = []
    index: dict[str, int] = {}
    for path in corpus:
        for tok in path.tokens:
            if tok not in index:
                index[tok] = len(tokens)
                tokens.append(tok)
    return Vocabulary(tuple(tokens), index)


def compute_ppmi(
    corpus: list[DataPath], vocab: Vocabulary, window: int = DEFAULT_WINDOW
) -> dict[tuple[int, int], float]:
    """Positive pointwise mutual information between token ordinals.

    Probabilities are window-presence frequencies over all sliding windows
    of every path (a short path is one whole window). Keys are (i, j) with
    i < j; entries with non-positive information are dropped.
    """
    if window < 2:
        raise ValueError("window must cover at least 2 tokens")
    vocab_size = len(vocab)
    tok_windows = np.zeros(vocab_size, np.int64)
    pair_windows: Counter[int] = Counter()
    total_windows = 0

    for path in corpus:
        ids = np.fromiter(
            (vocab.index[t] for t in path.tokens), np.int64, len(path.tokens)
        )
        tok, codes, counts, n_windows = window_counts(ids, window, vocab_size)
        tok_windows += tok
        total_windows += n_windows
        for code, c in zip(codes.tolist(), counts.tolist()):
            pair_windows[code] += c

    weights: dict[tuple[int, int], float] = {}
    for code, joint in sorted(pair_windows.items()):
        i, j = divmod(code, vocab_size)
        pmi = math.log(
            joint * total_windows / (tok_windows[i] * tok_windows[j])
        )
        if pmi > 0:
            weights[(i, j)] = pmi
    return weights


def compute_tfidf(
    corpus: list[DataPath], vocab: Vocabulary
) -> dict[tuple[int, int], float]:
    """Raw term frequency scaled by log inverse document frequency.

    Keys are (path position in corpus, token ordinal); tokens present in
    every path carry zero information and are dropped.
    """
    if not corpus:
        raise EmptyCorpus("no paths to weight")
    n_paths = len(corpus)
    df: Counter[int] = Counter()
    per_path: list[Counter[int]] = []
    for path in corpus:
        counts = Counter(vocab.index[t] for t in path.tokens)
        per_path.append(counts)
        df.update(counts.keys())

    weights: dict[tuple[int, int], float] = {}
    for p, counts in enumerate(per_path):
        for ordinal, tf in sorted(counts.items()):
            idf = math.log(n_paths / df[ordinal])
            if idf > 0:
                weights[(p, ordinal)] = tf * idf
    return weights


@dataclass
class HeteroGraph:
    """Symmetric sparse adjacency over path nodes then opcode nodes.

    ``entries`` holds canonical (i, j, w) triples with i <= j, sorted;
    the mirrored half is implicit.
    """

    n_path: int
    n_opcode: int
    entries: list[tuple[int, int, float]]
    window: int = DEFAULT_WINDOW
    log_base: str = "e"

    @property
    def n_nodes(self) -> int:
        return self.n_path + self.n_opcode

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_nodes, self.n_nodes))
        for i, j, w in self.entries:
            dense[i, j] = w
            dense[j, i] = w
        return dense


def assemble_adjacency(
    ppmi: dict[tuple[int, int], float],
    tfidf: dict[tuple[int, int], float],
    n_path: int,
    n_opcode: int,
    window: int = DEFAULT_WINDOW,
) -> HeteroGraph:
    """Combine the two weight families with a unit diagonal.

    Path nodes occupy [0, n_path), opcode nodes [n_path, n_path+n_opcode);
    path-path off-diagonal stays empty.
    """
    entries: list[tuple[int, int, float]] = []
    for k in range(n_path + n_opcode):
        entries.append((k, k, 1.0))
    for (p, t), w in tfidf.items():
        if not (0 <= p < n_path and 0 <= t < n_opcode):
            raise IndexClash(f"path-token pair ({p}, {t}) out of range")
        if w != 0.0:
            entries.append((p, n_path + t, float(w)))
    for (i, j), w in ppmi.items():
        if not (0 <= i < n_opcode and 0 <= j < n_opcode):
            raise IndexClash(f"token pair ({i}, {j}) out of range")
        if i == j:
            continue
        if i > j:
            i, j = j, i
        if w != 0.0:
            entries.append((n_path + i, n_path + j, float(w)))
    entries.sort(key=lambda e: (e[0], e[1]))
    return HeteroGraph(n_path, n_opcode, entries, window=window)


def build_feature_graph(
    corpus: list[DataPath], window: int = DEFAULT_WINDOW
) -> tuple[HeteroGraph, Vocabulary]:
    vocab = build_vocab(corpus)
    ppmi = compute_ppmi(corpus, vocab, window)
    tfidf = compute_tfidf(corpus, vocab)
    graph = assemble_adjacency(ppmi, tfidf, len(corpus), len(vocab), window)
    return graph, vocab


def stratified_split(
    corpus: list[DataPath], ratio: float, seed: int
) -> tuple[list[str], list[str]]:
    """Per-label shuffled train/test id lists at the given train ratio."""
    if not 0 < ratio < 1:
        raise ValueError("split ratio must be in (0, 1)")
    by_label: dict[str, list[str]] = {}
    for p in corpus:
        by_label.setdefault(p.label or "", []).append(p.id)
    rng = random.Random(seed)
    train: list[str] = []
    test: list[str] = []
    for label in sorted(by_label):
        ids = sorted(by_label[label])
        rng.shuffle(ids)
        cut = int(round(ratio * len(ids)))
        train.extend(ids[:cut])
        test.extend(ids[cut:])
    return train, test


def oversample_to_parity(
    train_ids: list[str], labels: dict[str, str], seed: int
) -> dict[str, int]:
    """Multiplicity per duplicated path id so every class count reaches the
    majority's. Returns only ids with multiplicity > 1."""
    by_label: dict[str, list[str]] = {}
    for pid in train_ids:
        by_label.setdefault(labels[pid], []).append(pid)
    if len(by_label) < 2:
        return {}
    target = max(len(ids) for ids in by_label.values())
    rng = random.Random(seed)
    counts: Counter[str] = Counter()
    for label in sorted(by_label):
        ids = sorted(by_label[label])
        need = target - len(ids)
        if need <= 0:
            continue
        rng.shuffle(ids)
        for k in range(need):
            counts[ids[k % len(ids)]] += 1
    return {pid: extra + 1 for pid, extra in sorted(counts.items())}


def _format_weight(w: float) -> str:
    return repr(float(w))


def export_dataset(
    graph: HeteroGraph,
    corpus: list[DataPath],
    out_dir: str | Path,
    ratio: float = 0.9,
    seed: int = 0,
    oversample: bool = True,
    supervised: bool | None = None,
) -> Path:
    """Write the text bundle the classifier consumes.

    Four files — paths (line records), graph (header line then triple
    lines), vocab (token per line), split (single record, supervised mode
    only). Everything is derived solely from inputs and seed, so a rerun
    is byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    labeled = [p for p in corpus if p.label is not None]
    if supervised is None:
        supervised = bool(labeled)
    if supervised and len(labeled) != len(corpus):
        missing = len(corpus) - len(labeled)
        raise MissingLabels(f"{missing} paths lack labels in supervised export")

    vocab = build_vocab(corpus)

    with open(out / "paths", "w") as fp:
        write_paths(corpus, fp)

    with open(out / "graph", "w") as fp:
        header = {
            "format_version": GRAPH_FORMAT_VERSION,
            "n_path": graph.n_path,
            "n_opcode": graph.n_opcode,
            "log_base": graph.log_base,
            "window": graph.window,
        }
        fp.write(json.dumps(header, sort_keys=True, separators=(",", ":")))
        fp.write("\n")
        for i, j, w in graph.entries:
            fp.write(f"{i} {j} {_format_weight(w)}\n")

    with open(out / "vocab", "w") as fp:
        for tok in vocab.tokens:
            fp.write(tok + "\n")

    if supervised:
        train_ids, test_ids = stratified_split(corpus, ratio, seed)
        labels = {p.id: p.label for p in corpus}
        over = (
            oversample_to_parity(train_ids, labels, seed) if oversample else {}
        )
        with open(out / "split", "w") as fp:
            fp.write(
                json.dumps(
                    {
                        "train_ids": train_ids,
                        "test_ids": test_ids,
                        "seed": seed,
                        "oversample_counts": over,
                    },
                    sort_keys=True,
                    separators=(",", ":"),
                )
            )
            fp.write("\n")
    return out


def load_graph(path: str | Path) -> HeteroGraph:
    with open(path) as fp:
        header = json.loads(fp.readline())
        entries = []
        for line in fp:
            line = line.strip()
            if not line:
                continue
            i, j, w = line.split()
            entries.append((int(i), int(j), float(w)))
    return HeteroGraph(
        n_path=header["n_path"],
        n_opcode=header["n_opcode"],
        entries=entries,
        window=header["window"],
        log_base=header["log_base"],
    )
