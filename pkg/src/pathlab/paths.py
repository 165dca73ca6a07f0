"""Data-path enumeration and tokenization.

Bounded depth-first traversal from every function entry of a connected
graph, feasibility filtering, and conversion of surviving walks into
opcode/operand token sequences.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

from .disasm import Instruction
from .validator import SymbolicStack, validate_path

ENTRY_FALLBACK = "fallback"

TOKEN_LARGECONST = "LARGECONST"


@dataclass(frozen=True, slots=True)
class PathLimits:
    max_paths_per_entry: int = 64
    max_path_length: int = 2048
    max_block_revisits: int = 2

    def __post_init__(self):
        if min(self.max_paths_per_entry, self.max_path_length, self.max_block_revisits) < 1:
            raise ValueError("limits must be strictly positive")


@dataclass(frozen=True, slots=True)
class DataPath:
    id: str
    blocks: tuple[int, ...]
    tokens: tuple[str, ...]
    entry: str
    label: str | None = None

    def record(self) -> dict:
        doc = {"id": self.id, "entry": self.entry, "tokens": list(self.tokens)}
        if self.label is not None:
            doc["label"] = self.label
        return doc


def operand_token(value: int) -> str:
    """Bucket a push operand: small values stay literal, 4-byte-range
    values keep their identity as SEL_ tokens, everything else collapses."""
    if value < 256:
        return f"{value:#04x}"
    if value <= 0xFFFFFFFF:
        return f"SEL_{value:08x}"
    return TOKEN_LARGECONST


def tokenize_instructions(instrs) -> list[str]:
    tokens: list[str] = []
    for ins in instrs:
        tokens.append(ins.spec.mnemonic)
        if ins.spec.immediate_len > 0:
            tokens.append(operand_token(ins.push_value))
    return tokens


def tokenize_blocks(graph, block_ids) -> list[str]:
    tokens: list[str] = []
    for bid in block_ids:
        tokens.extend(tokenize_instructions(graph.block(bid).code))
    return tokens


def path_id(tokens) -> str:
    digest = hashlib.sha256("\x1f".join(tokens).encode()).hexdigest()
    return digest[:32]


def _entry_points(graph) -> list[tuple[int, str]]:
    """(block id, entry name) pairs: the contract entry plus one per selector."""
    entries = {graph.entry_id: ENTRY_FALLBACK}
    for sel in getattr(graph, "selectors", []):
        entries.setdefault(sel.entry_block, sel.hex)
    return sorted(entries.items())


def enumerate_paths(graph, limits: PathLimits = PathLimits()) -> list[DataPath]:
    """All bounded feasible walks from each entry, deduplicated by content.

    Successors are explored in ascending block-id order; a walk is emitted
    when its tip has no successors, or when every successor is barred by
    the revisit bound or the token budget. Emitted walks must validate
    feasible: walks rooted at the contract entry run against an empty
    stack, walks rooted at a function entry against an unknown inherited
    one. Identical token sequences collapse to the first occurrence.
    """
    out: list[DataPath] = []
    seen_ids: set[str] = set()
    token_count: dict[int, int] = {}

    def block_tokens(bid: int) -> int:
        if bid not in token_count:
            token_count[bid] = len(tokenize_instructions(graph.block(bid).code))
        return token_count[bid]

    for entry_block, entry_name in _entry_points(graph):
        if graph.block(entry_block) is None:
            continue
        emitted = 0
        frames: list[tuple[list[int], dict[int, int], int]] = [
            ([entry_block], {entry_block: 1}, block_tokens(entry_block))
        ]
        while frames and emitted < limits.max_paths_per_entry:
            walk, counts, tok_len = frames.pop()
            viable = []
            for succ in reversed(graph.successors(walk[-1])):
                if counts.get(succ, 0) >= limits.max_block_revisits:
                    continue
                if tok_len + block_tokens(succ) > limits.max_path_length:
                    continue
                viable.append(succ)
            if viable:
                # reversed above, so the lowest id is popped first
                for succ in viable:
                    nxt = dict(counts)
                    nxt[succ] = nxt.get(succ, 0) + 1
                    frames.append((walk + [succ], nxt, tok_len + block_tokens(succ)))
                continue

            initial = SymbolicStack(bottomless=entry_name != ENTRY_FALLBACK)
            condition = validate_path(graph, walk, initial)
            if not condition.feasible:
                continue
            tokens = tuple(tokenize_blocks(graph, walk))
            pid = path_id(tokens)
            if pid in seen_ids:
                continue
            seen_ids.add(pid)
            out.append(DataPath(pid, tuple(walk), tokens, entry_name))
            emitted += 1

    return out


def label_paths(paths: list[DataPath], label: str) -> list[DataPath]:
    return [replace(p, label=label) for p in paths]


def write_paths(paths: list[DataPath], fp) -> None:
    """Line-delimited records, one per path, stable field order."""
    for p in paths:
        fp.write(json.dumps(p.record(), sort_keys=True, separators=(",", ":")))
        fp.write("\n")


def read_paths(fp) -> list[DataPath]:
    out = []
    for line in fp:
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        out.append(
            DataPath(
                id=doc["id"],
                blocks=tuple(doc.get("blocks", ())),
                tokens=tuple(doc["tokens"]),
                entry=doc["entry"],
                label=doc.get("label"),
            )
        )
    return out
