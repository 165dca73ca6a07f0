"""Single-contract control-flow graph recovery.

Blocks are cut at jumping/stopping operations and JUMPDESTs; jump edges are
resolved by block-local constant tracking on the symbolic stack; function
selectors are lifted from the dispatcher and used to carve the graph into
per-function segments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .disasm import (
    KIND_CALL,
    KIND_CONDITIONAL_JUMP,
    KIND_JUMP,
    KIND_STOP,
    Instruction,
    disassemble,
)
from .validator import (
    ConstantWord,
    SelectorProbe,
    SymbolicStack,
    step_symbolic,
)

NODE_STARTING = "starting"
NODE_ENDING = "ending"
NODE_CONDITIONAL = "conditional"
NODE_PLAIN = "plain"

EDGE_FALL_THROUGH = "fall_through"
EDGE_JUMP_TAKEN = "jump_taken"
EDGE_JUMP_NOT_TAKEN = "jump_not_taken"
EDGE_CALL = "call"
EDGE_RETURN_LINK = "return_link"

SOURCE_PUSH4 = "dispatcher_push4"
SOURCE_MASKED = "masked_pattern"
SOURCE_SHR = "shr_pattern"

FORMAT_VERSION = 1


@dataclass(frozen=True, slots=True)
class BasicBlock:
    id: int
    node_type: str
    code: tuple[Instruction, ...]
    entry_offset: int

    @property
    def terminator(self) -> Instruction:
        return self.code[-1]

    @property
    def starts_with_jumpdest(self) -> bool:
        return self.code[0].spec.mnemonic == "JUMPDEST"


@dataclass(frozen=True, slots=True)
class Edge:
    from_id: int
    to_id: int
    kind: str


@dataclass
class Cfg:
    """Immutable-by-convention graph of one contract's basic blocks."""

    nodes: dict[int, BasicBlock]
    edges: list[Edge]
    entry_id: int
    unresolved: dict[int, str] = field(default_factory=dict)

    def block(self, block_id: int) -> BasicBlock | None:
        return self.nodes.get(block_id)

    def block_at_offset(self, offset: int) -> BasicBlock | None:
        return self._by_offset.get(offset)

    @property
    def _by_offset(self) -> dict[int, BasicBlock]:
        cached = self.__dict__.get("_offset_index")
        if cached is None:
            cached = {b.entry_offset: b for b in self.nodes.values()}
            self.__dict__["_offset_index"] = cached
        return cached

    def edges_from(self, block_id: int) -> list[Edge]:
        return [e for e in self.edges if e.from_id == block_id]

    def successors(self, block_id: int) -> list[int]:
        return sorted(e.to_id for e in self.edges if e.from_id == block_id)

    def edge_between(self, from_id: int, to_id: int) -> Edge | None:
        for e in self.edges:
            if e.from_id == from_id and e.to_id == to_id:
                return e
        return None


def partition_blocks(instrs: list[Instruction], split_calls: bool = False) -> list[BasicBlock]:
    """Cut the instruction stream into basic blocks.

    A block starts at offset 0, at every JUMPDEST, and right after every
    jump/conditional-jump/stop instruction. With ``split_calls`` the four
    calling operations also terminate blocks — the refinement the
    cross-contract connector works on.
    """
    if not instrs:
        return []

    terminator_kinds = {KIND_JUMP, KIND_CONDITIONAL_JUMP, KIND_STOP}
    if split_calls:
        terminator_kinds.add(KIND_CALL)

    leaders = {0}
    for k, ins in enumerate(instrs):
        if ins.spec.mnemonic == "JUMPDEST":
            leaders.add(k)
        if ins.spec.kind in terminator_kinds and k + 1 < len(instrs):
            leaders.add(k + 1)

    order = sorted(leaders)
    blocks: list[BasicBlock] = []
    for bid, start in enumerate(order):
        end = order[bid + 1] if bid + 1 < len(order) else len(instrs)
        code = tuple(instrs[start:end])
        blocks.append(
            BasicBlock(
                id=bid,
                node_type=_node_type(code, code[0].offset),
                code=code,
                entry_offset=code[0].offset,
            )
        )
    return blocks


def _node_type(code: tuple[Instruction, ...], entry_offset: int) -> str:
    kind = code[-1].spec.kind
    if kind == KIND_STOP:
        return NODE_ENDING
    if kind == KIND_CONDITIONAL_JUMP:
        return NODE_CONDITIONAL
    if entry_offset == 0:
        return NODE_STARTING
    return NODE_PLAIN


def _emulate_block(block: BasicBlock) -> SymbolicStack:
    """Block-local constant tracking from an unknown incoming stack."""
    stack = SymbolicStack(bottomless=True)
    for k, ins in enumerate(block.code[:-1]):
        step_symbolic(stack, ins, step=k)
    return stack


def resolve_edges(blocks: list[BasicBlock]) -> Cfg:
    """Attach fall-through and jump edges to partitioned blocks.

    JUMP/JUMPI targets are read off the block-locally emulated stack; a
    target that stays symbolic (or names no JUMPDEST) yields no taken edge
    and an UnresolvedJump flag on the block.
    """
    by_offset = {b.entry_offset: b for b in blocks}
    edges: list[Edge] = []
    unresolved: dict[int, str] = {}

    for idx, block in enumerate(blocks):
        term = block.terminator
        kind = term.spec.kind
        nxt = blocks[idx + 1] if idx + 1 < len(blocks) else None

        if kind == KIND_STOP:
            continue

        if kind in (KIND_JUMP, KIND_CONDITIONAL_JUMP):
            stack = _emulate_block(block)
            target = stack.peek(1)
            if isinstance(target, ConstantWord):
                dest = by_offset.get(target.value)
                if dest is not None and dest.starts_with_jumpdest:
                    edges.append(Edge(block.id, dest.id, EDGE_JUMP_TAKEN))
                else:
                    unresolved[block.id] = (
                        f"constant target {target.value:#x} is not a JUMPDEST"
                    )
            else:
                unresolved[block.id] = "jump target is not a compile-time constant"
            if kind == KIND_CONDITIONAL_JUMP and nxt is not None:
                edges.append(Edge(block.id, nxt.id, EDGE_JUMP_NOT_TAKEN))
            continue

        # block ended at a JUMPDEST boundary or a split call: execution
        # continues into the next block
        if nxt is not None:
            edges.append(Edge(block.id, nxt.id, EDGE_FALL_THROUGH))

    entry_id = blocks[0].id if blocks else 0
    return Cfg({b.id: b for b in blocks}, edges, entry_id, unresolved)


def build_cfg(code: bytes, split_calls: bool = False) -> Cfg:
    return resolve_edges(partition_blocks(disassemble(code), split_calls))


@dataclass(frozen=True, slots=True)
class Selector:
    value: bytes
    source: str
    entry_block: int

    @property
    def hex(self) -> str:
        return self.value.hex()


def _dispatcher_style(cfg: Cfg, chain: list[BasicBlock]) -> str:
    """Classify how the dispatcher loads the 4-byte id from calldata."""
    for block in chain:
        names = [ins.spec.mnemonic for ins in block.code]
        if "CALLDATALOAD" not in names:
            continue
        for k, ins in enumerate(block.code):
            name = ins.spec.mnemonic
            if name == "SHR":
                return SOURCE_SHR
            if name == "DIV":
                return SOURCE_MASKED
            if name == "AND" and k > 0:
                prev = block.code[k - 1]
                if prev.push_value == 0xFFFFFFFF:
                    return SOURCE_MASKED
    return SOURCE_PUSH4


def extract_selectors(cfg: Cfg) -> list[Selector]:
    """Lift 4-byte function ids from the dispatcher.

    Walks blocks reachable from the entry, emulating each one; a JUMPI whose
    condition is an EQ against a PUSH4 constant (directly, or after the
    masked/shifted calldata preparations) and whose target resolves to a
    JUMPDEST registers a selector. Matched function bodies are not descended
    into, so body-internal comparisons stay out of the dispatcher scan.
    """
    if not cfg.nodes:
        return []

    found: dict[bytes, Selector] = {}
    scanned: list[BasicBlock] = []
    visited: set[int] = set()
    worklist = [cfg.entry_id]
    body_entries: set[int] = set()

    while worklist:
        bid = worklist.pop(0)
        if bid in visited or bid in body_entries:
            continue
        visited.add(bid)
        block = cfg.block(bid)
        if block is None:
            continue
        scanned.append(block)

        term = block.terminator
        selector_target: int | None = None
        if term.spec.kind == KIND_CONDITIONAL_JUMP:
            stack = _emulate_block(block)
            dest_cell = stack.peek(1)
            cond_cell = stack.peek(2)
            if isinstance(cond_cell, SelectorProbe) and isinstance(dest_cell, ConstantWord):
                dest = cfg.block_at_offset(dest_cell.value)
                if dest is not None and dest.starts_with_jumpdest:
                    value = cond_cell.value.to_bytes(4, "big")
                    if value not in found:
                        found[value] = Selector(value, SOURCE_PUSH4, dest.id)
                    selector_target = dest.id
                    body_entries.add(dest.id)

        for e in cfg.edges_from(bid):
            if e.to_id != selector_target:
                worklist.append(e.to_id)

    if not found:
        return []

    style = _dispatcher_style(cfg, scanned)
    out = [
        Selector(sel.value, style, sel.entry_block)
        for sel in found.values()
    ]
    out.sort(key=lambda s: s.value)
    return out


@dataclass
class FunctionSegment:
    selector: Selector | None
    blocks: list[int]
    has_calls: bool
    ends_with_return: bool

    @property
    def label(self) -> str:
        return self.selector.hex if self.selector else "fallback"


def _reachable(cfg: Cfg, start: int, barriers: set[int]) -> list[int]:
    seen = {start}
    order = [start]
    queue = [start]
    while queue:
        bid = queue.pop(0)
        for succ in cfg.successors(bid):
            if succ in seen or succ in barriers:
                continue
            seen.add(succ)
            order.append(succ)
            queue.append(succ)
    return sorted(order)


def _segment(cfg: Cfg, selector: Selector | None, block_ids: list[int]) -> FunctionSegment:
    has_calls = any(
        ins.spec.kind == KIND_CALL
        for bid in block_ids
        for ins in cfg.block(bid).code
    )
    ends_with_return = any(
        cfg.block(bid).terminator.spec.mnemonic == "RETURN" for bid in block_ids
    )
    return FunctionSegment(selector, block_ids, has_calls, ends_with_return)


def segment_functions(cfg: Cfg, selectors: list[Selector]) -> list[FunctionSegment]:
    """Carve the CFG into per-selector subgraphs plus one fallback segment.

    A selector's segment is everything reachable from its entry block
    without crossing another selector's entry; the fallback collects
    entry-reachable blocks owned by no selector (the dispatcher itself lands
    there). Orphan blocks reachable from nowhere appear in no segment.
    """
    if not cfg.nodes:
        return []

    entries = {s.entry_block for s in selectors}
    segments: list[FunctionSegment] = []
    owned: set[int] = set()

    for sel in selectors:
        block_ids = _reachable(cfg, sel.entry_block, entries - {sel.entry_block})
        owned.update(block_ids)
        segments.append(_segment(cfg, sel, block_ids))

    fallback_ids = [
        bid for bid in _reachable(cfg, cfg.entry_id, entries) if bid not in owned
    ]
    if fallback_ids:
        segments.append(_segment(cfg, None, fallback_ids))
    return segments


def cfg_to_dict(cfg: Cfg, selectors: list[Selector] | None = None) -> dict:
    """Structured-document export (JSON-ready)."""
    doc = {
        "format_version": FORMAT_VERSION,
        "entry": cfg.entry_id,
        "nodes": [
            {
                "id": b.id,
                "type": b.node_type,
                "entry_offset": b.entry_offset,
                "opcodes": [str(ins) for ins in b.code],
            }
            for b in cfg.nodes.values()
        ],
        "edges": [
            {"from": e.from_id, "to": e.to_id, "kind": e.kind} for e in cfg.edges
        ],
    }
    if cfg.unresolved:
        doc["unresolved"] = [
            {"block": bid, "reason": reason} for bid, reason in sorted(cfg.unresolved.items())
        ]
    if selectors is not None:
        doc["selectors"] = [
            {"hex4": s.hex, "entry_block": s.entry_block, "source": s.source}
            for s in selectors
        ]
    return doc


def cfg_from_dict(doc: dict, code: bytes) -> Cfg:
    """Rebuild a Cfg exported by cfg_to_dict against its bytecode."""
    instrs = disassemble(code)
    by_offset = {ins.offset: ins for ins in instrs}
    nodes: dict[int, BasicBlock] = {}
    for nd in doc["nodes"]:
        block_instrs = []
        off = nd["entry_offset"]
        for _ in nd["opcodes"]:
            ins = by_offset[off]
            block_instrs.append(ins)
            off += ins.size
        nodes[nd["id"]] = BasicBlock(
            nd["id"], nd["type"], tuple(block_instrs), nd["entry_offset"]
        )
    edges = [Edge(e["from"], e["to"], e["kind"]) for e in doc["edges"]]
    unresolved = {u["block"]: u["reason"] for u in doc.get("unresolved", [])}
    return Cfg(nodes, edges, doc["entry"], unresolved)


def cfg_to_dot(cfg: Cfg, name: str = "cfg") -> str:
    """Graph-description text for visualization tools."""
    lines = [f"digraph {name} {{", "  node [shape=box fontname=monospace];"]
    for b in cfg.nodes.values():
        label = f"#{b.id} @{b.entry_offset:#x} [{b.node_type}]\\n"
        label += "\\n".join(str(ins) for ins in b.code[:6])
        if len(b.code) > 6:
            label += f"\\n... ({len(b.code) - 6} more)"
        lines.append(f'  n{b.id} [label="{label}"];')
    for e in cfg.edges:
        lines.append(f'  n{e.from_id} -> n{e.to_id} [label="{e.kind}"];')
    lines.append("}")
    return "\n".join(lines)
