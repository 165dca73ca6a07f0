"""Cross-contract graph connection.

Caller functions are split at their external-call operations, the 4-byte id
each call transmits is recovered from the calldata construction preceding
it, and matching callee function bodies are spliced into the caller graph:
a call edge into the callee entry, a return_link edge back to the code
after the call, and the now-bypassed direct edge deleted.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .cfg import (
    EDGE_CALL,
    EDGE_FALL_THROUGH,
    EDGE_RETURN_LINK,
    FORMAT_VERSION,
    BasicBlock,
    Cfg,
    Edge,
    FunctionSegment,
    Selector,
    build_cfg,
    extract_selectors,
    segment_functions,
)
from .disasm import KIND_CALL, disassemble
from .validator import (
    FOLD_EXTENDED,
    ConstantWord,
    SymbolicStack,
    step_symbolic,
    validate_path,
)

# stack depth of the argument-length cell at each calling opcode
# (top = 1: gas, address, [value,] argsOffset, argsLength, ...)
_ARGS_LEN_DEPTH = {"CALL": 5, "CALLCODE": 5, "DELEGATECALL": 4, "STATICCALL": 4}

PROV_CALLER = "caller"
PROV_CALLEE = "callee"


@dataclass
class CallSite:
    """One call-class terminator inside a caller function segment."""

    block_id: int
    call_kind: str
    entry_block: int
    f_p: list[int]
    f_n: list[int]
    resolved_selector: bytes | None = None
    dynamic: bool = False


class MidBlockCall(ValueError):
    """A call-class instruction that does not terminate its block.

    Sites can only be split on a graph partitioned with split_calls=True.
    """


def split_at_calls(seg: FunctionSegment, cfg: Cfg) -> list[CallSite]:
    """One CallSite per call-terminated block of the segment.

    f_p is every segment block from which the call block is reachable
    backwards (the call block included); f_n is the rest of the segment,
    so the two always partition the segment.
    """
    if not seg.has_calls:
        return []

    seg_set = set(seg.blocks)
    entry = seg.selector.entry_block if seg.selector else cfg.entry_id
    preds: dict[int, list[int]] = {bid: [] for bid in seg.blocks}
    for e in cfg.edges:
        if e.from_id in seg_set and e.to_id in seg_set:
            preds[e.to_id].append(e.from_id)

    sites: list[CallSite] = []
    for bid in seg.blocks:
        block = cfg.block(bid)
        for ins in block.code[:-1]:
            if ins.spec.kind == KIND_CALL:
                raise MidBlockCall(
                    f"call at offset {ins.offset:#x} is mid-block; "
                    "partition with split_calls=True first"
                )
        if block.terminator.spec.kind != KIND_CALL:
            continue
        f_p = _backward_closure(bid, preds)
        f_n = sorted(seg_set - f_p)
        sites.append(
            CallSite(
                block_id=bid,
                call_kind=block.terminator.spec.mnemonic,
                entry_block=entry,
                f_p=sorted(f_p),
                f_n=f_n,
            )
        )
    return sites


def _backward_closure(start: int, preds: dict[int, list[int]]) -> set[int]:
    seen = {start}
    queue = [start]
    while queue:
        bid = queue.pop()
        for p in preds.get(bid, ()):
            if p not in seen:
                seen.add(p)
                queue.append(p)
    return seen


def _walk_between(cfg, start: int, goal: int, allowed: set[int]) -> list[int] | None:
    """Shortest block walk start..goal inside ``allowed`` (BFS, sorted fanout)."""
    if start == goal:
        return [start]
    parent = {start: None}
    queue = [start]
    while queue:
        bid = queue.pop(0)
        for succ in cfg.successors(bid):
            if succ in parent or succ not in allowed:
                continue
            parent[succ] = bid
            if succ == goal:
                walk = [goal]
                while parent[walk[-1]] is not None:
                    walk.append(parent[walk[-1]])
                return walk[::-1]
            queue.append(succ)
    return None


def _selector_from_cell(cell) -> bytes | None:
    """4-byte id carried by a constant word, if it is shaped like one.

    Accepts the left-aligned layout (id in the top 4 bytes, rest zero, the
    way calldata words are built) and a bare 4-byte push.
    """
    if not isinstance(cell, ConstantWord):
        return None
    v = cell.value
    if v == 0:
        return None
    if v & ((1 << 224) - 1) == 0:
        top = v >> 224
        if top <= 0xFFFFFFFF:
            return top.to_bytes(4, "big")
    if cell.width == 4 and v <= 0xFFFFFFFF:
        return v.to_bytes(4, "big")
    return None


def resolve_call_selector(site: CallSite, cfg: Cfg) -> bytes | None:
    """Recover the 4-byte id the call site sends, when it is constant.

    Emulates one walk from the function entry to the call block tracking
    constants stored to memory; the first selector-shaped store after the
    most recent earlier call wins (calldata is laid out id-first). A call
    whose argument length is the constant 0 sends no id at all; stores of
    runtime-computed words mark the site dynamic. Sets the fields on the
    site and returns the value.
    """
    walk = _walk_between(cfg, site.entry_block, site.block_id, set(site.f_p))
    if walk is None:
        walk = [site.block_id]

    stack = SymbolicStack(bottomless=True)
    candidate: bytes | None = None
    saw_dynamic_store = False
    step = 0
    instrs = [ins for bid in walk for ins in cfg.block(bid).code]
    for k, ins in enumerate(instrs):
        is_final_call = k == len(instrs) - 1
        if ins.spec.mnemonic == "MSTORE" and not is_final_call:
            value_cell = stack.peek(2)
            shaped = _selector_from_cell(value_cell)
            if shaped is not None:
                if candidate is None:
                    candidate = shaped
            elif not isinstance(value_cell, ConstantWord):
                saw_dynamic_store = True
        if is_final_call:
            args_len = stack.peek(_ARGS_LEN_DEPTH[ins.spec.mnemonic])
            if isinstance(args_len, ConstantWord) and args_len.value == 0:
                site.resolved_selector = None
                site.dynamic = False
                return None
            break
        step_symbolic(stack, ins, step=step, fold_ops=FOLD_EXTENDED)
        step += 1
        if ins.spec.kind == KIND_CALL:
            # a completed earlier call: its calldata words are stale
            candidate = None
            saw_dynamic_store = False

    site.resolved_selector = candidate
    site.dynamic = candidate is None and saw_dynamic_store
    return candidate


@dataclass
class ContractGraph:
    """One contract's code with its graph, selectors, and function segments."""

    code: bytes
    cfg: Cfg
    selectors: list[Selector]
    segments: list[FunctionSegment]

    @classmethod
    def analyze(cls, code: bytes, split_calls: bool = False) -> "ContractGraph":
        cfg = build_cfg(code, split_calls=split_calls)
        selectors = extract_selectors(cfg)
        segments = segment_functions(cfg, selectors)
        return cls(code, cfg, selectors, segments)

    # graph-view protocol, so a lone contract can feed path enumeration
    @property
    def entry_id(self) -> int:
        return self.cfg.entry_id

    def block(self, block_id: int):
        return self.cfg.block(block_id)

    def successors(self, block_id: int) -> list[int]:
        return self.cfg.successors(block_id)

    def edge_between(self, from_id: int, to_id: int):
        return self.cfg.edge_between(from_id, to_id)


@dataclass(frozen=True, slots=True)
class CrossEdge:
    from_id: int
    to_id: int
    kind: str
    selector: bytes
    site_selector: bytes
    site_block: int


@dataclass
class RCfg:
    """Caller graph with callee function bodies spliced in."""

    nodes: dict[int, BasicBlock]
    edges: list[Edge]
    cross_edges: list[CrossEdge]
    deleted_edges: list[Edge]
    provenance: dict[int, str]
    entry_id: int
    selectors: list[Selector]
    sites: list[dict]
    base_unresolved: dict[int, str] = field(default_factory=dict)
    pruned_cross_edges: list[CrossEdge] = field(default_factory=list)

    def block(self, block_id: int) -> BasicBlock | None:
        return self.nodes.get(block_id)

    def edges_from(self, block_id: int) -> list:
        out: list = [e for e in self.edges if e.from_id == block_id]
        out.extend(e for e in self.cross_edges if e.from_id == block_id)
        return out

    def successors(self, block_id: int) -> list[int]:
        return sorted({e.to_id for e in self.edges_from(block_id)})

    def edge_between(self, from_id: int, to_id: int):
        for e in self.edges:
            if e.from_id == from_id and e.to_id == to_id:
                return e
        for e in self.cross_edges:
            if e.from_id == from_id and e.to_id == to_id:
                return e
        return None

    def strip(self) -> Cfg:
        """Undo the connection: caller blocks and edges only, deletions restored."""
        nodes = {
            bid: b for bid, b in self.nodes.items() if self.provenance[bid] == PROV_CALLER
        }
        edges = [
            e
            for e in self.edges
            if e.from_id in nodes and e.to_id in nodes
        ]
        edges.extend(self.deleted_edges)
        edges.sort(key=lambda e: (e.from_id, e.to_id, e.kind))
        return Cfg(nodes, edges, self.entry_id, dict(self.base_unresolved))


def connect_cfgs(caller: ContractGraph, callee: ContractGraph) -> RCfg:
    """Splice matching callee functions into the caller graph.

    For every caller call site whose recovered 4-byte id names a callee
    function reachable under a feasible prefix: copy that function's blocks
    under fresh ids, add a call edge from the call block to the copied
    entry, delete the call block's direct fall-through, and when the copy
    contains RETURN exits add a return_link from each exit back to the
    deleted edge's target. Unmatched and unresolved sites are recorded but
    leave the graph untouched. Dangling connections whose endpoints cannot
    be reached from the entry are pruned at the end.
    """
    nodes: dict[int, BasicBlock] = dict(caller.cfg.nodes)
    edges: list[Edge] = list(caller.cfg.edges)
    provenance = {bid: PROV_CALLER for bid in nodes}
    cross_edges: list[CrossEdge] = []
    deleted_edges: list[Edge] = []
    sites_report: list[dict] = []
    next_id = max(nodes) + 1 if nodes else 0

    callee_by_selector: dict[bytes, tuple[Selector, FunctionSegment]] = {}
    for seg in callee.segments:
        if seg.selector is not None:
            callee_by_selector.setdefault(seg.selector.value, (seg.selector, seg))

    for seg in caller.segments:
        for site in split_at_calls(seg, caller.cfg):
            resolve_call_selector(site, caller.cfg)
            record = {
                "segment": seg.label,
                "block": site.block_id,
                "call_kind": site.call_kind,
                "selector": site.resolved_selector.hex() if site.resolved_selector else None,
                "dynamic": site.dynamic,
                "connected": False,
            }
            sites_report.append(record)

            if site.resolved_selector is None:
                record["reason"] = "dynamic_selector" if site.dynamic else "no_selector"
                continue
            match = callee_by_selector.get(site.resolved_selector)
            if match is None:
                record["reason"] = "no_match"
                continue

            walk = _walk_between(
                caller.cfg, site.entry_block, site.block_id, set(site.f_p)
            )
            if walk is None:
                record["reason"] = "unreachable_site"
                continue
            verdict = validate_path(caller.cfg, walk, SymbolicStack(bottomless=True))
            if not verdict.feasible:
                record["reason"] = f"infeasible_prefix: {verdict.reason}"
                continue

            sel, cseg = match
            id_map: dict[int, int] = {}
            for old in cseg.blocks:
                src = callee.cfg.block(old)
                copy = BasicBlock(next_id, src.node_type, src.code, src.entry_offset)
                nodes[copy.id] = copy
                provenance[copy.id] = PROV_CALLEE
                id_map[old] = copy.id
                next_id += 1
            for e in callee.cfg.edges:
                if e.from_id in id_map and e.to_id in id_map:
                    edges.append(Edge(id_map[e.from_id], id_map[e.to_id], e.kind))

            cross_edges.append(
                CrossEdge(
                    from_id=site.block_id,
                    to_id=id_map[sel.entry_block],
                    kind=EDGE_CALL,
                    selector=sel.value,
                    site_selector=site.resolved_selector,
                    site_block=site.block_id,
                )
            )
            direct = [
                e
                for e in edges
                if e.from_id == site.block_id
                and e.kind == EDGE_FALL_THROUGH
                and e.to_id in set(site.f_n)
            ]
            if cseg.ends_with_return:
                for old in cseg.blocks:
                    if callee.cfg.block(old).terminator.spec.mnemonic != "RETURN":
                        continue
                    for d in direct:
                        cross_edges.append(
                            CrossEdge(
                                from_id=id_map[old],
                                to_id=d.to_id,
                                kind=EDGE_RETURN_LINK,
                                selector=sel.value,
                                site_selector=site.resolved_selector,
                                site_block=site.block_id,
                            )
                        )
            for d in direct:
                edges.remove(d)
                deleted_edges.append(d)
            record["connected"] = True
            record["callee_entry"] = id_map[sel.entry_block]

    rcfg = RCfg(
        nodes=nodes,
        edges=edges,
        cross_edges=cross_edges,
        deleted_edges=deleted_edges,
        provenance=provenance,
        entry_id=caller.cfg.entry_id,
        selectors=list(caller.selectors),
        sites=sites_report,
        base_unresolved=dict(caller.cfg.unresolved),
    )
    _prune_dangling(rcfg)
    return rcfg


def _prune_dangling(rcfg: RCfg) -> None:
    """Drop connections (and imported blocks) unreachable from the entry."""
    reachable = {rcfg.entry_id}
    queue = [rcfg.entry_id]
    while queue:
        bid = queue.pop()
        for e in rcfg.edges_from(bid):
            if e.to_id not in reachable:
                reachable.add(e.to_id)
                queue.append(e.to_id)

    keep_cross = [
        e for e in rcfg.cross_edges if e.from_id in reachable and e.to_id in reachable
    ]
    rcfg.pruned_cross_edges = [e for e in rcfg.cross_edges if e not in keep_cross]
    rcfg.cross_edges = keep_cross

    dead_imports = {
        bid
        for bid, prov in rcfg.provenance.items()
        if prov == PROV_CALLEE and bid not in reachable
    }
    if dead_imports:
        rcfg.nodes = {b: n for b, n in rcfg.nodes.items() if b not in dead_imports}
        rcfg.provenance = {
            b: p for b, p in rcfg.provenance.items() if b not in dead_imports
        }
        rcfg.edges = [
            e
            for e in rcfg.edges
            if e.from_id not in dead_imports and e.to_id not in dead_imports
        ]


def connect(caller_code: bytes, callee_code: bytes) -> RCfg:
    """Analyze both bytecodes and connect caller into callee."""
    caller = ContractGraph.analyze(caller_code, split_calls=True)
    callee = ContractGraph.analyze(callee_code, split_calls=False)
    return connect_cfgs(caller, callee)


def rcfg_to_dict(rcfg: RCfg) -> dict:
    """Structured-document export; round-trips through rcfg_from_dict."""
    from .disasm import reserialize

    return {
        "format_version": FORMAT_VERSION,
        "entry": rcfg.entry_id,
        "nodes": [
            {
                "id": b.id,
                "type": b.node_type,
                "entry_offset": b.entry_offset,
                "provenance": rcfg.provenance[b.id],
                "opcodes": [str(ins) for ins in b.code],
                "code_hex": reserialize(list(b.code)).hex(),
            }
            for b in sorted(rcfg.nodes.values(), key=lambda b: b.id)
        ],
        "edges": [
            {"from": e.from_id, "to": e.to_id, "kind": e.kind} for e in rcfg.edges
        ],
        "cross_edges": [
            {
                "from": e.from_id,
                "to": e.to_id,
                "kind": e.kind,
                "selector": e.selector.hex(),
                "site_selector": e.site_selector.hex(),
                "site_block": e.site_block,
            }
            for e in rcfg.cross_edges
        ],
        "deleted_edges": [
            {"from": e.from_id, "to": e.to_id, "kind": e.kind}
            for e in rcfg.deleted_edges
        ],
        "unresolved": [
            {"block": bid, "reason": reason}
            for bid, reason in sorted(rcfg.base_unresolved.items())
        ],
        "selectors": [
            {"hex4": s.hex, "entry_block": s.entry_block, "source": s.source}
            for s in rcfg.selectors
        ],
        "sites": rcfg.sites,
    }


def rcfg_from_dict(doc: dict) -> RCfg:
    nodes: dict[int, BasicBlock] = {}
    provenance: dict[int, str] = {}
    for nd in doc["nodes"]:
        instrs = disassemble(bytes.fromhex(nd["code_hex"]))
        rebased = tuple(
            replace(ins, offset=ins.offset + nd["entry_offset"]) for ins in instrs
        )
        nodes[nd["id"]] = BasicBlock(nd["id"], nd["type"], rebased, nd["entry_offset"])
        provenance[nd["id"]] = nd["provenance"]
    return RCfg(
        nodes=nodes,
        edges=[Edge(e["from"], e["to"], e["kind"]) for e in doc["edges"]],
        cross_edges=[
            CrossEdge(
                e["from"],
                e["to"],
                e["kind"],
                bytes.fromhex(e["selector"]),
                bytes.fromhex(e["site_selector"]),
                e["site_block"],
            )
            for e in doc["cross_edges"]
        ],
        deleted_edges=[
            Edge(e["from"], e["to"], e["kind"]) for e in doc["deleted_edges"]
        ],
        provenance=provenance,
        entry_id=doc["entry"],
        selectors=[
            Selector(bytes.fromhex(s["hex4"]), s["source"], s["entry_block"])
            for s in doc["selectors"]
        ],
        sites=list(doc["sites"]),
        base_unresolved={u["block"]: u["reason"] for u in doc.get("unresolved", [])},
    )
