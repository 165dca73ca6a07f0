"""Symbolic stack-height execution and the path feasibility predicate.

The executor tracks only what edge checks need: exact constants introduced
by PUSH (propagated through DUP/SWAP/AND/POP) and placeholder cells for
every other result. Heights are exact at every step, so arity violations
are detected without any value reasoning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .disasm import (
    EVM_STACK_LIMIT,
    KIND_CALL,
    KIND_CONDITIONAL_JUMP,
    KIND_JUMP,
    Instruction,
    access_depth,
)
from .disasm import OpcodeSpec

WORD_MASK = (1 << 256) - 1

VERDICT_FEASIBLE = "feasible"
VERDICT_INFEASIBLE = "infeasible"

EDGE_DEFAULT_TRUE = "default_true"
EDGE_CHECKED_TRUE = "checked_true"
EDGE_VIOLATED = "violated"


class StackViolation(Exception):
    """Base for arity violations; carries the offending step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class StackUnderflow(StackViolation):
    pass


class StackOverflow(StackViolation):
    pass


class NotAWalk(Exception):
    """Raised when a candidate path's adjacent blocks are not graph edges."""


class Placeholder:
    """The unknown-result cell (the conventional chi)."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "chi"


CHI = Placeholder()


@dataclass(frozen=True, slots=True)
class ConstantWord:
    """A known 256-bit stack value.

    ``width`` remembers the byte width of the PUSH that introduced the value
    (None for derived constants); the selector extractor keys off it.
    """

    value: int
    width: int | None = None


@dataclass(frozen=True, slots=True)
class SelectorProbe(Placeholder):
    """EQ-against-a-4-byte-constant result; still an unknown boolean.

    Dispatcher recognition needs to see which constant was compared when the
    comparison feeds a JUMPI, so the placeholder carries it along.
    """

    value: int = 0


# Constant-folding sets. The baseline folds only AND, matching the ops that
# matter for jump-target tracking; the extended set exists for call-selector
# recovery where masked/shifted encodings must be undone.
FOLD_BASE = frozenset({"AND"})
FOLD_EXTENDED = frozenset({"AND", "OR", "SHL", "SHR", "DIV"})


def _fold(mnemonic: str, a: int, b: int) -> int:
    # a is the top operand, b the one below it
    if mnemonic == "AND":
        return a & b
    if mnemonic == "OR":
        return a | b
    if mnemonic == "SHL":  # b << a
        return (b << a) & WORD_MASK if a < 256 else 0
    if mnemonic == "SHR":  # b >> a
        return b >> a if a < 256 else 0
    if mnemonic == "DIV":
        return a // b if b else 0
    raise ValueError(mnemonic)


@dataclass
class SymbolicStack:
    """Ordered cells, top at the end of ``items``.

    ``bottomless=True`` makes pops below the tracked region yield fresh
    placeholders instead of underflowing — the mode block-local edge
    resolution runs in, where the incoming stack is unknown.
    """

    items: list = field(default_factory=list)
    bottomless: bool = False

    @property
    def height(self) -> int:
        return len(self.items)

    def copy(self) -> "SymbolicStack":
        return SymbolicStack(list(self.items), self.bottomless)

    def peek(self, depth: int = 1):
        """Cell at the given depth (1 = top); placeholder below a bottomless floor."""
        if len(self.items) >= depth:
            return self.items[-depth]
        if self.bottomless:
            return CHI
        raise StackUnderflow(f"peek depth {depth} on height {len(self.items)}")

    def _require(self, depth: int, mnemonic: str, step: int | None):
        if len(self.items) >= depth:
            return
        if self.bottomless:
            # materialize unknown cells below the tracked region
            missing = depth - len(self.items)
            self.items[0:0] = [CHI] * missing
            return
        raise StackUnderflow(
            f"{mnemonic} needs stack depth {depth}, height is {len(self.items)}",
            step,
        )

    def push(self, cell, mnemonic: str = "?", step: int | None = None):
        if len(self.items) >= EVM_STACK_LIMIT:
            raise StackOverflow(f"{mnemonic} would exceed the {EVM_STACK_LIMIT}-item limit", step)
        self.items.append(cell)


def step_symbolic(
    stack: SymbolicStack,
    ins: Instruction,
    step: int | None = None,
    fold_ops: frozenset = FOLD_BASE,
) -> None:
    """Execute one instruction in place. Raises on arity violations."""
    spec = ins.spec
    name = spec.mnemonic
    items = stack.items

    if spec.is_push:
        stack.push(ConstantWord(ins.push_value, spec.immediate_len or None), name, step)
        return

    if name.startswith("DUP") and name[3:].isdigit():
        n = int(name[3:])
        stack._require(n, name, step)
        stack.push(items[-n], name, step)
        return

    if name.startswith("SWAP") and name[4:].isdigit():
        n = int(name[4:])
        stack._require(n + 1, name, step)
        items[-1], items[-(n + 1)] = items[-(n + 1)], items[-1]
        return

    if name == "POP":
        stack._require(1, name, step)
        items.pop()
        return

    if name in fold_ops or name == "EQ":
        stack._require(2, name, step)
        a = items.pop()
        b = items.pop()
        if name == "EQ":
            # never folded to a constant; tag the comparison when it looks
            # like a dispatcher selector check
            const, other = (a, b) if isinstance(a, ConstantWord) else (b, a)
            if (
                isinstance(const, ConstantWord)
                and not isinstance(other, ConstantWord)
                and const.width == 4
                and 0 <= const.value <= 0xFFFFFFFF
            ):
                stack.push(SelectorProbe(const.value), name, step)
            else:
                stack.push(CHI, name, step)
        elif isinstance(a, ConstantWord) and isinstance(b, ConstantWord):
            stack.push(ConstantWord(_fold(name, a.value, b.value)), name, step)
        else:
            stack.push(CHI, name, step)
        return

    # generic arity: pop what the opcode consumes (checking the full access
    # depth), push placeholders for whatever it produces
    depth = access_depth(spec)
    if depth:
        stack._require(depth, name, step)
    del items[len(items) - spec.pops :]
    for _ in range(spec.pushes):
        stack.push(CHI, name, step)


def stack_effect(spec: OpcodeSpec) -> tuple[int, int]:
    """(pops, pushes) pair in the net convention of the opcode table."""
    return spec.pops, spec.pushes


def run_symbolic(
    instrs: list[Instruction],
    initial: SymbolicStack | None = None,
    fold_ops: frozenset = FOLD_BASE,
) -> SymbolicStack:
    """Execute a straight-line instruction slice, returning the final stack.

    Raises StackUnderflow/StackOverflow with the failing step index; callers
    that validate paths map those into infeasible verdicts.
    """
    stack = initial.copy() if initial is not None else SymbolicStack()
    for k, ins in enumerate(instrs):
        step_symbolic(stack, ins, step=k, fold_ops=fold_ops)
    return stack


@dataclass
class PathCondition:
    """Outcome of validating one block walk."""

    path: list[int]
    edge_conditions: list[str]
    verdict: str
    reason: str | None = None
    failing_step: int | None = None

    @property
    def feasible(self) -> bool:
        return self.verdict == VERDICT_FEASIBLE

    def record(self, path_id: str | None = None) -> dict:
        rec: dict = {"verdict": self.verdict}
        if path_id is not None:
            rec["path_id"] = path_id
        if self.failing_step is not None:
            rec["failing_step"] = self.failing_step
        if self.reason is not None:
            rec["reason"] = self.reason
        return rec


def _infeasible(path, conditions, reason, step=None) -> PathCondition:
    return PathCondition(list(path), conditions, VERDICT_INFEASIBLE, reason, step)


def validate_path(graph, path: list[int], initial: SymbolicStack | None = None) -> PathCondition:
    """Evaluate the feasibility conjunction over one walk through ``graph``.

    ``graph`` is any object exposing ``block(id)`` and ``edge_between(a, b)``
    (Cfg and RCfg both do). Every step must hold: no arity violation while
    executing the concatenated block code, jump targets that resolved to a
    constant must equal the successor's entry offset (placeholders get the
    benefit of the doubt — the edge itself was already vetted), and call
    edges must carry a matching selector. Edges not directed by JUMPI
    default to true.
    """
    if not path:
        return _infeasible(path, [], "empty path")

    conditions: list[str] = []
    stack = initial.copy() if initial is not None else SymbolicStack()
    step_no = 0

    for pos, block_id in enumerate(path):
        block = graph.block(block_id)
        if block is None:
            raise NotAWalk(f"block {block_id} is not in the graph")
        last = len(block.code) - 1
        edge = None
        if pos + 1 < len(path):
            edge = graph.edge_between(block_id, path[pos + 1])
            if edge is None:
                raise NotAWalk(f"no edge {block_id} -> {path[pos + 1]}")

        for k, ins in enumerate(block.code):
            target_cell = None
            if k == last and ins.spec.kind in (KIND_JUMP, KIND_CONDITIONAL_JUMP):
                target_cell = stack.peek(1) if (stack.height or stack.bottomless) else None
            try:
                step_symbolic(stack, ins, step=step_no)
            except StackViolation as exc:
                return _infeasible(
                    path, conditions, f"{type(exc).__name__}: {exc}", step_no
                )
            step_no += 1

            if k == last and edge is not None:
                cond = _edge_condition(graph, edge, block, path[pos + 1], target_cell)
                conditions.append(cond)
                if cond == EDGE_VIOLATED:
                    return _infeasible(
                        path,
                        conditions,
                        f"edge {block_id}->{path[pos + 1]} condition violated",
                        step_no - 1,
                    )

    return PathCondition(list(path), conditions, VERDICT_FEASIBLE)


def _edge_condition(graph, edge, block, succ_id, target_cell) -> str:
    """Gamma_e for one traversed edge."""
    kind = edge.kind
    terminator = block.code[-1].spec.kind

    if kind == "jump_taken":
        succ = graph.block(succ_id)
        if isinstance(target_cell, ConstantWord):
            if target_cell.value != succ.entry_offset:
                return EDGE_VIOLATED
            # constant matches the landing block
            return (
                EDGE_CHECKED_TRUE
                if terminator == KIND_CONDITIONAL_JUMP
                else EDGE_DEFAULT_TRUE
            )
        # placeholder target: the resolver vetted the edge, accept it
        return (
            EDGE_CHECKED_TRUE
            if terminator == KIND_CONDITIONAL_JUMP
            else EDGE_DEFAULT_TRUE
        )

    if kind == "jump_not_taken":
        # the JUMPI arity check already ran; nothing further to evaluate
        return EDGE_CHECKED_TRUE

    if kind == "call":
        expected = getattr(edge, "selector", None)
        resolved = getattr(edge, "site_selector", None)
        if expected is not None and resolved is not None and expected != resolved:
            return EDGE_VIOLATED
        return EDGE_DEFAULT_TRUE

    # fall_through / return_link: unconditional, defaults to true
    return EDGE_DEFAULT_TRUE
