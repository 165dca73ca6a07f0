"""EVM runtime bytecode decoding: opcode table and linear-sweep disassembler."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

# Control-flow classes. Unknown byte values decode to KIND_STOP because the
# EVM halts on undefined instructions.
KIND_JUMP = "jump"
KIND_CONDITIONAL_JUMP = "conditional_jump"
KIND_STOP = "stop"
KIND_CALL = "call"
KIND_RETURN_LINK = "return_link"  # edge kind only, never an opcode class
KIND_JUMPDEST = "jumpdest"
KIND_PLAIN = "plain"

EVM_STACK_LIMIT = 1024


@dataclass(frozen=True, slots=True)
class OpcodeSpec:
    """Static description of one opcode: name, immediate width, stack arity.

    ``pops``/``pushes`` use the net convention: DUPn is (0, 1) and SWAPn is
    (0, 0); the depth they reach into the stack is exposed separately via
    :func:`access_depth` so underflow checks stay exact.
    """

    mnemonic: str
    byte_value: int
    immediate_len: int
    pops: int
    pushes: int
    kind: str
    returns: bool = field(default=False)

    @property
    def is_push(self) -> bool:
        return self.immediate_len > 0 or self.mnemonic == "PUSH0"


def _spec(byte_value, mnemonic, pops, pushes, kind=KIND_PLAIN, imm=0):
    return OpcodeSpec(
        mnemonic=mnemonic,
        byte_value=byte_value,
        immediate_len=imm,
        pops=pops,
        pushes=pushes,
        kind=kind,
        returns=(mnemonic == "RETURN"),
    )


def _build_table() -> dict[int, OpcodeSpec]:
    t: dict[int, OpcodeSpec] = {}

    def add(bv, name, pops, pushes, kind=KIND_PLAIN, imm=0):
        t[bv] = _spec(bv, name, pops, pushes, kind, imm)

    # 0x00s: stop & arithmetic
    add(0x00, "STOP", 0, 0, KIND_STOP)
    add(0x01, "ADD", 2, 1)
    add(0x02, "MUL", 2, 1)
    add(0x03, "SUB", 2, 1)
    add(0x04, "DIV", 2, 1)
    add(0x05, "SDIV", 2, 1)
    add(0x06, "MOD", 2, 1)
    add(0x07, "SMOD", 2, 1)
    add(0x08, "ADDMOD", 3, 1)
    add(0x09, "MULMOD", 3, 1)
    add(0x0A, "EXP", 2, 1)
    add(0x0B, "SIGNEXTEND", 2, 1)
    # 0x10s: comparison & bitwise
    add(0x10, "LT", 2, 1)
    add(0x11, "GT", 2, 1)
    add(0x12, "SLT", 2, 1)
    add(0x13, "SGT", 2, 1)
    add(0x14, "EQ", 2, 1)
    add(0x15, "ISZERO", 1, 1)
    add(0x16, "AND", 2, 1)
    add(0x17, "OR", 2, 1)
    add(0x18, "XOR", 2, 1)
    add(0x19, "NOT", 1, 1)
    add(0x1A, "BYTE", 2, 1)
    add(0x1B, "SHL", 2, 1)
    add(0x1C, "SHR", 2, 1)
    add(0x1D, "SAR", 2, 1)
    # 0x20s
    add(0x20, "SHA3", 2, 1)
    # 0x30s: environment
    add(0x30, "ADDRESS", 0, 1)
    add(0x31, "BALANCE", 1, 1)
    add(0x32, "ORIGIN", 0, 1)
    add(0x33, "CALLER", 0, 1)
    add(0x34, "CALLVALUE", 0, 1)
    add(0x35, "CALLDATALOAD", 1, 1)
    add(0x36, "CALLDATASIZE", 0, 1)
    add(0x37, "CALLDATACOPY", 3, 0)
    add(0x38, "CODESIZE", 0, 1)
    add(0x39, "CODECOPY", 3, 0)
    add(0x3A, "GASPRICE", 0, 1)
    add(0x3B, "EXTCODESIZE", 1, 1)
    add(0x3C, "EXTCODECOPY", 4, 0)
    add(0x3D, "RETURNDATASIZE", 0, 1)
    add(0x3E, "RETURNDATACOPY", 3, 0)
    add(0x3F, "EXTCODEHASH", 1, 1)
    # 0x40s: block context
    add(0x40, "BLOCKHASH", 1, 1)
    add(0x41, "COINBASE", 0, 1)
    add(0x42, "TIMESTAMP", 0, 1)
    add(0x43, "NUMBER", 0, 1)
    add(0x44, "PREVRANDAO", 0, 1)
    add(0x45, "GASLIMIT", 0, 1)
    add(0x46, "CHAINID", 0, 1)
    add(0x47, "SELFBALANCE", 0, 1)
    add(0x48, "BASEFEE", 0, 1)
    # 0x50s: stack/memory/storage/flow
    add(0x50, "POP", 1, 0)
    add(0x51, "MLOAD", 1, 1)
    add(0x52, "MSTORE", 2, 0)
    add(0x53, "MSTORE8", 2, 0)
    add(0x54, "SLOAD", 1, 1)
    add(0x55, "SSTORE", 2, 0)
    add(0x56, "JUMP", 1, 0, KIND_JUMP)
    add(0x57, "JUMPI", 2, 0, KIND_CONDITIONAL_JUMP)
    add(0x58, "PC", 0, 1)
    add(0x59, "MSIZE", 0, 1)
    add(0x5A, "GAS", 0, 1)
    add(0x5B, "JUMPDEST", 0, 0, KIND_JUMPDEST)
    add(0x5F, "PUSH0", 0, 1)
    # PUSH1..PUSH32
    for n in range(1, 33):
        add(0x5F + n, f"PUSH{n}", 0, 1, KIND_PLAIN, imm=n)
    # DUP1..DUP16 (net arity; depth handled by access_depth)
    for n in range(1, 17):
        add(0x7F + n, f"DUP{n}", 0, 1)
    # SWAP1..SWAP16
    for n in range(1, 17):
        add(0x8F + n, f"SWAP{n}", 0, 0)
    # LOG0..LOG4
    for n in range(5):
        add(0xA0 + n, f"LOG{n}", 2 + n, 0)
    # 0xf0s: system
    add(0xF0, "CREATE", 3, 1)
    add(0xF1, "CALL", 7, 1, KIND_CALL)
    add(0xF2, "CALLCODE", 7, 1, KIND_CALL)
    add(0xF3, "RETURN", 2, 0, KIND_STOP)
    add(0xF4, "DELEGATECALL", 6, 1, KIND_CALL)
    add(0xF5, "CREATE2", 4, 1)
    add(0xFA, "STATICCALL", 6, 1, KIND_CALL)
    add(0xFD, "REVERT", 2, 0, KIND_STOP)
    add(0xFE, "INVALID", 0, 0, KIND_STOP)
    add(0xFF, "SELFDESTRUCT", 1, 0, KIND_STOP)
    return t


OPCODES: dict[int, OpcodeSpec] = _build_table()

# Undefined byte values halt execution; cached so decode_opcode stays total
# and identical specs compare cheaply.
_UNKNOWN: dict[int, OpcodeSpec] = {}


def decode_opcode(byte_value: int) -> OpcodeSpec:
    """Total opcode lookup; undefined bytes yield a halting UNKNOWN spec."""
    spec = OPCODES.get(byte_value)
    if spec is not None:
        return spec
    spec = _UNKNOWN.get(byte_value)
    if spec is None:
        spec = _spec(byte_value, f"UNKNOWN_0x{byte_value:02x}", 0, 0, KIND_STOP)
        _UNKNOWN[byte_value] = spec
    return spec


def access_depth(spec: OpcodeSpec) -> int:
    """Deepest stack slot an opcode touches (1 = top).

    DUPn reads slot n, SWAPn exchanges slots 1 and n+1; for every other
    opcode the answer is just its pop count.
    """
    name = spec.mnemonic
    if name.startswith("DUP") and name[3:].isdigit():
        return int(name[3:])
    if name.startswith("SWAP") and name[4:].isdigit():
        return int(name[4:]) + 1
    return spec.pops


@dataclass(frozen=True, slots=True)
class Instruction:
    """One decoded instruction.

    ``immediate`` is always exactly ``spec.immediate_len`` bytes; when a PUSH
    ran off the end of the code it is zero-padded and ``truncated`` is set.
    """

    offset: int
    spec: OpcodeSpec
    immediate: bytes | None = None
    truncated: bool = False

    @property
    def size(self) -> int:
        return 1 + self.spec.immediate_len

    @property
    def push_value(self) -> int | None:
        """Integer value placed on the stack by a PUSH, else None."""
        if self.spec.mnemonic == "PUSH0":
            return 0
        if self.immediate is not None:
            return int.from_bytes(self.immediate, "big")
        return None

    def __str__(self) -> str:
        if self.immediate is not None:
            return f"{self.spec.mnemonic} 0x{self.immediate.hex()}"
        return self.spec.mnemonic


def disassemble(code: bytes) -> list[Instruction]:
    """Linear sweep over raw runtime bytecode.

    Every byte is consumed exactly once, either as an opcode or as PUSH
    immediate data. A PUSH whose immediate extends past the end of code is
    zero-padded and flagged truncated (warning, not an error), so the
    function is total on arbitrary input.
    """
    out: list[Instruction] = []
    i = 0
    n = len(code)
    while i < n:
        spec = decode_opcode(code[i])
        imm_len = spec.immediate_len
        if imm_len:
            avail = code[i + 1 : i + 1 + imm_len]
            truncated = len(avail) < imm_len
            if truncated:
                log.warning(
                    "truncated PUSH%d at offset %#x: %d immediate byte(s) missing",
                    imm_len, i, imm_len - len(avail),
                )
                avail = avail + b"\x00" * (imm_len - len(avail))
            out.append(Instruction(i, spec, avail, truncated))
        else:
            out.append(Instruction(i, spec))
        i += 1 + imm_len
    return out


def reserialize(instrs: list[Instruction]) -> bytes:
    """Inverse of disassemble, modulo TruncatedPush zero-padding."""
    parts = []
    for ins in instrs:
        parts.append(bytes([ins.spec.byte_value]))
        if ins.immediate is not None:
            parts.append(ins.immediate)
    return b"".join(parts)


def format_listing(instrs: list[Instruction]) -> str:
    """Line-oriented text listing: ``offset mnemonic [immediate-hex]``."""
    lines = []
    for ins in instrs:
        line = f"{ins.offset:#06x} {ins}"
        if ins.truncated:
            line += "  ; truncated"
        lines.append(line)
    return "\n".join(lines)


def instruction_records(instrs: list[Instruction]) -> list[dict]:
    """Structured record stream used by the CLI's JSON output."""
    recs = []
    for ins in instrs:
        rec: dict = {"offset": ins.offset, "mnemonic": ins.spec.mnemonic}
        if ins.immediate is not None:
            rec["immediate"] = ins.immediate.hex()
        if ins.truncated:
            rec["truncated"] = True
        recs.append(rec)
    return recs
