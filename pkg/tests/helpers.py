"""Shared test machinery: a mnemonic assembler, a keccak-256 oracle, a
concrete stack simulator, and a reference block/edge enumerator. All of it
leans on reference_table, none of it on the package under test."""

from reference_table import BYTE_BY_NAME, CALLING, HALTING, REFERENCE


def asm(*lines) -> bytes:
    """Assemble 'MNEMONIC [0xIMMEDIATE]' lines into bytecode."""
    out = bytearray()
    for line in lines:
        parts = line.split()
        name = parts[0].upper()
        byte = BYTE_BY_NAME[name]
        out.append(byte)
        imm_len = REFERENCE[byte][1]
        if imm_len:
            value = int(parts[1], 16 if parts[1].startswith("0x") else 10)
            out.extend(value.to_bytes(imm_len, "big"))
        elif len(parts) > 1:
            raise ValueError(f"{name} takes no immediate")
    return bytes(out)


def asm_labeled(*lines) -> bytes:
    """Two-pass assembly: 'name:' defines a label, ':name' push operands
    resolve to that label's byte offset. Everything else matches asm()."""
    parsed = []
    for raw in lines:
        line = raw.strip()
        if line.endswith(":") and " " not in line:
            parsed.append(("label", line[:-1], 0))
            continue
        parts = line.split()
        byte = BYTE_BY_NAME[parts[0].upper()]
        imm_len = REFERENCE[byte][1]
        operand = parts[1] if len(parts) > 1 else None
        if imm_len and operand is None:
            raise ValueError(f"{parts[0]} needs an operand")
        parsed.append((byte, operand, 1 + imm_len))

    offsets = {}
    pc = 0
    for kind, operand, size in parsed:
        if kind == "label":
            if operand in offsets:
                raise ValueError(f"label {operand} defined twice")
            offsets[operand] = pc
        pc += size

    out = bytearray()
    for kind, operand, size in parsed:
        if kind == "label":
            continue
        out.append(kind)
        if size > 1:
            if operand.startswith(":"):
                value = offsets[operand[1:]]
            else:
                value = int(operand, 16 if operand.startswith("0x") else 10)
            out.extend(value.to_bytes(size - 1, "big"))
    return bytes(out)


# --- keccak-256, straight from the sponge definition -----------------------

_ROT = [
    [0, 36, 3, 41, 18],
    [1, 44, 10, 45, 2],
    [62, 6, 43, 15, 61],
    [28, 55, 25, 21, 56],
    [27, 20, 39, 8, 14],
]
_RC = [
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
    0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
    0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
    0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
    0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
]
_MASK = (1 << 64) - 1


def _rol(x, n):
    return ((x << n) | (x >> (64 - n))) & _MASK


def _keccak_f(state):
    for rc in _RC:
        c = [state[x][0] ^ state[x][1] ^ state[x][2] ^ state[x][3] ^ state[x][4] for x in range(5)]
        d = [c[(x - 1) % 5] ^ _rol(c[(x + 1) % 5], 1) for x in range(5)]
        for x in range(5):
            for y in range(5):
                state[x][y] ^= d[x]
        b = [[0] * 5 for _ in range(5)]
        for x in range(5):
            for y in range(5):
                b[y][(2 * x + 3 * y) % 5] = _rol(state[x][y], _ROT[x][y])
        for x in range(5):
            for y in range(5):
                state[x][y] = b[x][y] ^ ((~b[(x + 1) % 5][y]) & b[(x + 2) % 5][y])
        state[0][0] ^= rc
    return state


def keccak256(data: bytes) -> bytes:
    rate = 136
    padded = bytearray(data)
    pad_len = rate - (len(padded) % rate)
    padded += b"\x01" + b"\x00" * (pad_len - 2) + b"\x80" if pad_len >= 2 else b"\x81"
    state = [[0] * 5 for _ in range(5)]
    for block_start in range(0, len(padded), rate):
        block = padded[block_start : block_start + rate]
        for i in range(rate // 8):
            lane = int.from_bytes(block[8 * i : 8 * i + 8], "little")
            state[i % 5][i // 5] ^= lane
        _keccak_f(state)
    out = bytearray()
    for i in range(4):
        out += state[i % 5][i // 5].to_bytes(8, "little")
    return bytes(out)


def selector_of(signature: str) -> bytes:
    return keccak256(signature.encode())[:4]


# known-answer self-checks; a broken oracle must fail loudly at import
assert keccak256(b"").hex() == (
    "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
)
assert selector_of("transfer(address,uint256)").hex() == "a9059cbb"


# --- concrete stack simulation ---------------------------------------------


class SimUnderflow(Exception):
    pass


class SimOverflow(Exception):
    pass


def decode_reference(code: bytes):
    """(offset, byte, name, imm_len, push_value) tuples, linear sweep."""
    out = []
    pc = 0
    while pc < len(code):
        byte = code[pc]
        name, imm_len, _, _ = REFERENCE.get(byte, (f"UNKNOWN_0x{byte:02x}", 0, 0, 0))
        imm = code[pc + 1 : pc + 1 + imm_len]
        imm = imm + b"\x00" * (imm_len - len(imm))
        value = int.from_bytes(imm, "big") if imm_len else None
        out.append((pc, byte, name, imm_len, value))
        pc += 1 + imm_len
    return out


def simulate_heights(code: bytes, limit: int = 1024):
    """Height after each instruction of a straight-line run, or an exception.

    The stack holds real values (unknown results become a counter value) so
    DUP/SWAP behave exactly as on the real machine.
    """
    stack = []
    heights = []
    fresh = iter(range(10**9, 10**12))
    for _, byte, name, imm_len, value in decode_reference(code):
        if name.startswith("UNKNOWN"):
            heights.append(len(stack))
            continue
        if name.startswith("PUSH"):
            if len(stack) >= limit:
                raise SimOverflow(name)
            stack.append(value if imm_len else 0)
        elif name.startswith("DUP"):
            n = int(name[3:])
            if len(stack) < n:
                raise SimUnderflow(name)
            if len(stack) >= limit:
                raise SimOverflow(name)
            stack.append(stack[-n])
        elif name.startswith("SWAP"):
            n = int(name[4:])
            if len(stack) < n + 1:
                raise SimUnderflow(name)
            stack[-1], stack[-n - 1] = stack[-n - 1], stack[-1]
        else:
            _, _, delta, alpha = REFERENCE[byte]
            if len(stack) < delta:
                raise SimUnderflow(name)
            del stack[len(stack) - delta :]
            if len(stack) + alpha > limit:
                raise SimOverflow(name)
            stack.extend(next(fresh) for _ in range(alpha))
        heights.append(len(stack))
    return heights


# --- reference block/edge enumerator ---------------------------------------


def reference_blocks(code: bytes, split_calls: bool = False):
    """Block boundaries as offset lists, by the leader rules alone."""
    instrs = decode_reference(code)
    if not instrs:
        return []
    leaders = {0}
    for k, (_, _, name, _, _) in enumerate(instrs):
        if name == "JUMPDEST":
            leaders.add(k)
        ends = name in ("JUMP", "JUMPI") or name in HALTING or name.startswith("UNKNOWN")
        if split_calls and name in CALLING:
            ends = True
        if ends and k + 1 < len(instrs):
            leaders.add(k + 1)
    marks = sorted(leaders)
    groups = []
    for n, start in enumerate(marks):
        stop = marks[n + 1] if n + 1 < len(marks) else len(instrs)
        groups.append(instrs[start:stop])
    return groups


def _trace_constants(block):
    """Cells are ints or None, stack bottom imagined infinite (None-filled)."""
    stack = []

    def need(depth):
        while len(stack) < depth:
            stack.insert(0, None)

    for _, byte, name, imm_len, value in block[:-1]:
        if name.startswith("PUSH"):
            stack.append(value if imm_len else 0)
        elif name.startswith("DUP"):
            n = int(name[3:])
            need(n)
            stack.append(stack[-n])
        elif name.startswith("SWAP"):
            n = int(name[4:])
            need(n + 1)
            stack[-1], stack[-n - 1] = stack[-n - 1], stack[-1]
        elif name == "AND":
            need(2)
            a, b = stack.pop(), stack.pop()
            stack.append(a & b if a is not None and b is not None else None)
        elif name.startswith("UNKNOWN"):
            pass
        else:
            _, _, delta, alpha = REFERENCE[byte]
            need(delta)
            del stack[len(stack) - delta :]
            stack.extend([None] * alpha)
    return stack


def reference_edges(code: bytes, split_calls: bool = False):
    """(from_index, to_index, kind) triples matching the block list."""
    groups = reference_blocks(code, split_calls)
    dest_index = {}
    for n, block in enumerate(groups):
        if block[0][2] == "JUMPDEST":
            dest_index[block[0][0]] = n
    edges = []
    for n, block in enumerate(groups):
        name = block[-1][2]
        if name in HALTING or name.startswith("UNKNOWN"):
            continue
        if name in ("JUMP", "JUMPI"):
            stack = _trace_constants(block)
            target = stack[-1] if stack else None
            if target is not None and target in dest_index:
                edges.append((n, dest_index[target], "jump_taken"))
            if name == "JUMPI" and n + 1 < len(groups):
                edges.append((n, n + 1, "jump_not_taken"))
            continue
        if n + 1 < len(groups):
            edges.append((n, n + 1, "fall_through"))
    return edges
