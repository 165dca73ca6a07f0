"""Independently transcribed EVM opcode table (Shanghai instruction set).

Kept deliberately separate from the package: entries are (mnemonic,
immediate bytes, delta, alpha) in the classical convention where DUPn
removes n items and places n+1, SWAPn removes and places n+1. Tests
convert to whichever convention they are checking.
"""

REFERENCE = {}


def _put(byte, name, imm, delta, alpha):
    REFERENCE[byte] = (name, imm, delta, alpha)


_put(0x00, "STOP", 0, 0, 0)
_put(0x01, "ADD", 0, 2, 1)
_put(0x02, "MUL", 0, 2, 1)
_put(0x03, "SUB", 0, 2, 1)
_put(0x04, "DIV", 0, 2, 1)
_put(0x05, "SDIV", 0, 2, 1)
_put(0x06, "MOD", 0, 2, 1)
_put(0x07, "SMOD", 0, 2, 1)
_put(0x08, "ADDMOD", 0, 3, 1)
_put(0x09, "MULMOD", 0, 3, 1)
_put(0x0A, "EXP", 0, 2, 1)
_put(0x0B, "SIGNEXTEND", 0, 2, 1)
_put(0x10, "LT", 0, 2, 1)
_put(0x11, "GT", 0, 2, 1)
_put(0x12, "SLT", 0, 2, 1)
_put(0x13, "SGT", 0, 2, 1)
_put(0x14, "EQ", 0, 2, 1)
_put(0x15, "ISZERO", 0, 1, 1)
_put(0x16, "AND", 0, 2, 1)
_put(0x17, "OR", 0, 2, 1)
_put(0x18, "XOR", 0, 2, 1)
_put(0x19, "NOT", 0, 1, 1)
_put(0x1A, "BYTE", 0, 2, 1)
_put(0x1B, "SHL", 0, 2, 1)
_put(0x1C, "SHR", 0, 2, 1)
_put(0x1D, "SAR", 0, 2, 1)
_put(0x20, "SHA3", 0, 2, 1)
_put(0x30, "ADDRESS", 0, 0, 1)
_put(0x31, "BALANCE", 0, 1, 1)
_put(0x32, "ORIGIN", 0, 0, 1)
_put(0x33, "CALLER", 0, 0, 1)
_put(0x34, "CALLVALUE", 0, 0, 1)
_put(0x35, "CALLDATALOAD", 0, 1, 1)
_put(0x36, "CALLDATASIZE", 0, 0, 1)
_put(0x37, "CALLDATACOPY", 0, 3, 0)
_put(0x38, "CODESIZE", 0, 0, 1)
_put(0x39, "CODECOPY", 0, 3, 0)
_put(0x3A, "GASPRICE", 0, 0, 1)
_put(0x3B, "EXTCODESIZE", 0, 1, 1)
_put(0x3C, "EXTCODECOPY", 0, 4, 0)
_put(0x3D, "RETURNDATASIZE", 0, 0, 1)
_put(0x3E, "RETURNDATACOPY", 0, 3, 0)
_put(0x3F, "EXTCODEHASH", 0, 1, 1)
_put(0x40, "BLOCKHASH", 0, 1, 1)
_put(0x41, "COINBASE", 0, 0, 1)
_put(0x42, "TIMESTAMP", 0, 0, 1)
_put(0x43, "NUMBER", 0, 0, 1)
_put(0x44, "PREVRANDAO", 0, 0, 1)
_put(0x45, "GASLIMIT", 0, 0, 1)
_put(0x46, "CHAINID", 0, 0, 1)
_put(0x47, "SELFBALANCE", 0, 0, 1)
_put(0x48, "BASEFEE", 0, 0, 1)
_put(0x50, "POP", 0, 1, 0)
_put(0x51, "MLOAD", 0, 1, 1)
_put(0x52, "MSTORE", 0, 2, 0)
_put(0x53, "MSTORE8", 0, 2, 0)
_put(0x54, "SLOAD", 0, 1, 1)
_put(0x55, "SSTORE", 0, 2, 0)
_put(0x56, "JUMP", 0, 1, 0)
_put(0x57, "JUMPI", 0, 2, 0)
_put(0x58, "PC", 0, 0, 1)
_put(0x59, "MSIZE", 0, 0, 1)
_put(0x5A, "GAS", 0, 0, 1)
_put(0x5B, "JUMPDEST", 0, 0, 0)
_put(0x5F, "PUSH0", 0, 0, 1)
for _n in range(1, 33):
    _put(0x5F + _n, f"PUSH{_n}", _n, 0, 1)
for _n in range(1, 17):
    _put(0x7F + _n, f"DUP{_n}", 0, _n, _n + 1)
for _n in range(1, 17):
    _put(0x8F + _n, f"SWAP{_n}", 0, _n + 1, _n + 1)
for _n in range(0, 5):
    _put(0xA0 + _n, f"LOG{_n}", 0, _n + 2, 0)
_put(0xF0, "CREATE", 0, 3, 1)
_put(0xF1, "CALL", 0, 7, 1)
_put(0xF2, "CALLCODE", 0, 7, 1)
_put(0xF3, "RETURN", 0, 2, 0)
_put(0xF4, "DELEGATECALL", 0, 6, 1)
_put(0xF5, "CREATE2", 0, 4, 1)
_put(0xFA, "STATICCALL", 0, 6, 1)
_put(0xFD, "REVERT", 0, 2, 0)
_put(0xFE, "INVALID", 0, 0, 0)
_put(0xFF, "SELFDESTRUCT", 0, 1, 0)

BYTE_BY_NAME = {name: b for b, (name, _, _, _) in REFERENCE.items()}

# instructions after which control cannot fall to the next offset
HALTING = {"STOP", "RETURN", "REVERT", "INVALID", "SELFDESTRUCT"}
CALLING = {"CALL", "CALLCODE", "DELEGATECALL", "STATICCALL"}


def net_effect(byte):
    """(pops, pushes) once DUP/SWAP reordering is folded away."""
    name, _, delta, alpha = REFERENCE[byte]
    if name.startswith("DUP"):
        return 0, 1
    if name.startswith("SWAP"):
        return 0, 0
    return delta, alpha


def reach_depth(byte):
    """Deepest stack slot the opcode touches."""
    name, _, delta, _ = REFERENCE[byte]
    return delta
