import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathlab.disasm import (
    KIND_CALL,
    KIND_CONDITIONAL_JUMP,
    KIND_JUMP,
    KIND_JUMPDEST,
    KIND_STOP,
    access_depth,
    decode_opcode,
    disassemble,
    format_listing,
    instruction_records,
    reserialize,
)
from pathlab.validator import stack_effect

from reference_table import CALLING, HALTING, REFERENCE, net_effect, reach_depth


def test_decode_add():
    spec = decode_opcode(0x01)
    assert spec.mnemonic == "ADD"
    assert (spec.pops, spec.pushes) == (2, 1)
    assert spec.kind == "plain"


def test_decode_stop():
    spec = decode_opcode(0x00)
    assert spec.mnemonic == "STOP"
    assert (spec.pops, spec.pushes) == (0, 0)
    assert spec.kind == KIND_STOP


def test_decode_push1():
    spec = decode_opcode(0x60)
    assert spec.mnemonic == "PUSH1"
    assert spec.immediate_len == 1
    assert (spec.pops, spec.pushes) == (0, 1)


def test_decode_is_total():
    for byte in range(256):
        spec = decode_opcode(byte)
        assert spec.byte_value == byte
        if byte not in REFERENCE:
            assert spec.kind == KIND_STOP
            assert spec.mnemonic == f"UNKNOWN_0x{byte:02x}"
            assert (spec.pops, spec.pushes) == (0, 0)


def test_kind_classification_matches_reference():
    for byte, (name, _, _, _) in REFERENCE.items():
        spec = decode_opcode(byte)
        assert spec.mnemonic == name
        assert (spec.kind == KIND_JUMP) == (name == "JUMP")
        assert (spec.kind == KIND_CONDITIONAL_JUMP) == (name == "JUMPI")
        assert (spec.kind == KIND_STOP) == (name in HALTING)
        assert (spec.kind == KIND_CALL) == (name in CALLING)
        assert (spec.kind == KIND_JUMPDEST) == (name == "JUMPDEST")
        assert spec.returns == (name == "RETURN")


def test_arity_against_reference_exhaustive():
    mismatches = []
    for byte in REFERENCE:
        spec = decode_opcode(byte)
        if stack_effect(spec) != net_effect(byte):
            mismatches.append(spec.mnemonic)
        if access_depth(spec) != reach_depth(byte):
            mismatches.append(f"{spec.mnemonic} (depth)")
    assert mismatches == []


def test_arity_bounds():
    for byte in range(256):
        spec = decode_opcode(byte)
        assert 0 <= spec.pops <= 17
        assert 0 <= spec.pushes <= 1


def test_immediate_lengths():
    for n in range(1, 33):
        spec = decode_opcode(0x5F + n)
        assert spec.mnemonic == f"PUSH{n}"
        assert spec.immediate_len == n
    assert decode_opcode(0x5F).immediate_len == 0  # PUSH0 carries no bytes


def test_disassemble_example():
    instrs = disassemble(bytes.fromhex("6001600201"))
    assert [str(i) for i in instrs] == ["PUSH1 0x01", "PUSH1 0x02", "ADD"]
    assert [i.offset for i in instrs] == [0, 2, 4]


def test_disassemble_empty():
    assert disassemble(b"") == []


def test_truncated_push_zero_padded(caplog):
    with caplog.at_level(logging.WARNING):
        instrs = disassemble(bytes.fromhex("60"))
    assert len(instrs) == 1
    assert instrs[0].truncated
    assert instrs[0].immediate == b"\x00"
    assert str(instrs[0]) == "PUSH1 0x00"
    assert any("truncat" in r.message.lower() for r in caplog.records)


def test_truncated_push32_partial():
    instrs = disassemble(b"\x7f\xaa\xbb")
    assert instrs[0].truncated
    assert len(instrs[0].immediate) == 32
    assert instrs[0].immediate[:2] == b"\xaa\xbb"
    assert instrs[0].immediate[2:] == b"\x00" * 30


def test_every_byte_consumed_once():
    code = bytes.fromhex("6001565b00fe0c63aabbccdd")
    instrs = disassemble(code)
    assert sum(i.size for i in instrs) == len(code)
    offsets = [i.offset for i in instrs]
    assert offsets == sorted(set(offsets))


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=512))
def test_roundtrip_random(code):
    instrs = disassemble(code)
    out = reserialize(instrs)
    if instrs and instrs[-1].truncated:
        assert out[: len(code)] == code
        assert out[len(code) :] == b"\x00" * (len(out) - len(code))
    else:
        assert out == code


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=512))
def test_offset_arithmetic(code):
    instrs = disassemble(code)
    for a, b in zip(instrs, instrs[1:]):
        assert b.offset == a.offset + 1 + a.spec.immediate_len


def test_listing_format():
    listing = format_listing(disassemble(bytes.fromhex("600160")))
    lines = listing.splitlines()
    assert lines[0] == "0x0000 PUSH1 0x01"
    assert lines[1].endswith("; truncated")


def test_instruction_records():
    recs = instruction_records(disassemble(bytes.fromhex("600100")))
    assert recs[0] == {"offset": 0, "mnemonic": "PUSH1", "immediate": "01"}
    assert recs[1] == {"offset": 2, "mnemonic": "STOP"}
    truncated = instruction_records(disassemble(b"\x60"))
    assert truncated[0]["truncated"] is True


def test_push_value():
    instrs = disassemble(bytes.fromhex("63aabbccdd"))
    assert instrs[0].push_value == 0xAABBCCDD
