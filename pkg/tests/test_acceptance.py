"""Release gate: one test per acceptance criterion, each echoed as an
ACCEPTANCE line in the terminal summary. Every check runs against an
oracle that does not share code with the package."""

import random
import time

import numpy as np
import pytest

import test_cfg
import test_connector
import test_features
import test_paths
from helpers import (
    SimOverflow,
    SimUnderflow,
    asm,
    reference_blocks,
    reference_edges,
    simulate_heights,
)
from reference_table import REFERENCE, net_effect, reach_depth
from pathlab.cfg import build_cfg, partition_blocks
from pathlab.connector import connect
from pathlab.disasm import (
    KIND_STOP,
    access_depth,
    decode_opcode,
    disassemble,
    reserialize,
)
from pathlab.features import build_feature_graph, export_dataset
from pathlab.paths import PathLimits, enumerate_paths, label_paths
from pathlab.validator import (
    StackOverflow,
    StackUnderflow,
    SymbolicStack,
    run_symbolic,
    step_symbolic,
    validate_path,
)


@pytest.mark.acceptance("round_trip_speed")
def test_round_trip_a_thousand_blobs_under_five_seconds():
    rng = random.Random(2024)
    blobs = [rng.randbytes(rng.randrange(0, 513)) for _ in range(1000)]
    started = time.perf_counter()
    for code in blobs:
        instrs = disassemble(code)
        out = reserialize(instrs)
        assert out[: len(code)] == code
        extra = out[len(code) :]
        assert extra == b"\x00" * len(extra)
        if extra:
            assert instrs[-1].truncated
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0, f"round-trip took {elapsed:.2f}s"


@pytest.mark.acceptance("opcode_arity_table")
def test_every_byte_value_matches_the_reference_table():
    for byte in range(256):
        spec = decode_opcode(byte)
        if byte in REFERENCE:
            name, imm, _d, _a = REFERENCE[byte]
            assert spec.mnemonic == name
            assert spec.immediate_len == imm
            assert (spec.pops, spec.pushes) == net_effect(byte)
            assert access_depth(spec) == reach_depth(byte)
        else:
            assert spec.kind == KIND_STOP
            assert (spec.pops, spec.pushes) == (0, 0)
            assert spec.immediate_len == 0


@pytest.mark.acceptance("graph_recovery_oracle")
def test_blocks_and_edges_match_the_reference_enumerator():
    assert len(test_cfg.FIXTURES) >= 20
    for name, lines, _sels in test_cfg.FIXTURES:
        code = test_cfg.fixture_code(name, lines)
        for split_calls in (False, True):
            blocks = partition_blocks(disassemble(code), split_calls=split_calls)
            got_blocks = [[ins.offset for ins in b.code] for b in blocks]
            want_blocks = [
                [offset for offset, *_ in group]
                for group in reference_blocks(code, split_calls=split_calls)
            ]
            assert got_blocks == want_blocks, f"{name} split={split_calls}"

            cfg = build_cfg(code, split_calls=split_calls)
            got_edges = {(e.from_id, e.to_id, e.kind) for e in cfg.edges}
            want_edges = set(reference_edges(code, split_calls=split_calls))
            assert got_edges == want_edges, f"{name} split={split_calls}"


@pytest.mark.acceptance("connection_topology")
def test_splice_topology_and_reversibility():
    caller = test_connector.caller_code(test_connector.STORE_SHL)

    rcfg = connect(caller, test_connector.callee_code(test_connector.TRANSFER))
    kinds = sorted(e.kind for e in rcfg.cross_edges)
    assert kinds == ["call", "return_link"]
    assert len(rcfg.deleted_edges) == 1
    deleted = rcfg.deleted_edges[0]
    assert rcfg.edge_between(deleted.from_id, deleted.to_id) is None

    no_return = connect(
        caller, test_connector.callee_code(test_connector.TRANSFER, "REVERT")
    )
    assert [e.kind for e in no_return.cross_edges] == ["call"]

    no_match = connect(caller, test_connector.callee_code(test_connector.BALANCE))
    assert no_match.cross_edges == []
    assert no_match.deleted_edges == []

    base = build_cfg(caller, split_calls=True)
    for graph in (rcfg, no_return, no_match):
        stripped = graph.strip()
        assert set(stripped.nodes) == set(base.nodes)
        assert sorted((e.from_id, e.to_id, e.kind) for e in stripped.edges) == sorted(
            (e.from_id, e.to_id, e.kind) for e in base.edges
        )


@pytest.mark.acceptance("symbolic_height_agreement")
def test_symbolic_heights_track_a_concrete_interpreter():
    rng = random.Random(4321)
    for _ in range(500):
        bytestream = bytearray()
        for _k in range(rng.randrange(1, 31)):
            byte = rng.choice(list(REFERENCE))
            bytestream.append(byte)
            bytestream.extend(
                rng.randrange(256) for _ in range(REFERENCE[byte][1])
            )
        code = bytes(bytestream)

        def heights():
            stack = SymbolicStack()
            out = []
            for step, ins in enumerate(disassemble(code)):
                step_symbolic(stack, ins, step=step)
                out.append(stack.height)
            return out

        try:
            expected = simulate_heights(code)
        except SimUnderflow:
            with pytest.raises(StackUnderflow):
                heights()
        except SimOverflow:
            with pytest.raises(StackOverflow):
                heights()
        else:
            assert heights() == expected

    # the walk filter applies the same judgement
    ok = build_cfg(asm("PUSH1 0x01", "PUSH1 0x02", "ADD", "POP", "STOP"))
    assert validate_path(ok, [0]).feasible
    bad = build_cfg(asm("POP", "STOP"))
    verdict = validate_path(bad, [0])
    assert not verdict.feasible
    assert verdict.reason


@pytest.mark.acceptance("path_exhaustiveness")
def test_enumeration_is_exhaustive_and_bounded():
    graph = test_paths.diamond_chain(3)
    expected = test_paths.simple_path_oracle(graph)
    assert len(expected) == 8 <= 16
    found = enumerate_paths(graph)
    assert {p.blocks for p in found} == expected

    poisoned_graph = test_paths.diamond_chain(2, poison_level=0)
    poisoned_blocks = {
        bid
        for bid, block in poisoned_graph.cfg.nodes.items()
        if any(i.spec.mnemonic == "POP" for i in block.code)
    }
    survivors = {
        p.blocks for p in enumerate_paths(poisoned_graph)
    }
    assert survivors == {
        walk
        for walk in test_paths.simple_path_oracle(poisoned_graph)
        if not poisoned_blocks & set(walk)
    }

    loop = test_paths.analyze(
        "PUSH2 :loop", "JUMP", "loop:", "JUMPDEST", "PUSH2 :loop", "JUMP"
    )
    bounded = enumerate_paths(loop, PathLimits(max_block_revisits=2))
    assert len(bounded) == 1
    assert max(bounded[0].blocks.count(b) for b in bounded[0].blocks) <= 2


@pytest.mark.acceptance("adjacency_oracle")
def test_combined_adjacency_matches_brute_force():
    seqs = [
        ["A", "B", "C", "A", "B"],
        ["B", "C", "D", "E"],
        ["E", "D", "A"],
    ]
    corpus = test_features.make_corpus(*seqs)
    graph, vocab = build_feature_graph(corpus, window=3)
    assert graph.n_path == 3
    assert graph.n_opcode == len(vocab.tokens) == 5
    expected = test_features.reference_dense(seqs, window=3)
    assert np.allclose(graph.to_dense(), expected, atol=1e-9)
    assert np.allclose(graph.to_dense(), graph.to_dense().T, atol=0)


@pytest.mark.acceptance("bundle_determinism")
def test_bundle_export_reruns_byte_identically(tmp_path):
    rcfg = connect(
        test_connector.caller_code(test_connector.STORE_SHL),
        test_connector.callee_code(test_connector.TRANSFER),
    )

    def bundle(out):
        corpus = label_paths(enumerate_paths(rcfg), "access_control")
        corpus += [
            p
            for p in label_paths(
                enumerate_paths(
                    test_paths.diamond_chain(2), PathLimits(max_paths_per_entry=4)
                ),
                "negative",
            )
        ]
        graph, _ = build_feature_graph(corpus, window=6)
        export_dataset(graph, corpus, out, ratio=0.75, seed=13)
        return {
            name: (out / name).read_bytes()
            for name in ("paths", "graph", "vocab", "split")
        }

    assert bundle(tmp_path / "a") == bundle(tmp_path / "b")
