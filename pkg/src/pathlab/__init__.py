"""Cross-contract EVM bytecode analysis: disassembly, graph recovery,
call-site connection, feasible-path enumeration, and feature export."""

from .cfg import BasicBlock, Cfg, Selector, build_cfg, extract_selectors, segment_functions
from .connector import ContractGraph, RCfg, connect, connect_cfgs
from .disasm import Instruction, OpcodeSpec, decode_opcode, disassemble
from .features import HeteroGraph, build_feature_graph, export_dataset
from .paths import DataPath, PathLimits, enumerate_paths
from .validator import SymbolicStack, run_symbolic, validate_path

__version__ = "0.1.0"

__all__ = [
    "BasicBlock",
    "Cfg",
    "ContractGraph",
    "DataPath",
    "HeteroGraph",
    "Instruction",
    "OpcodeSpec",
    "PathLimits",
    "RCfg",
    "Selector",
    "SymbolicStack",
    "build_cfg",
    "build_feature_graph",
    "connect",
    "connect_cfgs",
    "decode_opcode",
    "disassemble",
    "enumerate_paths",
    "export_dataset",
    "extract_selectors",
    "run_symbolic",
    "segment_functions",
    "validate_path",
    "__version__",
]
