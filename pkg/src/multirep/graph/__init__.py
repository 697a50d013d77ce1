from .cfg import build_cfg
from .dot import DotParseError, MissingLabelError, export_dot, import_dot
from .model import END, START, CodeGraph, Edge, EdgeLabel, Node
from .parser import TERMINAL_TYPES, CSyntaxError, UnsupportedConstruct, parse_c
from .pdg import PostDominanceFailure, build_pdg

__all__ = [
    "CodeGraph", "Edge", "EdgeLabel", "Node", "START", "END", "TERMINAL_TYPES",
    "parse_c", "build_cfg", "build_pdg", "import_dot", "export_dot",
    "CSyntaxError", "UnsupportedConstruct", "PostDominanceFailure", "DotParseError", "MissingLabelError",
]
