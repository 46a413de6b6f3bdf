"""Adversarial edit attacks on tree-structured data."""
from .edits import Deletion, Insertion, Replacement, apply_edit, apply_script
from .trees import Tree, node_at, parse, serialize, size

__version__ = "0.1.0"
