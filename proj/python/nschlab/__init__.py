"""Diffuse-interface two-phase flow laboratory (Python bindings)."""

try:
    from ._nsch import *  # noqa: F401,F403  (installed package layout)
except ImportError:
    from _nsch import *  # noqa: F401,F403  (in-tree build: module on PYTHONPATH)
