"""
dynoct - Source Package

Dynamic (K, alpha)-admissible octree, its spatial queries and brute-force
oracle, the applications built on it (SVGD, kNN classification, hybrid
vector index, structure metrics), the benchmark generators/harness and
the command-line front end.
"""

from .version import VERSION

__version__ = VERSION
__author__ = "dynoct developers"
