"""
CLI Module

Command-line front end: argument parsing, CSV codecs and run manifests.
"""

from .main import build_parser, dispatch, main
from .manifest import RunManifest, manifest_path, write_manifest

__all__ = [
    'build_parser',
    'dispatch',
    'main',
    'RunManifest',
    'manifest_path',
    'write_manifest'
]
