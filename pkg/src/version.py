"""
dynoct - Version Information
"""

VERSION = "1.0.0"
VERSION_NAME = "Dynamic Octree Toolkit"
RELEASE_DATE = "2026-10-17"


def version_string() -> str:
    """Banner printed by `--version`"""
    return f"dynoct {VERSION} ({VERSION_NAME}, {RELEASE_DATE})"
