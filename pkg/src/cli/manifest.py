"""
Run manifests: a JSON record written next to every output file.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from src.version import VERSION

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    """Subcommand, resolved flags, seed and timing of one invocation"""
    subcommand: str
    flags: Dict[str, Any]
    seed: Optional[int]
    version: str = VERSION
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None
    outputs: List[str] = field(default_factory=list)

    def finish(self) -> "RunManifest":
        self.finished_at = _now()
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def manifest_path(output: Union[str, Path]) -> Path:
    output = Path(output)
    return output.with_name(output.name + MANIFEST_SUFFIX)


def write_manifest(manifest: RunManifest) -> List[Path]:
    """One manifest per output file; nothing when the run wrote only to stdout"""
    written = []
    for output in manifest.outputs:
        path = manifest_path(output)
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(manifest.to_dict(), handle, indent=2, sort_keys=True, default=str)
            handle.write('\n')
        written.append(path)
        logger.debug(f"Wrote manifest {path}")
    return written
