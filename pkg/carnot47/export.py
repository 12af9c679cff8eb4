"""
CSV writers with '#'-prefixed provenance lines.
"""

import logging
from pathlib import Path
from typing import IO, Dict, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)


def metadata_lines(metadata: Dict) -> str:
    return "".join(f"# {key}: {metadata[key]}\n" for key in sorted(metadata))


def write_csv(target: Union[str, Path, IO[str]], columns: Sequence[str], rows: np.ndarray,
              metadata: Dict) -> None:
    """Write metadata, one header line and full-precision rows."""
    rows = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    if isinstance(target, (str, Path)):
        path = Path(target)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            _write(f, columns, rows, metadata)
        logger.info("Wrote %d rows to %s", len(rows), path)
    else:
        _write(target, columns, rows, metadata)


def _write(f: IO[str], columns, rows, metadata) -> None:
    f.write(metadata_lines(metadata))
    np.savetxt(f, rows, delimiter=",", fmt="%.17g", header=",".join(columns), comments="")


def read_csv(path: Union[str, Path]):
    """Inverse of write_csv: (metadata, columns, rows)."""
    metadata, columns = {}, None
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(": ")
                metadata[key] = value
            else:
                columns = tuple(line.strip().split(","))
                break
        rows = np.loadtxt(f, delimiter=",", ndmin=2)
    return metadata, columns, rows
