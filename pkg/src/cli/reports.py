"""CSV, markdown and manifest artifacts of a command run."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

logger = logging.getLogger(__name__)

# columns measured from wall-clock time differ between identical runs
TIMING_COLUMNS = frozenset(
    {"wall_ms", "median_ms", "mad_ms", "ms_per_image", "mad_ms_per_image", "measured_value"}
)
MANIFEST = "manifest.json"


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def deterministic_digest(text: str) -> str:
    """SHA-256 of a CSV with its timing columns removed."""
    reader = list(csv.reader(io.StringIO(text)))
    if not reader:
        return hashlib.sha256(b"").hexdigest()
    keep = [i for i, name in enumerate(reader[0]) if name not in TIMING_COLUMNS]
    stripped = csv_text([reader[0][i] for i in keep], ([r[i] for i in keep] for r in reader[1:]))
    return hashlib.sha256(stripped.encode()).hexdigest()


class ReportWriter:
    """Collects the artifacts of one command and writes its manifest."""

    def __init__(self, out_dir: Path, command: str):
        self.out_dir = Path(out_dir)
        self.command = command
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.digests: Dict[str, str] = {}
        self.files: List[str] = []

    def write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        path.write_text(text)
        self.files.append(name)
        logger.info("Wrote %s", path)
        return path

    def write_csv(self, name: str, text_or_header, rows=None) -> Path:
        """Write a CSV given its text, or a header plus rows."""
        text = text_or_header if rows is None else csv_text(text_or_header, rows)
        self.digests[name] = deterministic_digest(text)
        return self.write_text(name, text)

    def write_markdown(self, name: str, text: str) -> Path:
        return self.write_text(name, text)

    def add_binary(self, name: str) -> None:
        """Record a binary artifact (a checkpoint) already saved in out_dir."""
        data = (self.out_dir / name).read_bytes()
        self.digests[name] = hashlib.sha256(data).hexdigest()
        self.files.append(name)

    def write_manifest(self) -> Path:
        manifest = {
            "command": self.command,
            "files": sorted(set(self.files)),
            "digests": dict(sorted(self.digests.items())),
        }
        path = self.out_dir / MANIFEST
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path


def markdown_table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "---|" * len(header),
    ]
    for row in rows:
        cells = [f"{v:.4f}" if isinstance(v, float) else format_value(v) for v in row]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
