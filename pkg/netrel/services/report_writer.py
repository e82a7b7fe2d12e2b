"""
Report Writer
Renders reports and summaries to CSV / JSON in memory and writes them only once
a command has fully succeeded.
"""

import csv
import io
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

from pydantic import BaseModel

logger = logging.getLogger(__name__)


def render_csv(rows: Iterable[dict], fieldnames: List[str]) -> str:
    """CSV text with a header row; '.' decimal point, '\\n' line ends."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def render_json(payload: Union[BaseModel, dict, list]) -> str:
    if isinstance(payload, BaseModel):
        return payload.model_dump_json(indent=2) + "\n"
    return json.dumps(payload, indent=2) + "\n"


class OutputBundle:
    """Files staged in memory, committed together."""

    def __init__(self):
        self.files: Dict[str, str] = {}

    def add_csv(self, name: str, rows: List[dict], fieldnames: Optional[List[str]] = None) -> None:
        if fieldnames is None:
            if not rows:
                raise ValueError(f"{name}: no rows and no header given")
            fieldnames = list(rows[0].keys())
        self.files[name] = render_csv(rows, fieldnames)

    def add_json(self, name: str, payload) -> None:
        self.files[name] = render_json(payload)

    def commit(self, out_dir: Union[str, Path]) -> List[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in self.files.items():
            path = out_dir / name
            path.write_text(text, encoding="utf-8")
            written.append(path)
            logger.info(f"Wrote {path}")
        return written
