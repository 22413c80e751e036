"""
Result Storage
Handles file-based storage of run manifests, summaries, tables and event logs
"""

import json
import logging
import os
from io import StringIO
from pathlib import Path
from typing import Any, Dict, Optional, Union

import pandas as pd
from pydantic import BaseModel

logger = logging.getLogger(__name__)


def atomic_write(path: Path, payload: Union[str, bytes]) -> Path:
    """Write `payload` to a sibling temp file, fsync it, then rename over `path`"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    if isinstance(payload, str):
        payload = payload.encode("utf-8")
    with open(tmp, "wb") as f:
        f.write(payload)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)
    return path


def canonical_json(data: Union[BaseModel, Dict[str, Any]]) -> str:
    """Sorted-key, indented JSON; byte-identical for equal inputs"""
    if isinstance(data, BaseModel):
        data = data.model_dump(mode="json")
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


class ResultStore:
    """Handles storage and retrieval of one run directory's result files"""

    def __init__(self, run_dir: Union[str, Path]):
        self.run_dir = Path(run_dir)
        self._ensure_directory()

    def _ensure_directory(self):
        """Create run directory if it doesn't exist"""
        self.run_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.run_dir / name

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def save_json(self, name: str, data: Union[BaseModel, Dict[str, Any]]) -> Path:
        """
        Save a record as canonical JSON

        Args:
            name: File name inside the run directory
            data: Pydantic model or plain dict
        """
        filepath = atomic_write(self.path(name), canonical_json(data))
        logger.debug(f"Wrote {filepath}")
        return filepath

    def load_json(self, name: str) -> Optional[Dict[str, Any]]:
        """
        Load a JSON record

        Returns:
            dict: Record data or None if not found
        """
        filepath = self.path(name)
        if not filepath.exists():
            return None
        with open(filepath, "r", encoding="utf-8") as f:
            return json.load(f)

    def save_table(self, name: str, frame: pd.DataFrame) -> Path:
        """Save a DataFrame as CSV with full float precision"""
        buffer = StringIO()
        frame.to_csv(buffer, index=False, float_format="%.17g", lineterminator="\n")
        filepath = atomic_write(self.path(name), buffer.getvalue())
        logger.debug(f"Wrote {filepath} ({len(frame)} rows)")
        return filepath

    def load_table(self, name: str) -> Optional[pd.DataFrame]:
        filepath = self.path(name)
        if not filepath.exists():
            return None
        return pd.read_csv(filepath)

    def save_text(self, name: str, text: str) -> Path:
        return atomic_write(self.path(name), text)

    def load_text(self, name: str) -> Optional[str]:
        filepath = self.path(name)
        return filepath.read_text(encoding="utf-8") if filepath.exists() else None

    def save_bytes(self, name: str, payload: bytes) -> Path:
        return atomic_write(self.path(name), payload)

    def load_bytes(self, name: str) -> Optional[bytes]:
        filepath = self.path(name)
        return filepath.read_bytes() if filepath.exists() else None
