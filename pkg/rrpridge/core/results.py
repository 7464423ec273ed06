"""
Result Persistence

Writes versioned CSV tables and a JSON manifest into an output directory.
Every CSV starts with a ``# schema=<name> version=<v>`` line followed by the
column header; files are UTF-8 with LF line endings and '.' decimals.
"""

import json
from pathlib import Path
from typing import Any

import pandas as pd

from rrpridge.core.errors import DataError
from rrpridge.core.logger import log_error, log_event

# Bumped whenever a table's columns change.
SCHEMA_VERSIONS: dict[str, int] = {
    "bench_records": 1,
    "bench_summary": 1,
    "spectrogram": 1,
    "stft": 1,
    "rrps": 1,
    "groups": 1,
    "curves": 1,
    "bands": 1,
    "ridges": 1,
    "modes": 1,
    "denoised_stft": 1,
    "strain": 1,
}


class ResultStore:
    """Manages the tables and manifest of one experiment output directory."""

    def __init__(self, out_dir: str | Path, manifest_name: str = "manifest.json"):
        """
        Initialize the store.

        Args:
            out_dir: Directory receiving the CSV files and the manifest
            manifest_name: File name of the JSON manifest inside out_dir
        """
        self.out_dir = Path(out_dir)
        self.manifest_file = self.out_dir / manifest_name
        self._manifest: dict[str, Any] = {"tables": {}, "reports": {}}
        self._load_manifest()

    def _load_manifest(self) -> None:
        """Load an existing manifest, starting fresh when absent or broken."""
        try:
            if self.manifest_file.exists():
                with open(self.manifest_file, encoding="utf-8") as f:
                    self._manifest = json.load(f)
                self._manifest.setdefault("tables", {})
                self._manifest.setdefault("reports", {})
                log_event("manifest_loaded", tables=len(self._manifest["tables"]))
        except (OSError, json.JSONDecodeError) as e:
            log_error(e, "Failed to load manifest", file=str(self.manifest_file))
            self._manifest = {"tables": {}, "reports": {}}

    def _save_manifest(self) -> None:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            with open(self.manifest_file, "w", encoding="utf-8", newline="\n") as f:
                json.dump(self._manifest, f, indent=2, ensure_ascii=False)
        except OSError as e:
            raise DataError(f"Cannot write manifest {self.manifest_file}: {e}") from e

    def write_table(
        self, schema: str, frame: pd.DataFrame, file_name: str | None = None
    ) -> Path:
        """
        Write a DataFrame as a versioned CSV and register it in the manifest.

        Args:
            schema: Table schema name (a key of SCHEMA_VERSIONS)
            frame: Table content; columns are written in frame order
            file_name: Optional file name, defaults to "<schema>.csv"

        Returns:
            Path of the written file
        """
        version = SCHEMA_VERSIONS.get(schema, 1)
        path = self.out_dir / (file_name or f"{schema}.csv")
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(f"# schema={schema} version={version}\n")
                frame.to_csv(f, index=False, lineterminator="\n")
        except OSError as e:
            raise DataError(f"Cannot write {path}: {e}") from e

        self._manifest["tables"][path.name] = {
            "schema": schema,
            "version": version,
            "rows": int(len(frame)),
            "columns": [str(c) for c in frame.columns],
        }
        self._save_manifest()
        log_event("table_written", schema=schema, file=str(path), rows=len(frame))
        return path

    def write_report(self, name: str, report: dict[str, Any]) -> Path:
        """Write a JSON report next to the tables."""
        path = self.out_dir / f"{name}.json"
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                json.dump(report, f, indent=2, ensure_ascii=False, default=float)
        except OSError as e:
            raise DataError(f"Cannot write {path}: {e}") from e
        self._manifest["reports"][path.name] = sorted(report)
        self._save_manifest()
        log_event("report_written", file=str(path))
        return path

    def write_text(self, file_name: str, text: str) -> Path:
        """Write a plain text block (model coefficients and the like)."""
        path = self.out_dir / file_name
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
        except OSError as e:
            raise DataError(f"Cannot write {path}: {e}") from e
        self._manifest["reports"][path.name] = "text"
        self._save_manifest()
        return path

    def tables(self) -> dict[str, Any]:
        """Manifest entries of every table written so far."""
        return dict(self._manifest["tables"])


def read_table(path: str | Path) -> pd.DataFrame:
    """Read a CSV written by ResultStore, skipping the schema line."""
    try:
        return pd.read_csv(path, comment="#")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"Cannot read table {path}: {e}") from e


def table_schema(path: str | Path) -> tuple[str, int]:
    """(schema, version) from the first line of a CSV written by ResultStore."""
    try:
        with open(path, encoding="utf-8") as f:
            first = f.readline().strip()
    except OSError as e:
        raise DataError(f"Cannot read table {path}: {e}") from e
    parts = first.lstrip("# ").split()
    fields = dict(part.split("=", 1) for part in parts if "=" in part)
    if "schema" not in fields or "version" not in fields:
        raise DataError(f"{path} has no schema line")
    return fields["schema"], int(fields["version"])
