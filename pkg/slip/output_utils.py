"""
Artifact and console helpers for the stance-phase CLI.
Handles CSV/JSON rendering with embedded configuration, atomic writes and
the [OK]/[WARN]/[ERROR] status lines on standard error.
"""

import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from tqdm import tqdm

from slip.errors import DomainError

FLOAT_FORMAT = "%.17g"
CSV_MAGIC = "# slip "
CONFIG_PREFIX = "# config: "


def status(message: str) -> None:
    """Write a status line to standard error without breaking live progress bars."""
    tqdm.write(message, file=sys.stderr)


def ok(message: str) -> None:
    status(f"[OK] {message}")


def warn(message: str) -> None:
    status(f"[WARN] {message}")


def error(message: str) -> None:
    status(f"[ERROR] {message}")


def banner(title: str) -> None:
    status("=" * 80)
    status(title)
    status("=" * 80)


def format_value(value: Any) -> str:
    """CSV cell text; floats keep 17 significant digits so they read back exactly."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, "dtype"):
        return FLOAT_FORMAT % float(value)
    return str(value)


def plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if hasattr(value, "tolist"):
        return plain(value.tolist())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def config_line(config: Dict[str, Any]) -> str:
    return json.dumps(plain(config), sort_keys=True, separators=(",", ":"))


def render_csv(
    command: str,
    config: Dict[str, Any],
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    comments: Sequence[str] = ()
) -> str:
    """
    Render a self-describing CSV table.

    Args:
        command: Subcommand that produced the table
        config: Full configuration needed to regenerate it
        header: Column names
        rows: Data rows
        comments: Extra free-text comment lines

    Returns:
        CSV text with leading "#" lines
    """
    buffer = io.StringIO()
    buffer.write(f"{CSV_MAGIC}{command}\n")
    buffer.write(f"{CONFIG_PREFIX}{config_line(config)}\n")
    for comment in comments:
        buffer.write(f"# {comment}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def render_json(command: str, config: Dict[str, Any], result: Dict[str, Any]) -> str:
    payload = {"command": command, "config": config, "result": result}
    return json.dumps(plain(payload), indent=2, sort_keys=True) + "\n"


def write_output(text: str, path: Optional[str] = None) -> Optional[Path]:
    """
    Write text once, atomically, or to standard output when path is None.

    Returns:
        The written path, or None for standard output
    """
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return None
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        "w", dir=target.parent, prefix=f".{target.name}.", suffix=".tmp", delete=False, encoding="utf-8"
    )
    try:
        with handle:
            handle.write(text)
        os.replace(handle.name, target)
    except BaseException:
        if os.path.exists(handle.name):
            os.unlink(handle.name)
        raise
    return target


def sidecar_path(path: Optional[str], suffix: str = ".summary.json") -> Optional[str]:
    """Path of the JSON summary written next to a CSV table."""
    if path is None or path == "-":
        return None
    target = Path(path)
    return str(target.with_name(target.stem + suffix))


def read_artifact(path: str) -> Tuple[str, Dict[str, Any]]:
    """
    Recover (command, config) from a file written by render_csv or render_json.

    Raises:
        DomainError: the file does not carry an embedded configuration
    """
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith(CSV_MAGIC):
        lines = text.splitlines()
        command = lines[0][len(CSV_MAGIC):].strip()
        for line in lines[1:]:
            if line.startswith(CONFIG_PREFIX):
                return command, json.loads(line[len(CONFIG_PREFIX):])
        raise DomainError(f"{path}: CSV artifact has no embedded configuration", path=path)
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise DomainError(f"{path}: not a CSV or JSON artifact ({e})", path=path)
    if not isinstance(payload, dict) or "command" not in payload or "config" not in payload:
        raise DomainError(f"{path}: JSON artifact lacks command/config", path=path)
    return payload["command"], payload["config"]


def read_table(path: str) -> Tuple[List[str], List[List[str]]]:
    """Header and data rows of a CSV artifact, comment lines skipped."""
    lines = [line for line in Path(path).read_text(encoding="utf-8").splitlines() if not line.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise DomainError(f"{path}: empty table", path=path)
    return rows[0], rows[1:]
