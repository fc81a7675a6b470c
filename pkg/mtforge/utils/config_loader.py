# mtforge/utils/config_loader.py
import csv
import json
from pathlib import Path
from typing import Dict, List, Tuple

CONFIG_DIR = Path(__file__).parent.parent / "config"
PUBLISHED_DIR = CONFIG_DIR / "published"


def bundled_path(name: str) -> Path:
    """Path of a file shipped under mtforge/config/."""
    return CONFIG_DIR / name


def load_bundled_json(name: str) -> dict:
    """
    Loads a JSON table bundled with the package.

    Raises FileNotFoundError / json.JSONDecodeError untouched so callers can
    decide which error class a broken asset maps to.
    """
    with open(bundled_path(name), "r", encoding="utf-8") as f:
        return json.load(f)


def read_commented_csv(path) -> Tuple[List[str], List[Dict[str, str]]]:
    """
    Reads a CSV whose leading '#' lines carry metadata.

    Returns the comment lines (stripped of the '#') and the rows as dicts
    keyed by header.
    """
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = f.read().splitlines()
    comments: List[str] = []
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("#"):
            comments.append(line[1:].strip())
            body_start = i + 1
        else:
            break
    reader = csv.DictReader(lines[body_start:])
    return comments, [dict(row) for row in reader]


def load_published_csv(name: str) -> Tuple[List[str], List[Dict[str, str]]]:
    """Loads one of the transcribed published tables under config/published/."""
    return read_commented_csv(PUBLISHED_DIR / name)
