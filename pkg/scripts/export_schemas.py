#!/usr/bin/env python3
"""
Write the JSON schema of every report model into schemas/.

    python scripts/export_schemas.py          # rewrite schemas/
    python scripts/export_schemas.py --check  # fail when schemas/ is stale
"""

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Dict, List, Tuple

ROOT = Path(os.path.dirname(os.path.abspath(__file__))).parent
sys.path.append(str(ROOT / "src"))
sys.path.append(str(ROOT / "app"))

from certify import CertifyReport  # noqa: E402
from fano import LowerBoundReport  # noqa: E402
from lowdeg import DistinguishReport, LowDegReport  # noqa: E402
from main import GenReport, RunConfig, SparkReport  # noqa: E402
from noise import KLShiftResult  # noqa: E402
from regression import HardnessReport  # noqa: E402
from reporting import atomic_write_bytes  # noqa: E402
from spreadness import SpreadVerdict  # noqa: E402

SCHEMA_DIR = ROOT / "schemas"

REPORT_MODELS = {
    "gen": GenReport,
    "spread-check": SpreadVerdict,
    "certify": CertifyReport,
    "kl": KLShiftResult,
    "fano": LowerBoundReport,
    "lowdeg": LowDegReport,
    "distinguish": DistinguishReport,
    "regress": HardnessReport,
    "spark": SparkReport,
}


def envelope_schema(subcommand: str, model) -> dict:
    """Schema of the report envelope around one report model."""
    report = model.model_json_schema(mode="serialization", by_alias=True)
    # Nested models refer to "#/$defs/...", resolved from the document root.
    defs = report.pop("$defs", {})
    schema = {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": f"spreadlab {subcommand} report",
        "type": "object",
        "required": ["tool", "version", "subcommand", "config", "seed", "report"],
        "properties": {
            "tool": {"const": "spreadlab"},
            "version": {"type": "string"},
            "subcommand": {"const": subcommand},
            "config": RunConfig.model_json_schema(),
            "seed": {"type": ["integer", "null"]},
            "report": report,
        },
    }
    if defs:
        schema["$defs"] = defs
    return schema


def schema_path(directory: Path, subcommand: str) -> Path:
    return directory / f"{subcommand}.schema.json"


def export(directory: Path) -> list:
    written = []
    for subcommand, model in REPORT_MODELS.items():
        schema = envelope_schema(subcommand, model)
        path = schema_path(directory, subcommand)
        atomic_write_bytes(path, (json.dumps(schema, indent=2, sort_keys=True) + "\n").encode())
        written.append(path)
    return written


def schema_outline(schema: dict) -> Dict[str, Tuple[List[str], List[str]]]:
    """
    Property names and required keys of every object in an envelope schema.

    Titles, descriptions and constraint spellings vary between pydantic
    releases; the outline only changes when a report gains, loses or
    renames a field.

    Args:
        schema: Envelope schema as written by export()

    Returns:
        Mapping of object path to (sorted property names, sorted required keys)
    """
    objects = {
        "envelope": schema,
        "config": schema["properties"]["config"],
        "report": schema["properties"]["report"],
    }
    for name, definition in schema.get("$defs", {}).items():
        objects[f"$defs/{name}"] = definition
    return {
        path: (sorted(obj.get("properties", {})), sorted(obj.get("required", [])))
        for path, obj in objects.items()
    }


def stale_schemas(directory: Path) -> List[str]:
    """Subcommands whose committed schema differs in outline from a fresh export."""
    stale = []
    for subcommand, model in REPORT_MODELS.items():
        path = schema_path(directory, subcommand)
        if not path.exists():
            stale.append(subcommand)
            continue
        committed = json.loads(path.read_text())
        if schema_outline(committed) != schema_outline(envelope_schema(subcommand, model)):
            stale.append(subcommand)
    return stale


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Export report schemas")
    parser.add_argument("--check", action="store_true", help="Only compare with schemas/")
    args = parser.parse_args()
    if args.check:
        stale = stale_schemas(SCHEMA_DIR)
        for subcommand in stale:
            print(f"stale: {schema_path(SCHEMA_DIR, subcommand)}")
        sys.exit(1 if stale else 0)
    for path in export(SCHEMA_DIR):
        print(f"wrote {path}")
