"""Tabular artifact emission and the per-run manifest.

CSV files are RFC-4180 style: header row, '.' decimal separator, floats
at 17 significant digits so parse(emit(x)) round-trips exactly.  Every
file written by the CLI gets a sibling manifest recording what produced
it; the config hash is canonical (key order does not matter).
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, asdict

from .errors import ValidationError


def format_value(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def emit_csv(records, fieldnames, path) -> None:
    """Write records (dicts) as CSV in the given column order.

    Records must carry exactly the schema's fields; an empty record set
    produces a header-only file.
    """
    fieldnames = list(fieldnames)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for i, rec in enumerate(records):
            if set(rec.keys()) != set(fieldnames):
                missing = set(fieldnames) - set(rec.keys())
                extra = set(rec.keys()) - set(fieldnames)
                raise ValidationError(
                    f"record {i} does not conform to schema "
                    f"(missing {sorted(missing)}, extra {sorted(extra)})"
                )
            writer.writerow([format_value(rec[name]) for name in fieldnames])


def emit_rows_csv(columns, rows, path) -> None:
    """Write a (columns, rows) table as CSV; rows are positional lists."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def rows_to_text(columns, rows) -> str:
    """The same table rendered as CSV text (for stdout printing)."""
    out = []
    out.append(",".join(str(c) for c in columns))
    for row in rows:
        out.append(",".join(format_value(v) for v in row))
    return "\n".join(out) + "\n"


def canonical_hash(doc) -> str:
    """sha256 of the canonical JSON form; stable under key reordering."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    """Provenance for one CLI artifact set."""

    subcommand: str
    config_hash: str
    seed: int | None
    artifacts: list[str]
    wall_clock_utc: str
    duration_s: float
    version: str

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
