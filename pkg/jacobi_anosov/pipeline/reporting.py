import json
from pathlib import Path

import pandas as pd

from jacobi_anosov.config import settings
from jacobi_anosov.config.logging import get_logger
from jacobi_anosov.schema_utils import ensure_columns, to_builtin, validate_payload

logger = get_logger(__name__)


def write_csv(df: pd.DataFrame, path: Path) -> Path:
    """Header row, comma separator, '.' decimals and LF line endings."""
    columns = settings.CSV_COLUMNS.get(path.name, list(df.columns))
    ensure_columns(df, columns).to_csv(path, index=False, lineterminator="\n", float_format=settings.CSV_FLOAT_FORMAT)
    logger.info(f"Wrote {len(df)} rows to {path}")
    return path


def write_json(payload: dict, path: Path) -> Path:
    """Validate against the shipped schema, then write."""
    payload = to_builtin(payload)
    validate_payload(payload, settings.JSON_SCHEMAS[path.name])
    path.write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def write_config_used(context):
    write_json(context["config"].to_dict(), context["out_dir"] / settings.CONFIG_USED_JSON)
    return context


def write_outputs(context):
    formats = context["config"].output.formats
    out_dir = context["out_dir"]
    written = []
    if "csv" in formats:
        written += [write_csv(df, out_dir / name) for name, df in context["csv"].items()]
    if "json" in formats:
        written += [write_json(payload, out_dir / name) for name, payload in context["json"].items()]
    context["written"] = written
    return context
