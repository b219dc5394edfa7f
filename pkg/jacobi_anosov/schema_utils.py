from __future__ import annotations

import json
import math
from functools import lru_cache
from importlib.resources import files
from typing import Iterable

import jsonschema
import numpy as np

from jacobi_anosov.errors import DataError


def ensure_columns(df, columns: Iterable[str]):
    """Select ``columns`` in order; a missing column is a bug in the producer."""
    columns = list(columns)
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise DataError(f"table is missing columns {missing}", columns=list(map(str, df.columns)))
    return df[columns]


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    return json.loads(files("jacobi_anosov").joinpath("schemas", name).read_text(encoding="utf-8"))


def to_builtin(value):
    """Plain JSON types: numpy scalars and arrays unwrapped, non-finite floats as None."""
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_builtin(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def validate_payload(payload: dict, schema_name: str) -> None:
    try:
        jsonschema.validate(payload, load_schema(schema_name))
    except jsonschema.ValidationError as e:
        raise DataError(f"{schema_name}: {e.message}", path=[str(p) for p in e.absolute_path]) from None
