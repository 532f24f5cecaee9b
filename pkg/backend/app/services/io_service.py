import json
import math
from enum import Enum

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .corr_service import CorrelationMatrix
from ..utils.errors import DimensionError, InputError

# ==========================================
# 1. CSV INGESTION
# ==========================================


def _read_numeric_frame(source) -> pd.DataFrame:
    """Comma-separated numbers; a first row with any non-numeric cell is taken as the header."""
    try:
        raw = pd.read_csv(source, header=None, dtype=str, skipinitialspace=True)
    except FileNotFoundError:
        raise InputError(f"File not found: {source}")
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise InputError(f"Unreadable CSV: {e}")

    first = pd.to_numeric(raw.iloc[0], errors="coerce")
    if first.isna().any():
        raw = raw.iloc[1:]
    if raw.empty:
        raise InputError("CSV holds a header but no numeric rows.")

    values = raw.apply(pd.to_numeric, errors="coerce")
    if values.isna().any().any():
        bad = values.isna().stack()
        r, c = bad[bad].index[0]
        raise InputError(f"Missing or non-numeric value at row {r}, column {c}.")
    return values.astype(float)


def read_data_csv(source) -> np.ndarray:
    """n x p data matrix."""
    return _read_numeric_frame(source).to_numpy()


def read_corr_csv(source, kind: str = "sample") -> CorrelationMatrix:
    """p x p correlation matrix; `kind` is whatever the caller declares."""
    m = _read_numeric_frame(source).to_numpy()
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"Correlation CSV must be square, got {m.shape[0]} x {m.shape[1]}.")
    return CorrelationMatrix.from_array(m, kind=kind)


def write_matrix_csv(path, matrix, header=None):
    frame = pd.DataFrame(np.asarray(matrix, dtype=float), columns=header)
    frame.to_csv(path, index=False, header=header is not None, float_format="%.17g")


# ==========================================
# 2. JSON EMISSION
# ==========================================

def to_jsonable(obj):
    """Plain-Python view of results: numpy scalars and arrays, enums, sets, pydantic models."""
    if isinstance(obj, BaseModel):
        return to_jsonable(obj.model_dump(mode="json"))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return [to_jsonable(v) for v in sorted(obj)]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        # JSON has no inf / nan
        return float(obj) if math.isfinite(obj) else None
    return obj


def dumps(obj, indent: int = 2) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=indent)
