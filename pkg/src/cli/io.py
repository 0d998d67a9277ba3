"""
CSV codecs for the command line.

Every input file carries a header row; columns must match exactly and in
order. Outputs are written with pandas, one header row, no index column,
empty fields for missing values.
"""

import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.applications import LabeledPoint, Trajectory
from src.core.error_handler import InputError
from src.core.validation_utils import Point3, validate_columns

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

POINT_COLUMNS = ['id', 'x', 'y', 'z']
LABELED_COLUMNS = ['id', 'x', 'y', 'z', 'label']
TRAJECTORY_COLUMNS = ['point_id', 't', 'x', 'y', 'z']

NEIGHBOR_COLUMNS = ['id', 'neighbor_id', 'distance']
SVGD_COLUMNS = ['iter', 'wall_ms', 'mean_logp']
KNN_COLUMNS = ['batch_index', 'update_ms', 'query_ms', 'accuracy']
INDEX_COLUMNS = ['query_id', 'rank', 'result_id', 'distance']
METRICS_COLUMNS = ['scope', 'id', 'metric', 'value']
CELL_COLUMNS = ['lo_x', 'lo_y', 'lo_z', 'hi_x', 'hi_y', 'hi_z', 'count', 'mean_distortion']
VALIDATE_COLUMNS = ['K', 'alpha', 'ops', 'size', 'violations', 'depth_capped', 'oracle_mismatches', 'status']


def _read_csv(path: PathLike) -> pd.DataFrame:
    try:
        return pd.read_csv(path, skipinitialspace=True)
    except FileNotFoundError:
        raise InputError(f"File not found: {path}", field_name='path', field_value=path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise InputError(f"{path}: malformed CSV ({e})", field_name='path', field_value=path)


def _numeric(frame: pd.DataFrame, columns: Sequence[str], source: PathLike) -> np.ndarray:
    try:
        values = frame[list(columns)].to_numpy(dtype=np.float64)
    except (TypeError, ValueError):
        raise InputError(f"{source}: non-numeric value in columns {','.join(columns)}", field_name='path',
                         field_value=source)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise InputError(f"{source}: missing or non-finite value on data row {row + 1}",
                         field_name='path', field_value=source)
    return values


def _integers(frame: pd.DataFrame, column: str, source: PathLike) -> np.ndarray:
    values = _numeric(frame, [column], source)[:, 0]
    if np.any(values != np.floor(values)) or np.any(values < 0):
        raise InputError(f"{source}: {column} must hold non-negative integers", field_name=column,
                         field_value=source)
    return values.astype(np.int64)


def _unique_ids(ids: np.ndarray, source: PathLike) -> np.ndarray:
    values, counts = np.unique(ids, return_counts=True)
    if np.any(counts > 1):
        raise InputError(f"{source}: duplicate id {int(values[counts > 1][0])}", field_name='id',
                         field_value=int(values[counts > 1][0]))
    return ids


def read_points(path: PathLike) -> List[Tuple[int, Point3]]:
    """`id,x,y,z` rows as (id, position) pairs in file order"""
    frame = _read_csv(path)
    validate_columns(frame.columns, POINT_COLUMNS, str(path))
    ids = _unique_ids(_integers(frame, 'id', path), path)
    coords = _numeric(frame, ['x', 'y', 'z'], path)
    logger.info(f"Read {len(ids)} points from {path}")
    return [(point_id, (p[0], p[1], p[2])) for point_id, p in zip(ids.tolist(), coords.tolist())]


def read_labeled(path: PathLike) -> List[LabeledPoint]:
    """`id,x,y,z,label` rows"""
    frame = _read_csv(path)
    validate_columns(frame.columns, LABELED_COLUMNS, str(path))
    ids = _unique_ids(_integers(frame, 'id', path), path)
    labels = _integers(frame, 'label', path)
    coords = _numeric(frame, ['x', 'y', 'z'], path)
    logger.info(f"Read {len(ids)} labeled points from {path}")
    return [LabeledPoint(i, tuple(p), c) for i, p, c in zip(ids.tolist(), coords.tolist(), labels.tolist())]


def read_vectors(path: PathLike, dim: Optional[int] = None) -> Tuple[List[int], np.ndarray]:
    """
    `id,v0,...,v{D-1}` rows.

    Raises:
        InputError: header does not match, or D differs from `dim`
    """
    frame = _read_csv(path)
    width = dim if dim is not None else len(frame.columns) - 1
    if width < 1:
        raise InputError(f"{path}: no vector columns", field_name='path', field_value=path)
    vector_columns = [f"v{i}" for i in range(width)]
    validate_columns(frame.columns, ['id'] + vector_columns, str(path))
    ids = _unique_ids(_integers(frame, 'id', path), path)
    return ids.tolist(), _numeric(frame, vector_columns, path)


def read_trajectory(path: PathLike) -> Trajectory:
    """`point_id,t,x,y,z` rows; samples of each point are ordered by t"""
    frame = _read_csv(path)
    validate_columns(frame.columns, TRAJECTORY_COLUMNS, str(path))
    point_ids = _integers(frame, 'point_id', path)
    t = _numeric(frame, ['t'], path)[:, 0]
    coords = _numeric(frame, ['x', 'y', 'z'], path)

    per_point: Dict[int, List[Tuple[float, List[float]]]] = {}
    for point_id, ti, p in zip(point_ids.tolist(), t.tolist(), coords.tolist()):
        per_point.setdefault(point_id, []).append((ti, p))
    ordered = {}
    for point_id, samples in per_point.items():
        times = [ti for ti, _ in samples]
        if len(set(times)) != len(times):
            raise InputError(f"{path}: point {point_id} has repeated t values", field_name='t',
                             field_value=point_id)
        ordered[point_id] = [p for _, p in sorted(samples, key=lambda s: s[0])]
    return Trajectory.from_mapping(ordered)


def write_frame(frame: pd.DataFrame, path: Optional[PathLike] = None) -> None:
    """Write to `path`, or to stdout when no path is given"""
    if path is None:
        frame.to_csv(sys.stdout, index=False, na_rep='', lineterminator='\n')
        return
    target = Path(path)
    if target.parent and not target.parent.exists():
        target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(target, index=False, na_rep='', lineterminator='\n')
    logger.info(f"Wrote {len(frame)} rows to {target}")


def rows_frame(rows, columns: Sequence[str]) -> pd.DataFrame:
    """DataFrame with exactly `columns`, from tuples or mappings"""
    return pd.DataFrame(list(rows), columns=list(columns))
