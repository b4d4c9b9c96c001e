import csv
import dataclasses
import json
import logging
import math
import os
import sys
from contextlib import contextmanager
from typing import Any, Dict, IO, Iterable, Iterator, List, Optional

import numpy as np

import config
from dm_bounds import DMChannel
from error_handling import ChannelFileError, DomainError, safe_float
from region_geometry import ParetoSlice

logger = logging.getLogger("dataset_io")

ALPHABET_KEYS = ("x", "x1", "x2", "y1", "y2")


def format_number(value: Any) -> str:
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return ""
    if value == 0.0:
        value = 0.0  # drop the sign of negative zero
    return f"{value:.{config.SIGNIFICANT_DIGITS}g}"


def normalize(obj: Any) -> Any:
    """JSON-ready copy with every float rounded to the output precision."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj)
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [normalize(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return float(format_number(value))
    return obj


@contextmanager
def open_output(path: Optional[str]) -> Iterator[IO[str]]:
    """Yields stdout for None or "-", otherwise a new file (parent directories created)."""
    if path in (None, "-"):
        yield sys.stdout
        return
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as handle:
        yield handle


def slice_rows(slices: Iterable[ParetoSlice]) -> List[Dict[str, str]]:
    rows = []
    for pareto_slice in slices:
        for record in pareto_slice.to_records():
            rows.append({key: (record[key] if key == "model" else format_number(record[key]))
                         for key in config.CSV_HEADER})
    return rows


def write_slices_csv(slices: Iterable[ParetoSlice], stream: IO[str]) -> int:
    writer = csv.DictWriter(stream, fieldnames=config.CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    rows = slice_rows(slices)
    writer.writerows(rows)
    return len(rows)


def read_slices_csv(stream: IO[str]) -> List[Dict[str, Any]]:
    reader = csv.DictReader(stream)
    if tuple(reader.fieldnames or ()) != config.CSV_HEADER:
        raise DomainError(f"Unexpected CSV header {reader.fieldnames}; expected {list(config.CSV_HEADER)}")
    rows = []
    for row in reader:
        parsed = {"model": row["model"]}
        for key in config.CSV_HEADER[1:]:
            parsed[key] = None if row[key] == "" else safe_float(row[key], key)
        rows.append(parsed)
    return rows


def slice_document(pareto_slice: ParetoSlice) -> Dict[str, Any]:
    return {
        "model": pareto_slice.model,
        "label": pareto_slice.label,
        "params": pareto_slice.params.as_dict() if pareto_slice.params else None,
        "r0": pareto_slice.r0,
        "points": pareto_slice.to_records(),
    }


def write_json(obj: Any, stream: IO[str]) -> None:
    json.dump(normalize(obj), stream, indent=2, sort_keys=True)
    stream.write("\n")


def read_json(stream: IO[str]) -> Any:
    return json.load(stream)


def parse_dm_channel(document: Dict[str, Any]) -> DMChannel:
    """Channel from a parsed channel document; rows are renormalized after the tolerance check."""
    if not isinstance(document, dict) or "alphabets" not in document or "p" not in document:
        raise ChannelFileError('Channel document needs "alphabets" and "p" entries')
    alphabets = document["alphabets"]
    try:
        sizes = [int(alphabets.get(key, 1)) for key in ALPHABET_KEYS]
    except (TypeError, ValueError, AttributeError):
        raise ChannelFileError(f"Alphabet sizes must be integers, got {alphabets!r}")
    if any(size < 1 for size in sizes):
        raise ChannelFileError(f"Alphabet sizes must be >= 1, got {dict(zip(ALPHABET_KEYS, sizes))}")
    try:
        p = np.array(document["p"], dtype=float)
    except (TypeError, ValueError):
        raise ChannelFileError("Transition tensor p is ragged or non-numeric")
    if p.ndim == 4:
        p = p[:, :, None, :, :]
    if p.shape != tuple(sizes):
        raise ChannelFileError(f"Transition tensor shape {p.shape} does not match alphabets {tuple(sizes)}")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0):
        raise ChannelFileError("Transition probabilities must be finite and nonnegative")

    sums = p.sum(axis=(3, 4))
    for index in np.ndindex(*sums.shape):
        if abs(sums[index] - 1.0) > config.CHANNEL_FILE_TOL:
            x, x1, x2 = index
            where = f"p[{x}][{x1}]" + (f"[{x2}]" if sizes[2] > 1 else "")
            raise ChannelFileError(f"Slice {where} sums to {sums[index]:.12g}, not 1")
    try:
        return DMChannel(p / sums[..., None, None])
    except DomainError as e:
        raise ChannelFileError(str(e))


def load_dm_channel(path: str) -> DMChannel:
    if not os.path.exists(path):
        raise ChannelFileError(f"Channel file {path} does not exist")
    try:
        with open(path) as handle:
            document = json.load(handle)
    except json.JSONDecodeError as e:
        raise ChannelFileError(f"Channel file {path} is not valid JSON: {e}")
    channel = parse_dm_channel(document)
    logger.info(f"Loaded channel {path} with alphabets {channel.sizes}")
    return channel


def dm_channel_document(channel: DMChannel) -> Dict[str, Any]:
    sizes = channel.sizes
    p = channel.p if channel.is_full else channel.p[:, :, 0]
    return {"alphabets": sizes, "p": p.tolist()}


def save_dm_channel(channel: DMChannel, path: str) -> None:
    with open_output(path) as handle:
        json.dump(dm_channel_document(channel), handle, indent=2)
        handle.write("\n")
