"""Parameter checkpoints as flat CSV.

Layout::

    format,basketgen-checkpoint,1
    meta,<JSON object>
    name,shape,values
    <name>,<d0>x<d1>...,<space separated float reprs>

A scalar has an empty shape field. Values are written with ``repr`` so a
save/load round trip is bit exact.
"""
import csv
import json
import os
import tempfile

import numpy as np

FORMAT_NAME = "basketgen-checkpoint"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, arrays, meta=None):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["format", FORMAT_NAME, FORMAT_VERSION])
            w.writerow(["meta", json.dumps(meta or {}, sort_keys=True)])
            w.writerow(["name", "shape", "values"])
            for name, value in arrays.items():
                arr = np.asarray(value, dtype=np.float64)
                shape = "x".join(str(d) for d in arr.shape)
                w.writerow([name, shape, " ".join(repr(float(v)) for v in arr.reshape(-1))])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    """Return ``(arrays, meta)`` from a checkpoint written by :func:`save_checkpoint`."""
    # a whole weight matrix sits in one field
    csv.field_size_limit(max(csv.field_size_limit(), 1 << 30))
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3 or rows[0][:2] != ["format", FORMAT_NAME]:
        raise CheckpointError(f"{path}: not a {FORMAT_NAME} file")
    version = int(rows[0][2])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    if rows[1][0] != "meta" or rows[2] != ["name", "shape", "values"]:
        raise CheckpointError(f"{path}: malformed header")
    meta = json.loads(rows[1][1])
    arrays = {}
    for lineno, row in enumerate(rows[3:], start=4):
        if len(row) != 3:
            raise CheckpointError(f"{path}:{lineno}: expected 3 fields")
        name, shape_text, values = row
        shape = tuple(int(d) for d in shape_text.split("x")) if shape_text else ()
        flat = np.array([float(v) for v in values.split()], dtype=np.float64)
        if flat.size != int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"{path}:{lineno}: {name} has {flat.size} values for shape {shape}")
        arrays[name] = flat.reshape(shape)
    return arrays, meta
