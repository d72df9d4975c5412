"""Machine-readable report output: schema-versioned JSON and CSV tables,
written atomically (write to a temp file, then rename)."""

import csv
import datetime
import json
import os
import tempfile

import numpy as np

SCHEMA = "hardyspec-report/1"


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and dataclass-style reports."""
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def make_report(command, config, result, status):
    return {
        "schema": SCHEMA,
        "command": command,
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": jsonable(config),
        "result": jsonable(result),
        "status": status,
    }


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-report-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    # floats serialize with Python's shortest round-trip repr: lossless
    _atomic_write(path, json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    import io
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating))
                         else v for v in row])
    _atomic_write(path, buf.getvalue())
