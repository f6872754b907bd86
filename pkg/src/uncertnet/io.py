"""Plain-text file formats and the JSON result document.

Edge-probability files look like::

    # nodes=4
    0	1	0.90000000000000002
    1	3	0.25

with 0-based node ids, ``i < j`` on write (either order is accepted on read)
and ``0 < q <= 1``.  Blank lines and other ``#`` lines are ignored.  Numbers
are written with 17 significant digits so that a read/write cycle is exact.
"""

import datetime
import json
import os
import re

import numpy as np

from .errors import ParseError, ValidationError
from .evaluation import EdgeScoreList
from .network import Partition, validate

FLOAT_FORMAT = "{:.17g}"
SCHEMA_VERSION = 1

_HEADER = re.compile(r"#\s*(\w+)\s*=\s*(\S+)\s*$")


def _fmt(x):
    return FLOAT_FORMAT.format(float(x))


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def _records(lines, ncols, what):
    """Split data lines into columns; returns (headers, rows, line numbers)."""
    headers, rows, numbers = {}, [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _HEADER.match(line)
            if m:
                headers[m.group(1).lower()] = (m.group(2), lineno)
            continue
        parts = line.split()
        if len(parts) not in ncols:
            raise ParseError(f"expected {' or '.join(map(str, ncols))} columns in {what}, "
                             f"found {len(parts)}", line=lineno)
        rows.append(parts)
        numbers.append(lineno)
    return headers, rows, numbers


def _int_header(headers, key):
    if key not in headers:
        return None
    value, lineno = headers[key]
    try:
        out = int(value)
    except ValueError:
        raise ParseError(f"header {key}= needs an integer, got {value!r}", line=lineno) from None
    if out < 0:
        raise ParseError(f"header {key}= must be non-negative", line=lineno)
    return out


def _parse_int(token, lineno, what="node id"):
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"bad {what} {token!r}", line=lineno) from None


def _parse_float(token, lineno):
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"bad probability {token!r}", line=lineno) from None


def parse_edgeprob_text(text):
    return _parse_edgeprob(text.splitlines())


def parse_edgeprob_file(path):
    """Read an edge-probability file into an :class:`UncertainNetwork`.

    Without a ``# nodes=`` header the node count is one past the largest id.
    Validation failures carry the offending line number.
    """
    return _parse_edgeprob(_read_lines(path))


def _parse_edgeprob(lines):
    headers, rows, numbers = _records(lines, (3,), "an edge-probability file")
    i = np.array([_parse_int(r[0], ln) for r, ln in zip(rows, numbers)], dtype=np.int64)
    j = np.array([_parse_int(r[1], ln) for r, ln in zip(rows, numbers)], dtype=np.int64)
    q = np.array([_parse_float(r[2], ln) for r, ln in zip(rows, numbers)], dtype=np.float64)
    n = _int_header(headers, "nodes")
    if n is None:
        n = int(max(i.max(initial=-1), j.max(initial=-1))) + 1
    return validate((i, j, q), n, lines=numbers)


def format_edgeprob(net):
    out = [f"# nodes={net.n}\n"]
    out.extend(f"{a}\t{b}\t{_fmt(q)}\n" for a, b, q in zip(net.i.tolist(), net.j.tolist(),
                                                        net.q.tolist()))
    return "".join(out)


def write_edgeprob_file(path, net):
    _write(path, format_edgeprob(net))


def parse_label_file(path):
    """``id<TAB>name`` lines to a dict; names may contain spaces."""
    labels = {}
    for lineno, raw in enumerate(_read_lines(path), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        node, sep, name = line.partition("\t")
        if not sep:
            raise ParseError("label lines need a tab between id and name", line=lineno)
        node = _parse_int(node.strip(), lineno)
        if node in labels:
            raise ParseError(f"node {node} labelled twice", line=lineno)
        labels[node] = name.strip()
    return labels


def write_label_file(path, labels):
    _write(path, "".join(f"{node}\t{name}\n" for node, name in sorted(labels.items())))


def parse_partition_file(path, n=None):
    """``node<TAB>group`` lines plus an optional ``# k=`` header.

    Every node ``0..n-1`` must appear exactly once.
    """
    headers, rows, numbers = _records(_read_lines(path), (2,), "a partition file")
    nodes = np.array([_parse_int(r[0], ln) for r, ln in zip(rows, numbers)], dtype=np.int64)
    groups = np.array([_parse_int(r[1], ln, "group") for r, ln in zip(rows, numbers)],
                      dtype=np.int64)
    if n is None:
        n = nodes.size
    k = _int_header(headers, "k")
    g = np.full(n, -1, dtype=np.int64)
    for node, group, ln in zip(nodes.tolist(), groups.tolist(), numbers):
        if not 0 <= node < n:
            raise ParseError(f"node {node} outside [0, {n})", line=ln)
        if g[node] >= 0:
            raise ParseError(f"node {node} listed twice", line=ln)
        if group < 0 or (k is not None and group >= k):
            raise ParseError(f"group {group} outside the declared range", line=ln)
        g[node] = group
    missing = np.flatnonzero(g < 0)
    if missing.size:
        raise ValidationError(f"partition file is missing node {missing[0]}")
    if k is None:
        k = int(g.max(initial=-1)) + 1
    return Partition(g, k)


def format_partition(partition):
    lines = [f"# k={partition.k}\n"]
    lines.extend(f"{node}\t{group}\n" for node, group in enumerate(partition.g.tolist()))
    return "".join(lines)


def write_partition_file(path, partition):
    _write(path, format_partition(partition))


def parse_truth_file(path):
    """True-edge list ``i<TAB>j``; returns ``(edges (m, 2), n or None)``."""
    headers, rows, numbers = _records(_read_lines(path), (2,), "a truth-edge file")
    edges = np.array([[_parse_int(a, ln), _parse_int(b, ln)] for (a, b), ln in zip(rows, numbers)],
                     dtype=np.int64).reshape(-1, 2)
    bad = np.flatnonzero(edges[:, 0] == edges[:, 1])
    if bad.size:
        raise ParseError("self edge in truth file", line=numbers[bad[0]])
    return edges, _int_header(headers, "nodes")


def write_truth_file(path, edges, n):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    body = "".join(f"{a}\t{b}\n" for a, b in edges.tolist())
    _write(path, f"# nodes={n}\n" + body)


def parse_scores_file(path):
    headers, rows, numbers = _records(_read_lines(path), (3,), "a score file")
    i = np.array([_parse_int(r[0], ln) for r, ln in zip(rows, numbers)], dtype=np.int64)
    j = np.array([_parse_int(r[1], ln) for r, ln in zip(rows, numbers)], dtype=np.int64)
    s = np.array([_parse_float(r[2], ln) for r, ln in zip(rows, numbers)], dtype=np.float64)
    method = headers.get("method", ("posterior", None))[0]
    return EdgeScoreList(i, j, s, method), _int_header(headers, "nodes")


def write_scores_file(path, scores, n=None):
    head = f"# method={scores.method}\n"
    if n is not None:
        head = f"# nodes={n}\n" + head
    body = "".join(f"{a}\t{b}\t{_fmt(s)}\n" for a, b, s in zip(np.asarray(scores.i).tolist(),
                                                             np.asarray(scores.j).tolist(),
                                                             np.asarray(scores.score).tolist()))
    _write(path, head + body)


def write_roc_csv(path, curve):
    rows = "".join(f"{_fmt(f)},{_fmt(t)}\n" for f, t in zip(curve.fpr.tolist(), curve.tpr.tolist()))
    _write(path, "fpr,tpr\n" + rows)


def write_table_csv(path, header, rows):
    def cell(x):
        return _fmt(x) if isinstance(x, (float, np.floating)) else str(x)

    text = ",".join(header) + "\n" + "".join(",".join(cell(x) for x in row) + "\n" for row in rows)
    _write(path, text)


def _write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        # JSON has no inf/nan; keep them as strings so the document stays valid
        return x if np.isfinite(x) else repr(x)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def result_document(command, config, *, timestamp=True, **sections):
    """Assemble the structured record of one CLI run.

    Top-level keys: ``schema``, ``command``, ``config`` (everything needed to
    rerun), ``timestamp`` (omitted when disabled) and whatever result sections
    the command supplies, e.g. ``params``, ``marginals``, ``metrics``.
    """
    doc = {"schema": SCHEMA_VERSION, "command": command, "config": config}
    if timestamp:
        doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    doc.update(sections)
    return _jsonable(doc)


def fit_sections(fit):
    """Result-document sections describing a :class:`FitResult`."""
    return {
        "params": {"gamma": fit.params.gamma, "omega": fit.params.omega},
        "marginals": fit.marginals.node,
        "partition": fit.hard_partition.g,
        "bound_trace": fit.bound_trace,
        "fit": {
            "mode": fit.mode,
            "converged": fit.converged,
            "iterations": fit.iterations,
            "restarts_used": fit.restarts_used,
            "restart_bounds": fit.restart_bounds,
            "seed": fit.seed,
        },
        "warnings": list(fit.warnings),
    }


def dump_document(doc):
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_document(path, doc):
    _write(path, dump_document(doc))


def read_document(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
