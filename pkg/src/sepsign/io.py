"""File formats: panels, node attributes, posterior chains, run configs.

Tabular files are comma- or tab-separated (sniffed from the header line)
with mandatory headers. A panel file lists one signed tie per row under
``time,node_a,node_b,sign``; absent dyads are simply not listed. A node
attribute file lists one value per row under ``node,attr,value`` and, when
supplied, defines the node universe. Chains are written as a draws table
next to a JSON metadata sidecar so a fit can be reloaded losslessly.

All writes go through a temp file in the target directory followed by an
atomic rename.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from .errors import ConfigError, DataError
from .infer import Chain, model_from_dict, model_to_dict
from .networks import NetworkPanel, NodeSet, SignedNetwork

PANEL_HEADER = ("time", "node_a", "node_b", "sign")
PANEL_HEADER_ORDERED = PANEL_HEADER + ("order",)
ATTR_HEADER = ("node", "attr", "value")
COV_HEADER = ("node_a", "node_b", "value")


def _atomic_write(path: Union[str, Path], text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."),
                               prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_rows(path: Union[str, Path], *expected_headers: tuple[str, ...]):
    """Parse a delimited file; returns (header, [(line_number, fields)])."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    lines = text.splitlines()
    if not lines:
        raise DataError(f"{path}: file is empty")
    delim = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(lines, delimiter=delim)
    header = tuple(f.strip() for f in next(reader))
    if header not in expected_headers:
        wanted = " or ".join(repr(",".join(h)) for h in expected_headers)
        raise DataError(
            f"{path}: header must be {wanted}, got {','.join(header)!r}"
        )
    rows = []
    for lineno, fields in enumerate(reader, start=2):
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != len(header):
            raise DataError(
                f"{path}:{lineno}: expected {len(header)} fields, "
                f"got {len(fields)}"
            )
        rows.append((lineno, tuple(f.strip() for f in fields)))
    return header, rows


def read_attributes(path: Union[str, Path]) -> NodeSet:
    """Load a node attribute table; defines the node universe and order."""
    _, rows = _read_rows(path, ATTR_HEADER)
    if not rows:
        raise DataError(f"{path}: no attribute rows")
    order: list[str] = []
    values: dict[str, dict[str, str]] = {}
    first_line: dict[tuple[str, str], int] = {}
    for lineno, (node, attr, value) in rows:
        if node not in values:
            order.append(node)
            values[node] = {}
        key = (node, attr)
        if key in first_line:
            raise DataError(
                f"{path}:{lineno}: duplicate value for node {node!r} "
                f"attribute {attr!r} (first given on line {first_line[key]})"
            )
        first_line[key] = lineno
        values[node][attr] = value
    attr_names = sorted({a for v in values.values() for a in v})
    attributes = {}
    for attr in attr_names:
        missing = [node for node in order if attr not in values[node]]
        if missing:
            raise DataError(
                f"{path}: attribute {attr!r} missing for node {missing[0]!r}"
            )
        attributes[attr] = tuple(values[node][attr] for node in order)
    return NodeSet(order, attributes)


def read_panel(path: Union[str, Path],
               attributes: Union[str, Path, NodeSet, None] = None,
               min_waves: int = 2) -> NetworkPanel:
    """Load a signed panel from an edge-list file.

    Waves are ordered lexicographically by time label unless the file
    carries the optional numeric ``order`` column, which then fixes the
    ordering. Without an attribute table the node universe is the sorted
    set of labels appearing in the file.
    """
    header, rows = _read_rows(path, PANEL_HEADER, PANEL_HEADER_ORDERED)
    if not rows:
        raise DataError(f"{path}: no tie rows")
    if isinstance(attributes, NodeSet):
        nodes: Optional[NodeSet] = attributes
    elif attributes is not None:
        nodes = read_attributes(attributes)
    else:
        nodes = None

    has_order = header == PANEL_HEADER_ORDERED
    per_time: dict[str, list] = {}
    order_of: dict[str, float] = {}
    seen: dict[tuple[str, str, str], int] = {}
    labels = set()
    for lineno, fields in rows:
        time, a, b, sign_text = fields[:4]
        if a == b:
            raise DataError(f"{path}:{lineno}: self-loop on node {a!r}")
        try:
            sign = int(sign_text)
        except ValueError:
            sign = 0
        if sign not in (-1, 1):
            raise DataError(
                f"{path}:{lineno}: sign must be +1 or -1, got {sign_text!r}"
            )
        if has_order:
            try:
                order = float(fields[4])
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: order must be numeric, got "
                    f"{fields[4]!r}"
                ) from None
            if order_of.setdefault(time, order) != order:
                raise DataError(
                    f"{path}:{lineno}: conflicting order values for time "
                    f"{time!r}"
                )
        key = (time,) + tuple(sorted((a, b)))
        if key in seen:
            raise DataError(
                f"{path}:{lineno}: duplicate dyad ({a!r}, {b!r}) at time "
                f"{time!r} (first given on line {seen[key]})"
            )
        seen[key] = lineno
        if nodes is not None:
            for lab in (a, b):
                if lab not in nodes.labels:
                    raise DataError(
                        f"{path}:{lineno}: node {lab!r} not in the "
                        f"attribute table"
                    )
        labels.update((a, b))
        per_time.setdefault(time, []).append((a, b, sign))

    if len(per_time) < min_waves:
        raise DataError(
            f"{path}: found {len(per_time)} time slice(s); at least "
            f"{min_waves} required"
        )
    if nodes is None:
        nodes = NodeSet(sorted(labels))
    if has_order:
        times = sorted(per_time, key=lambda t: (order_of[t], t))
    else:
        times = sorted(per_time)
    waves = [SignedNetwork.from_edges(nodes, per_time[t]) for t in times]
    return NetworkPanel(waves, times)


def write_panel(panel: NetworkPanel, path: Union[str, Path]) -> None:
    """Write a panel edge list; emits the ``order`` column only when the
    lexicographic order of the time labels disagrees with the wave order."""
    for time, wave in zip(panel.times, panel.waves):
        if wave.n_edges == 0:
            raise DataError(
                f"wave {time!r} has no ties; an edgeless wave cannot be "
                f"represented in the edge-list format"
            )
    need_order = list(panel.times) != sorted(panel.times)
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PANEL_HEADER_ORDERED if need_order else PANEL_HEADER)
    for pos, (time, wave) in enumerate(zip(panel.times, panel.waves)):
        for a, b, s in wave.edges():
            row = [time, a, b, f"{s:+d}"]
            if need_order:
                row.append(pos)
            writer.writerow(row)
    _atomic_write(path, buf.getvalue())


def panel_report(panel: NetworkPanel) -> list[dict]:
    """Per-wave density and sign fractions, for validation output."""
    from .networks import densities

    out = []
    for time, wave in zip(panel.times, panel.waves):
        dens, pos = densities(wave)
        out.append({
            "time": time,
            "nodes": wave.n,
            "edges": wave.n_edges,
            "density": round(dens, 6),
            "positive_fraction": round(pos, 6) if pos == pos else "",
        })
    return out


def read_dyad_covariate(path: Union[str, Path], nodes: NodeSet) -> np.ndarray:
    """Load a symmetric dyadic covariate; unlisted dyads are zero."""
    _, rows = _read_rows(path, COV_HEADER)
    n = nodes.n
    mat = np.zeros((n, n), dtype=np.float64)
    seen: dict[tuple[str, str], int] = {}
    for lineno, (a, b, value_text) in rows:
        if a == b:
            raise DataError(f"{path}:{lineno}: self-loop on node {a!r}")
        for lab in (a, b):
            if lab not in nodes.labels:
                raise DataError(f"{path}:{lineno}: unknown node {lab!r}")
        key = tuple(sorted((a, b)))
        if key in seen:
            raise DataError(
                f"{path}:{lineno}: duplicate dyad ({a!r}, {b!r}) "
                f"(first given on line {seen[key]})"
            )
        seen[key] = lineno
        try:
            value = float(value_text)
        except ValueError:
            raise DataError(
                f"{path}:{lineno}: value must be numeric, got {value_text!r}"
            ) from None
        i, j = nodes.index(a), nodes.index(b)
        mat[i, j] = mat[j, i] = value
    return mat


def write_attributes(nodes: NodeSet, path: Union[str, Path]) -> None:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ATTR_HEADER)
    for attr in sorted(nodes.attributes):
        for node, value in zip(nodes.labels, nodes.attributes[attr]):
            writer.writerow([node, attr, value])
    _atomic_write(path, buf.getvalue())


def _sidecar_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_chain(chain: Chain, path: Union[str, Path], wide: bool = False) -> None:
    """Write draws as CSV plus a ``<stem>.meta.json`` metadata sidecar.

    Long format has columns ``iteration,block,term,value``; wide format one
    column per parameter label.
    """
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if wide:
        writer.writerow(["iteration"] + list(chain.labels))
        for it in range(chain.n_draws):
            writer.writerow([it] + [repr(float(v)) for v in chain.draws[it]])
    else:
        writer.writerow(["iteration", "block", "term", "value"])
        for it in range(chain.n_draws):
            for idx, label in enumerate(chain.labels):
                block, term = label.split(":", 1)
                writer.writerow([it, block, term,
                                 repr(float(chain.draws[it, idx]))])
    _atomic_write(path, buf.getvalue())
    meta = chain.metadata()
    _atomic_write(_sidecar_path(path), json.dumps(meta, indent=2) + "\n")


def read_chain(path: Union[str, Path]) -> Chain:
    """Reload a chain written by :func:`write_chain` (either layout)."""
    path = Path(path)
    sidecar = _sidecar_path(path)
    try:
        meta = json.loads(sidecar.read_text())
    except OSError as exc:
        raise DataError(f"cannot read {sidecar}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{sidecar}: invalid JSON ({exc})") from None
    for key in ("kind", "labels", "n_draws", "acceptance_rate", "model"):
        if key not in meta:
            raise DataError(f"{sidecar}: missing metadata key {key!r}")
    labels = tuple(meta["labels"])
    n_draws = int(meta["n_draws"])
    draws = np.full((n_draws, len(labels)), np.nan)

    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    lines = text.splitlines()
    if not lines:
        raise DataError(f"{path}: file is empty")
    delim = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(lines, delimiter=delim)
    header = tuple(f.strip() for f in next(reader))
    col = {lab: i for i, lab in enumerate(labels)}
    if header == ("iteration", "block", "term", "value"):
        for lineno, fields in enumerate(reader, start=2):
            if not fields or all(not f.strip() for f in fields):
                continue
            it, block, term, value = fields
            label = f"{block}:{term}"
            if label not in col:
                raise DataError(f"{path}:{lineno}: unknown parameter {label!r}")
            draws[int(it), col[label]] = float(value)
    elif header == ("iteration",) + labels:
        for lineno, fields in enumerate(reader, start=2):
            if not fields or all(not f.strip() for f in fields):
                continue
            draws[int(fields[0])] = [float(v) for v in fields[1:]]
    else:
        raise DataError(f"{path}: unrecognized chain header {header!r}")
    if np.isnan(draws).any():
        raise DataError(f"{path}: draws table is incomplete")
    return Chain(
        kind=meta["kind"],
        labels=labels,
        draws=draws,
        acceptance_rate=float(meta["acceptance_rate"]),
        seed=meta.get("seed"),
        config=meta.get("config", {}),
        model=model_from_dict(meta["model"]),
    )


def write_table(rows: list[dict], header: list[str], path: Union[str, Path]) -> None:
    """Write dict rows under a fixed header (used for summaries and checks)."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([row[h] for h in header])
    _atomic_write(path, buf.getvalue())


def load_config(path: Union[str, Path]) -> dict:
    """Parse a YAML run config into a mapping (keys validated by the CLI)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data
