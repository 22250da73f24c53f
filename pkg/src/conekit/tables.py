"""Delimited text tables and the on-disk graph format.

One table = optional '#' comment lines, one '#' header line naming the
columns (with units in square brackets where they exist), then one
tab-separated row per record.  Floats are printed with %.17g so a
written value reparses to the identical double; identical inputs give
byte-identical files.

A graph file is such a table with one row per lattice node plus '#'
metadata lines (dimensions, grid shape, per-axis periods) sufficient to
rebuild the GraphManifold, including derivative and residual columns
when the graph carries them.
"""

import io

import numpy as np

from .errors import ConfigError
from .manifold import GraphManifold

__all__ = [
    "format_value",
    "format_table",
    "write_table",
    "read_table",
    "write_graph",
    "read_graph",
]


def format_value(v):
    """One table cell: %.17g for floats, str() for ints and text."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _header(columns, units):
    if units is None:
        units = (None,) * len(columns)
    if len(units) != len(columns):
        raise ConfigError("units must give one entry per column")
    names = [c if not u else f"{c}[{u}]" for c, u in zip(columns, units)]
    return "# " + "\t".join(names)


def format_table(columns, rows, units=None, comments=()):
    """Render a table to a string (header + tab-separated rows)."""
    out = io.StringIO()
    for c in comments:
        out.write(f"# {c}\n")
    out.write(_header(columns, units) + "\n")
    width = len(columns)
    for row in rows:
        row = tuple(row)
        if len(row) != width:
            raise ConfigError(
                f"row has {len(row)} cells, header names {width} columns")
        out.write("\t".join(format_value(v) for v in row) + "\n")
    return out.getvalue()


def format_records(columns, rows, comments=()):
    """Same data as key=value record lines, one line per row."""
    out = io.StringIO()
    for c in comments:
        out.write(f"# {c}\n")
    for row in rows:
        row = tuple(row)
        if len(row) != len(columns):
            raise ConfigError(
                f"row has {len(row)} cells, header names {len(columns)} "
                "columns")
        out.write(" ".join(f"{c}={format_value(v)}"
                           for c, v in zip(columns, row)) + "\n")
    return out.getvalue()


def write_table(path, columns, rows, units=None, comments=()):
    text = format_table(columns, rows, units=units, comments=comments)
    with open(path, "w") as fh:
        fh.write(text)


def _split_header(line):
    cols, units = [], []
    for name in line.split("\t"):
        name = name.strip()
        if name.endswith("]") and "[" in name:
            base, unit = name[:-1].rsplit("[", 1)
            cols.append(base)
            units.append(unit)
        else:
            cols.append(name)
            units.append(None)
    return cols, units


def read_table(path):
    """Parse a table file: (columns, units, rows, comments).

    The last '#' line before the data is the header; earlier '#' lines
    are returned as comments.  Cells come back as floats where they
    parse, otherwise as the raw strings.
    """
    comments, header, rows = [], None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                if header is not None:
                    raise ConfigError(
                        "comment lines after the data header are not "
                        "part of the format")
                comments.append(line[1:].strip())
                continue
            if header is None:
                if not comments:
                    raise ConfigError("table has no '#' header line")
                header = comments.pop()
            cells = []
            for cell in line.split("\t"):
                try:
                    cells.append(float(cell))
                except ValueError:
                    cells.append(cell)
            rows.append(tuple(cells))
    if header is None:
        if not comments:
            raise ConfigError("table has no '#' header line")
        header = comments.pop()
    columns, units = _split_header(header)
    for row in rows:
        if len(row) != len(columns):
            raise ConfigError("row width does not match the header")
    return columns, units, rows, tuple(comments)


# -- graph files ---------------------------------------------------------------

def _meta_line(key, value):
    return f"{key}={format_value(value)}"


def write_graph(path, graph, comments=()):
    """One row per lattice node: base point, heights, slopes, residual.

    Metadata comments carry the grid shape and per-axis periods; the
    axis sample values are recovered from the base-point columns (the
    rows enumerate the lattice in C order, first axis slowest).
    """
    m, n = graph.m, graph.n
    grid = graph.grid_shape
    meta = [
        "conekit-graph " + " ".join((
            _meta_line("n", n), _meta_line("m", m),
            "grid=" + ",".join(str(g) for g in grid))),
    ]
    for j, p in enumerate(graph.periods):
        meta.append(f"axis{j} " + (_meta_line("period", p) if p is not None
                                   else "kind=interval"))
    if graph.name:
        meta.append("name " + graph.name)
    for key in sorted(graph.meta):
        meta.append("meta " + _meta_line(key, graph.meta[key]))

    columns = [f"z{j}" for j in range(m)] + [f"h{i}" for i in range(n)]
    if graph.dh_values is not None:
        columns += [f"dh{i}{j}" for i in range(n) for j in range(m)]
    if graph.residuals is not None:
        columns.append("residual")

    Z = graph.nodes_z()
    blocks = [Z, graph.nodes_h()]
    if graph.dh_values is not None:
        blocks.append(graph.nodes_dh().reshape(len(Z), n * m))
    if graph.residuals is not None:
        blocks.append(graph.residuals.reshape(len(Z), 1))
    data = np.concatenate(blocks, axis=1)
    write_table(path, columns, data, comments=tuple(comments) + tuple(meta))


def _parse_meta(comments):
    info = {"name": "", "meta": {}, "axes": {}}
    for line in comments:
        head, _, rest = line.partition(" ")
        if head == "conekit-graph":
            for item in rest.split():
                key, _, val = item.partition("=")
                if key == "grid":
                    info["grid"] = tuple(int(v) for v in val.split(","))
                else:
                    info[key] = int(val)
        elif head.startswith("axis") and head[4:].isdigit():
            j = int(head[4:])
            if rest.startswith("period="):
                info["axes"][j] = float(rest.split("=", 1)[1])
            else:
                info["axes"][j] = None
        elif head == "name":
            info["name"] = rest
        elif head == "meta":
            key, _, val = rest.partition("=")
            try:
                info["meta"][key] = float(val)
            except ValueError:
                info["meta"][key] = val
    return info


def read_graph(path):
    """Rebuild a GraphManifold written by write_graph."""
    columns, _, rows, comments = read_table(path)
    info = _parse_meta(comments)
    if "grid" not in info or "n" not in info or "m" not in info:
        raise ConfigError(f"{path} is not a graph file (missing metadata)")
    n, m, grid = info["n"], info["m"], info["grid"]
    data = np.asarray(rows, dtype=float)
    if data.shape[0] != int(np.prod(grid)):
        raise ConfigError("node count does not match the declared grid")
    col = {name: i for i, name in enumerate(columns)}
    for name in [f"z{j}" for j in range(m)] + [f"h{i}" for i in range(n)]:
        if name not in col:
            raise ConfigError(f"graph file lacks required column {name}")

    Z = data[:, [col[f"z{j}"] for j in range(m)]].reshape(grid + (m,))
    axes = []
    for j in range(m):
        # axis j varies along lattice dimension j; read one fiber
        index = [0] * m
        index[j] = slice(None)
        axes.append(Z[tuple(index) + (j,)])
    periods = tuple(info["axes"].get(j) for j in range(m))

    h = data[:, [col[f"h{i}"] for i in range(n)]].reshape(grid + (n,))
    dh = None
    if all(f"dh{i}{j}" in col for i in range(n) for j in range(m)):
        idx = [col[f"dh{i}{j}"] for i in range(n) for j in range(m)]
        dh = data[:, idx].reshape(grid + (n, m))
    res = None
    if "residual" in col:
        res = data[:, col["residual"]].reshape(grid)
    return GraphManifold(axes, h, periods, dh_values=dh, residuals=res,
                         meta=info["meta"], name=info["name"])
