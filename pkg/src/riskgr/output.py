"""CSV / JSON-lines emission of result rows (and parsing them back)."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import fields
from pathlib import Path

from .experiment import COLUMNS, ResultRow

FORMATS = ("csv", "jsonl")


def header_cell(name: str, unit) -> str:
    return f"{name}[{unit}]" if unit else name


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _round(value):
    return float(format(value, ".12g")) if isinstance(value, float) else value


def render(rows, fmt: str = "csv") -> str:
    """Serialize rows; floats carry 12 significant digits, ``None`` is empty/null."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([header_cell(n, u) for n, u in COLUMNS])
        for row in rows:
            writer.writerow([_fmt(getattr(row, n)) for n, _ in COLUMNS])
        return buf.getvalue()
    if fmt == "jsonl":
        head = {"columns": [n for n, _ in COLUMNS], "units": {n: u for n, u in COLUMNS if u}}
        lines = [json.dumps({"header": head}, separators=(",", ":"))]
        for row in rows:
            rec = {n: _round(getattr(row, n)) for n, _ in COLUMNS}
            lines.append(json.dumps(rec, separators=(",", ":")))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}; choose one of {FORMATS}")


def emit(rows, path, fmt: str = "csv") -> Path:
    """Write rows atomically: a temporary file in the target directory is renamed into place."""
    path = Path(path)
    text = render(rows, fmt)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror or exc}") from exc
    return path


_TYPES = {f.name: f.type for f in fields(ResultRow)}


def _convert(name: str, text: str):
    kind = str(_TYPES[name])
    if text == "":
        return None
    if "float" in kind:
        return float(text)
    if "int" in kind:
        return int(text)
    return text


def parse(text: str, fmt: str = "csv") -> list:
    """Inverse of :func:`render`."""
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        expected = [header_cell(n, u) for n, u in COLUMNS]
        if header != expected:
            raise ValueError("CSV header does not match the result-row columns")
        names = [n for n, _ in COLUMNS]
        return [ResultRow(**{n: _convert(n, v) for n, v in zip(names, rec)}) for rec in reader if rec]
    if fmt == "jsonl":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or "header" not in json.loads(lines[0]):
            raise ValueError("JSON-lines file lacks its header record")
        return [ResultRow(**json.loads(ln)) for ln in lines[1:]]
    raise ValueError(f"unknown format {fmt!r}; choose one of {FORMATS}")


def gnuplot_script(data_file: str, rows) -> str:
    """Plot KGR against the swept variable, one line per scheme (CSV input)."""
    if not rows:
        return ""
    names = [n for n, _ in COLUMNS]
    col = {n: i + 1 for i, n in enumerate(names)}
    powers = {r.power for r in rows}
    xcol, xlabel = ("power", "P [dBm]") if len(powers) > 1 else (
        ("N", "RIS elements N") if len({r.N for r in rows}) > 1 else ("M", "BS antennas M"))
    groups = []
    for r in rows:
        key = (r.scheme, r.spacing if xcol == "N" else None, r.rho if xcol == "M" else None)
        if key not in groups:
            groups.append(key)
    plots = []
    for scheme, spacing, rho in groups:
        cond = [f'strcol({col["scheme"]}) eq "{scheme}"']
        title = scheme
        if spacing is not None:
            cond.append(f'abs(${col["spacing"]}-{spacing!r})<1e-9')
            title += f" d={spacing:g}lambda"
        if rho is not None:
            cond.append(f'abs(${col["rho"]}-{rho!r})<1e-9')
            title += f" rho={rho:g}"
        plots.append(f'"{data_file}" skip 1 using {col[xcol]}:(({" && ".join(cond)}) ? ${col["kgr"]} : 1/0) '
                     f'with linespoints title "{title}"')
    return "\n".join([
        "set datafile separator ','",
        "set key left top",
        f"set xlabel '{xlabel}'",
        "set ylabel 'KGR [bits]'",
        "set grid",
        "plot " + ", \\\n     ".join(plots),
        "",
    ])
