"""Writing run artifacts: CSV tables, key-value reports and SVG plots.

Every file is written to a temporary sibling and renamed into place, so an
interrupted run never leaves a truncated artifact behind. SVG plots are drawn
from the CSV text itself, never from in-memory arrays.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path


def fmt(x):
    """Shortest round-trip text for numbers; ``inf``/``nan`` spelled as such."""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return repr(x)
    if hasattr(x, "item"):
        return fmt(x.item())
    return "" if x is None else str(x)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def kv_text(pairs):
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` via a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    return path


class ArtifactSet:
    """Artifacts of one run, staged in memory and committed in one pass.

    Nothing touches the output directory until :meth:`commit`, so a run that
    fails part-way writes no files at all.
    """

    def __init__(self, directory, formats):
        self.directory = Path(directory)
        self.formats = set(formats)
        self._files = {}

    def wants(self, fmt_):
        return fmt_ in self.formats

    def add(self, name, data):
        self._files[name] = data

    def csv(self, name, header, rows):
        """Stage a CSV table and return its text (for plots built from it)."""
        text = csv_text(header, rows)
        if self.wants("csv"):
            self.add(name, text)
        return text

    def report(self, pairs, name="report.txt"):
        if self.wants("report"):
            self.add(name, kv_text(pairs))

    def svg(self, name, render):
        if self.wants("svg"):
            self.add(name, render())

    @property
    def names(self):
        return sorted(self._files)

    def commit(self):
        return [atomic_write(self.directory / n, self._files[n]) for n in self.names]


# ---------------------------------------------------------------------------
# SVG plots (matplotlib, imported on demand)
# ---------------------------------------------------------------------------


def _figure():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the install
        raise RuntimeError("SVG output needs matplotlib (pip install 'artifact[plots]')") from exc
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    # fixed ids and no timestamp keep the SVG bytes reproducible
    matplotlib.rcParams["svg.hashsalt"] = "horizon"
    matplotlib.rcParams["svg.fonttype"] = "none"
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    return plt, fig, ax


def _svg_bytes(plt, fig):
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def line_plot(text, x, y, group, title="", xlabel=None, ylabel=None, max_groups=60):
    """One polyline per distinct ``group`` value of a long-format CSV table."""
    rows = read_csv(text)
    plt, fig, ax = _figure()
    series = {}
    for r in rows:
        series.setdefault(r[group], ([], []))
        series[r[group]][0].append(float(r[x]))
        series[r[group]][1].append(float(r[y]))
    for k, (xs, ys) in list(series.items())[:max_groups]:
        ax.plot(xs, ys, lw=0.8, label=k if len(series) <= 12 else None)
    if 0 < len(series) <= 12:
        ax.legend(fontsize=6)
    ax.set_xlabel(xlabel or x)
    ax.set_ylabel(ylabel or y)
    ax.set_title(title)
    return _svg_bytes(plt, fig)


def scatter_plot(text, x, y, title=""):
    rows = read_csv(text)
    plt, fig, ax = _figure()
    ax.plot([float(r[x]) for r in rows], [float(r[y]) for r in rows], ".", ms=2)
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.set_title(title)
    return _svg_bytes(plt, fig)
