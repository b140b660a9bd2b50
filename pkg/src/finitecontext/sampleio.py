"""Plain-text files of (projector, value) samples.

Layout::

    # finitecontext samples
    schema_version 1
    dim 3
    count 2
    <rank> <value> <re E00> <im E00> <re E01> <im E01> ...
    ...

Matrices are written row-major as interleaved real and imaginary parts,
every float with ``%.17g`` so a write/read cycle is exact.  Lines starting
with ``#`` are comments.
"""
import numpy as np

from .hilbert import Projector, as_rng, random_complete_tuple

SCHEMA_VERSION = 1


class SampleFileError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


def _fmt(x):
    return "%.17g" % x


def format_samples(samples, dim):
    lines = ["# finitecontext samples", f"schema_version {SCHEMA_VERSION}", f"dim {dim}",
             f"count {len(samples)}"]
    for e, v in samples:
        m = e.matrix
        if m.shape != (dim, dim):
            raise ValueError(f"projector shape {m.shape} does not match dim {dim}")
        flat = np.column_stack([m.real.ravel(), m.imag.ravel()]).ravel()
        lines.append(" ".join([str(e.rank), _fmt(v)] + [_fmt(x) for x in flat]))
    return "\n".join(lines) + "\n"


def write_samples(path, samples, dim):
    text = format_samples(samples, dim)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise SampleFileError(path, f"cannot write: {exc.strerror}") from exc


def parse_samples(text, path="<string>", tol=1e-9):
    """Returns ``(dim, samples)``; the projectors are validated."""
    header, rows = {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if len(header) < 3:
            key, _, val = line.partition(" ")
            if key not in ("schema_version", "dim", "count"):
                raise SampleFileError(path, f"line {lineno}: expected header field, got {key!r}")
            header[key] = int(val)
            continue
        rows.append((lineno, line.split()))
    missing = {"schema_version", "dim", "count"} - set(header)
    if missing:
        raise SampleFileError(path, f"missing header fields {sorted(missing)}")
    if header["schema_version"] != SCHEMA_VERSION:
        raise SampleFileError(path, f"unsupported schema_version {header['schema_version']}")
    d = header["dim"]
    if len(rows) != header["count"]:
        raise SampleFileError(path, f"header count {header['count']} but {len(rows)} rows")
    samples = []
    for lineno, tok in rows:
        if len(tok) != 2 + 2 * d * d:
            raise SampleFileError(path, f"line {lineno}: expected {2 + 2 * d * d} fields, got {len(tok)}")
        vals = np.array([float(t) for t in tok[2:]]).reshape(d * d, 2)
        m = (vals[:, 0] + 1j * vals[:, 1]).reshape(d, d)
        try:
            e = Projector(m, tol=tol)
        except ValueError as exc:
            raise SampleFileError(path, f"line {lineno}: {exc}") from exc
        if e.rank != int(tok[0]):
            raise SampleFileError(path, f"line {lineno}: declared rank {tok[0]} but trace gives {e.rank}")
        samples.append((e, float(tok[1])))
    return d, samples


def read_samples(path, tol=1e-9):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SampleFileError(path, f"cannot read: {exc.strerror}") from exc
    return parse_samples(text, path, tol)


def gen_data(measure, ranks, count, seed=None):
    """``count`` samples ``(E, mu(E))`` with ``E`` Haar-random of a rank drawn from ``ranks``."""
    rng = as_rng(seed)
    d = measure.dim
    ranks = [int(r) for r in ranks]
    if any(r < 1 or r >= d for r in ranks):
        raise ValueError(f"ranks must lie in 1..{d - 1}, got {ranks}")
    out = []
    for _ in range(count):
        r = ranks[rng.integers(len(ranks))]
        e = random_complete_tuple(d, [r, d - r], rng)[0]
        out.append((e, measure(e)))
    return out
