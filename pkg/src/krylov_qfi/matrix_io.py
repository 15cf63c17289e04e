"""Matrix file formats for states and observables.

Text form (any extension other than ``.json``/``.npy``)::

    dim 2 dtype complex128
    0.75 0 0 0
    0 0 0.25 0

i.e. a header line followed by ``dim`` rows of ``2*dim`` numbers, the real
and imaginary part of each entry in row-major order. Lines starting with
``#`` are ignored.

JSON form: ``{"dim": 2, "real": [[...]], "imag": [[...]]}`` (``imag`` may be
omitted). ``.npy`` files are read with :func:`numpy.load`.
"""

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError


def matrix_to_text(a):
    a = np.asarray(a, dtype=complex)
    d = a.shape[0]
    lines = [f"dim {d} dtype complex128"]
    for row in a:
        parts = []
        for z in row:
            parts.append(repr(float(z.real)))
            parts.append(repr(float(z.imag)))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def matrix_from_text(text):
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ConfigError("empty matrix file")
    head = rows[0].split()
    if len(head) < 2 or head[0] != "dim":
        raise ConfigError("matrix file must start with 'dim <d> [dtype <t>]'")
    d = int(head[1])
    values = np.array([float(x) for ln in rows[1:] for x in ln.split()])
    if values.size != 2 * d * d:
        raise ConfigError(f"expected {2 * d * d} numbers, found {values.size}")
    pairs = values.reshape(d, d, 2)
    return pairs[..., 0] + 1j * pairs[..., 1]


def matrix_to_json(a):
    a = np.asarray(a, dtype=complex)
    return {"dim": int(a.shape[0]), "real": a.real.tolist(), "imag": a.imag.tolist()}


def matrix_from_json(obj):
    real = np.asarray(obj["real"], dtype=float)
    imag = np.asarray(obj.get("imag", np.zeros_like(real)), dtype=float)
    a = real + 1j * imag
    if "dim" in obj and a.shape != (obj["dim"], obj["dim"]):
        raise ConfigError(f"matrix shape {a.shape} does not match dim {obj['dim']}")
    return a


def load_matrix(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such file: {path}")
    if path.suffix == ".npy":
        return np.asarray(np.load(path), dtype=complex)
    if path.suffix == ".json":
        return matrix_from_json(json.loads(path.read_text()))
    return matrix_from_text(path.read_text())


def save_matrix(path, a):
    path = Path(path)
    if path.suffix == ".npy":
        np.save(path, np.asarray(a, dtype=complex))
    elif path.suffix == ".json":
        path.write_text(json.dumps(matrix_to_json(a)))
    else:
        path.write_text(matrix_to_text(a))
