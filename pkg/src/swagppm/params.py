"""Flat parameter vectors with a named-tensor layout and checkpoint I/O."""

import json
import struct

import numpy as np


class LayoutError(ValueError):
    pass


class Layout:
    """Ordered list of (name, shape) slots packed into one flat float64 vector."""

    def __init__(self, slots):
        self.slots = []
        offset = 0
        for name, shape in slots:
            shape = tuple(int(s) for s in shape)
            self.slots.append((name, shape, offset))
            offset += int(np.prod(shape)) if shape else 1
        self.size = offset

    def __eq__(self, other):
        return isinstance(other, Layout) and self.slots == other.slots

    def __repr__(self):
        return "Layout(%s)" % ", ".join("%s%s@%d" % s for s in self.slots)

    def names(self):
        return [name for name, _, _ in self.slots]

    def slot(self, name):
        for entry in self.slots:
            if entry[0] == name:
                return entry
        raise LayoutError("no tensor named %r in layout" % name)

    def view(self, values, name):
        name, shape, offset = self.slot(name)
        size = int(np.prod(shape)) if shape else 1
        return values[offset:offset + size].reshape(shape)

    def to_json(self):
        return [[name, list(shape)] for name, shape, _ in self.slots]

    @classmethod
    def from_json(cls, obj):
        return cls([(name, tuple(shape)) for name, shape in obj])


class ParameterVector:
    """Immutable flat float64 vector; arithmetic requires matching layouts."""

    def __init__(self, values, layout):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] != layout.size:
            raise LayoutError(
                "values length %d does not match layout size %d"
                % (values.size, layout.size))
        if not np.all(np.isfinite(values)):
            raise LayoutError("parameter vector contains non-finite entries")
        values = values.copy()
        values.flags.writeable = False
        self.values = values
        self.layout = layout

    def tensor(self, name):
        return self.layout.view(self.values, name)

    def replace(self, values):
        return ParameterVector(values, self.layout)

    def _check(self, other):
        if self.layout != other.layout:
            raise LayoutError("layout mismatch between parameter vectors")

    def __add__(self, other):
        self._check(other)
        return self.replace(self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return self.replace(self.values - other.values)

    def scale(self, c):
        return self.replace(self.values * c)

    def __len__(self):
        return self.values.shape[0]


_MAGIC = b"SWPPMCK1"


def save_checkpoint(path, theta, header=None):
    """Write a checkpoint: magic, JSON header, little-endian float64 payload."""
    head = dict(header or {})
    head["layout"] = theta.layout.to_json()
    blob = json.dumps(head, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        f.write(theta.values.astype("<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != _MAGIC:
            raise LayoutError("bad checkpoint magic in %s" % path)
        (hlen,) = struct.unpack("<Q", f.read(8))
        head = json.loads(f.read(hlen).decode("utf-8"))
        layout = Layout.from_json(head["layout"])
        payload = f.read(layout.size * 8)
    values = np.frombuffer(payload, dtype="<f8")
    return ParameterVector(values, layout), head
