"""Stochastic weight averaging with a Gaussian covariance built from
a diagonal second-moment term and a low-rank deviation term."""

import json
import struct

import numpy as np

from .params import Layout, LayoutError, ParameterVector


class SwagError(RuntimeError):
    pass


class SwagMoments:
    """Running moment accumulator over epoch snapshots.

    Tracks the running mean, the running mean of element-wise squares, and
    up to k_max deviation columns theta_t - mean_t, where mean_t is the
    running mean right after absorbing snapshot t (oldest columns evicted).
    """

    def __init__(self, layout, k_max=20):
        if k_max < 1:
            raise SwagError("k_max must be >= 1")
        self.layout = layout
        self.k_max = int(k_max)
        self.count = 0
        self.mean = np.zeros(layout.size)
        self.sq_mean = np.zeros(layout.size)
        self.dev_columns = []
        self.clamped_entries = 0  # diagnostic: negative-variance clamps seen

    def absorb(self, theta):
        if theta.layout != self.layout:
            raise LayoutError("snapshot layout does not match accumulator")
        t = self.count + 1
        self.mean += (theta.values - self.mean) / t
        self.sq_mean += (theta.values ** 2 - self.sq_mean) / t
        self.dev_columns.append(theta.values - self.mean)
        if len(self.dev_columns) > self.k_max:
            self.dev_columns.pop(0)
        self.count = t
        return self

    @property
    def k(self):
        return len(self.dev_columns)

    def mean_vector(self):
        if self.count < 1:
            raise SwagError("no snapshots absorbed")
        return ParameterVector(self.mean, self.layout)

    def sigma_diag(self):
        """Element-wise variance estimate, clamped at zero."""
        raw = self.sq_mean - self.mean ** 2
        self.clamped_entries += int(np.count_nonzero(raw < 0))
        return np.maximum(raw, 0.0)

    def covariance_apply(self, z1, z2):
        """mean + sqrt(sigma_diag/2) * z1 + D z2 / sqrt(2 (k-1)).

        z1 has length p, z2 length k. With both zero this returns the mean.
        """
        if self.count < 1:
            raise SwagError("no snapshots absorbed")
        z1 = np.asarray(z1, dtype=np.float64)
        z2 = np.asarray(z2, dtype=np.float64)
        out = self.mean + np.sqrt(self.sigma_diag() / 2.0) * z1
        if np.any(z2 != 0):
            if self.k < 2:
                raise SwagError(
                    "low-rank term needs at least 2 deviation columns")
            if z2.shape[0] != self.k:
                raise SwagError("z2 length %d != column count %d"
                                % (z2.shape[0], self.k))
            D = np.stack(self.dev_columns, axis=1)
            out = out + (D @ z2) / np.sqrt(2.0 * (self.k - 1))
        return ParameterVector(out, self.layout)

    def sample(self, count, seed):
        """count posterior draws; deterministic per (seed, count)."""
        if count < 1:
            raise SwagError("need at least one draw")
        rng = np.random.default_rng(seed)
        draws = []
        for _ in range(count):
            z1 = rng.standard_normal(self.layout.size)
            z2 = rng.standard_normal(self.k) if self.k >= 2 else np.zeros(self.k)
            draws.append(self.covariance_apply(z1, z2))
        return draws


_MAGIC = b"SWPPMSW1"


def save_moments(path, moments):
    head = {
        "layout": moments.layout.to_json(),
        "count": moments.count,
        "k_max": moments.k_max,
        "k": moments.k,
    }
    blob = json.dumps(head, sort_keys=True).encode("utf-8")
    D = (np.stack(moments.dev_columns, axis=1) if moments.dev_columns
         else np.zeros((moments.layout.size, 0)))
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        f.write(moments.mean.astype("<f8").tobytes())
        f.write(moments.sq_mean.astype("<f8").tobytes())
        f.write(np.asfortranarray(D, dtype="<f8").tobytes(order="F"))


def load_moments(path):
    with open(path, "rb") as f:
        if f.read(8) != _MAGIC:
            raise SwagError("bad moments magic in %s" % path)
        (hlen,) = struct.unpack("<Q", f.read(8))
        head = json.loads(f.read(hlen).decode("utf-8"))
        layout = Layout.from_json(head["layout"])
        p, k = layout.size, head["k"]
        mean = np.frombuffer(f.read(p * 8), dtype="<f8")
        sq_mean = np.frombuffer(f.read(p * 8), dtype="<f8")
        D = np.frombuffer(f.read(p * k * 8), dtype="<f8").reshape(
            (p, k), order="F")
    moments = SwagMoments(layout, k_max=head["k_max"])
    moments.count = head["count"]
    moments.mean = mean.copy()
    moments.sq_mean = sq_mean.copy()
    moments.dev_columns = [D[:, j].copy() for j in range(k)]
    return moments
