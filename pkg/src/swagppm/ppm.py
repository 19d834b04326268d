"""Pseudo-posterior mechanism core: per-record risks from posterior draws,
risk-to-weight mapping, weighted sensitivity, the 2*Delta privacy bound,
and the Lipschitz-preserving reweighting step."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import models

STAGE_INITIAL = "initial"


class PpmError(ValueError):
    pass


@dataclass
class RiskWeights:
    record_ids: np.ndarray
    risks: np.ndarray
    normalized: np.ndarray
    alpha: np.ndarray
    c: float
    g: float
    stage: str = STAGE_INITIAL

    def alpha_for(self, ids):
        """Alpha vector aligned with an arbitrary record-id sequence."""
        lookup = {int(r): a for r, a in zip(self.record_ids, self.alpha)}
        try:
            return np.array([lookup[int(i)] for i in ids])
        except KeyError as e:
            raise PpmError("no weight for record id %s" % e) from None


@dataclass
class SensitivityReport:
    delta: float
    per_record: np.ndarray
    record_ids: np.ndarray
    argmax_draw: int
    argmax_record_id: int
    num_draws: int
    epsilon: float = field(init=False)

    def __post_init__(self):
        self.epsilon = 2.0 * self.delta


def abs_loglik_matrix(spec, draws, X, y):
    """|log-likelihood| of every record under every draw, shape (S, n)."""
    if X.shape[0] == 0:
        raise PpmError("empty dataset")
    rows = [np.abs(models.log_likelihood_batch(spec, theta, X, y))
            for theta in draws]
    if not rows:
        raise PpmError("need at least one posterior draw")
    return np.stack(rows, axis=0)


def compute_risks(abs_ll):
    """Per-record risk: max |log-likelihood| over the realized draws."""
    abs_ll = np.asarray(abs_ll)
    if abs_ll.ndim != 2 or abs_ll.shape[0] < 1 or abs_ll.shape[1] < 1:
        raise PpmError("risk matrix must be (draws, records) and nonempty")
    return abs_ll.max(axis=0)


def map_weights(record_ids, risks, c, g):
    """Linear map from min-max normalized risks to weights in [0, 1]."""
    risks = np.asarray(risks, dtype=np.float64)
    record_ids = np.asarray(record_ids)
    if risks.shape[0] < 2:
        raise PpmError("need at least 2 records to normalize risks")
    if c < 0:
        raise PpmError("scale c must be nonnegative")
    spread = risks.max() - risks.min()
    if spread > 0:
        normalized = (risks - risks.min()) / spread
    else:
        normalized = np.zeros_like(risks)
    alpha = np.clip(c * (1.0 - normalized) + g, 0.0, 1.0)
    return RiskWeights(record_ids, risks, normalized, alpha, c, g)


def sensitivity(abs_ll, alpha, record_ids=None):
    """Weighted local sensitivity over the draw grid and its 2*Delta bound."""
    abs_ll = np.asarray(abs_ll)
    alpha = np.asarray(alpha, dtype=np.float64)
    if abs_ll.shape[1] != alpha.shape[0]:
        raise PpmError("alpha length does not match the record axis")
    if record_ids is None:
        record_ids = np.arange(abs_ll.shape[1])
    weighted = abs_ll * alpha[None, :]
    per_record = weighted.max(axis=0)
    i = int(per_record.argmax())
    s = int(weighted[:, i].argmax())
    return SensitivityReport(
        delta=float(per_record[i]),
        per_record=per_record,
        record_ids=np.asarray(record_ids),
        argmax_draw=s,
        argmax_record_id=int(np.asarray(record_ids)[i]),
        num_draws=abs_ll.shape[0],
    )


def reweight(weights, report, k):
    """Rescale weights so unclipped records share the risk bound k*Delta.

    Records with zero measured risk get weight 1: nothing they contribute
    was observed to move the bound.
    """
    if not (0 < k < 1):
        raise PpmError("k must lie in (0, 1)")
    if report.delta <= 0:
        raise PpmError("reweighting undefined when Delta is zero")
    per = report.per_record
    alpha_w = np.where(
        per > 0,
        np.clip(k * weights.alpha * report.delta / np.where(per > 0, per, 1.0),
                0.0, 1.0),
        1.0)
    return RiskWeights(weights.record_ids, weights.risks, weights.normalized,
                       alpha_w, weights.c, weights.g,
                       stage="reweighted(k=%g)" % k)


def save_weights_csv(path, weights):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["record_id", "risk", "normalized_risk", "alpha", "stage"])
        for i in range(weights.record_ids.shape[0]):
            w.writerow([int(weights.record_ids[i]),
                        repr(float(weights.risks[i])),
                        repr(float(weights.normalized[i])),
                        repr(float(weights.alpha[i])),
                        weights.stage])


def load_weights_csv(path):
    ids, risks, normalized, alpha, stage = [], [], [], [], STAGE_INITIAL
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            ids.append(int(row["record_id"]))
            risks.append(float(row["risk"]))
            normalized.append(float(row["normalized_risk"]))
            alpha.append(float(row["alpha"]))
            stage = row["stage"]
    return RiskWeights(np.array(ids), np.array(risks), np.array(normalized),
                       np.array(alpha), c=float("nan"), g=float("nan"),
                       stage=stage)


def save_report_json(path, report):
    with open(path, "w") as f:
        json.dump({
            "delta": report.delta,
            "epsilon": report.epsilon,
            "per_record": report.per_record.tolist(),
            "record_ids": [int(i) for i in report.record_ids],
            "argmax_draw": report.argmax_draw,
            "argmax_record_id": report.argmax_record_id,
            "num_draws": report.num_draws,
        }, f, indent=1)
