"""End-to-end orchestration: data prep, the three-round weighted training
flow, the DP-SGD and non-private baselines, and benchmark report emission."""

import copy
import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import accountant, data, metrics, models, ppm, swag, trainer
from .params import save_checkpoint


class ConfigError(ValueError):
    pass


class PhaseError(RuntimeError):
    def __init__(self, phase, cause):
        super().__init__("phase %r failed: %s" % (phase, cause))
        self.phase = phase
        self.cause = cause


SCHEMA_VERSION = 1

DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "seed": 20250824,
    "data": {
        "synthetic": {
            "num_classes": 20,
            "zipf_exponent": 1.2,
            "total_records": 4000,
            "vocab_size": 2000,
            "tokens_per_record": [6, 16],
            "class_signal_strength": 0.6,
            "feature_dim": 2048,
        },
        "csv_path": None,
        "cap": 200,
        "sampling_fraction": 1.0,
        "train_fraction": 0.5,
    },
    "model": {
        "family": models.SOFTMAX_LINEAR,
        "hidden_dim": 0,
        "weight_decay": 1e-4,
    },
    "phases": {
        "finetune_epochs": 10,
        "finetune_lr": 0.01,
        "batch_size": 64,
        "swag_epochs": 20,
        "swag_lr": 0.03,
        "swag_rank": 20,
        "draws": 500,
        "c": 1.0,
        "g": 0.0,
        "k": 0.95,
    },
    "dp_sgd": {
        "target_epsilon": 4.0,
        "delta": 1e-4,
        "clip_norm": 1.0,
        "batch_size": 512,
        "learning_rate": 0.001,
        "epochs": 30,
    },
    "nonprivate": {
        "epochs": 30,
        "learning_rate": 0.01,
        "batch_size": 64,
    },
    "delta_sweep": [1e-3, 1e-2, 0.1, 0.99],
}


def _check_keys(section, allowed, path):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError("unknown config keys at %s: %s"
                          % (path, sorted(unknown)))


def load_config(obj=None, overrides=None):
    """Merge a (partial) config dict over the defaults, rejecting unknown
    keys, and apply dotted key=value overrides."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    obj = obj or {}
    _check_keys(obj, cfg, "<root>")
    if obj.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError("unsupported schema_version %r"
                          % obj["schema_version"])
    for key, value in obj.items():
        if isinstance(value, dict):
            _check_keys(value, cfg[key], key)
            if key == "data" and "synthetic" in value and value["synthetic"]:
                _check_keys(value["synthetic"], cfg["data"]["synthetic"],
                            "data.synthetic")
                cfg["data"]["synthetic"].update(value["synthetic"])
                value = {k: v for k, v in value.items() if k != "synthetic"}
            cfg[key].update(value)
        else:
            cfg[key] = value
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError("override %r is not key=value" % item)
        dotted, raw = item.split("=", 1)
        node = cfg
        parts = dotted.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError("unknown override path %r" % dotted)
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError("unknown override key %r" % dotted)
        node[parts[-1]] = json.loads(raw)
    return cfg


def derive_seed(master, tag):
    """Stable per-phase seed from the master seed and a phase tag."""
    digest = hashlib.sha256(("%d/%s" % (master, tag)).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def prepare_data(cfg):
    """Generate or ingest, cap-sample, and split. Returns (train, test)."""
    master = cfg["seed"]
    dc = cfg["data"]
    if dc.get("csv_path"):
        dataset = data.load_csv(dc["csv_path"],
                                dc["synthetic"]["feature_dim"])
    else:
        sc = dc["synthetic"]
        dataset = data.generate(data.SyntheticSpec(
            num_classes=sc["num_classes"],
            zipf_exponent=sc["zipf_exponent"],
            total_records=sc["total_records"],
            vocab_size=sc["vocab_size"],
            tokens_per_record=tuple(sc["tokens_per_record"]),
            class_signal_strength=sc["class_signal_strength"],
            seed=derive_seed(master, "data"),
            feature_dim=sc["feature_dim"],
        ))
    dataset = data.stratified_cap_sample(
        dataset, cap=dc["cap"], fraction=dc["sampling_fraction"],
        seed=derive_seed(master, "cap"))
    return data.stratified_split(dataset, dc["train_fraction"],
                                 seed=derive_seed(master, "split"))


def model_spec(cfg, num_classes, feature_dim):
    mc = cfg["model"]
    return models.ModelSpec(mc["family"], feature_dim, num_classes,
                            mc["hidden_dim"], mc["weight_decay"])


def _train_round(spec, theta0, X, y, weights, cfg, seed_tag):
    """One fine-tune + constant-lr SWAG round; returns the moment accumulator."""
    ph = cfg["phases"]
    master = cfg["seed"]
    ft_cfg = trainer.TrainConfig(
        trainer.ADAPTIVE, ph["finetune_lr"], ph["batch_size"],
        ph["finetune_epochs"], seed=derive_seed(master, seed_tag + "/ft"),
        weight_decay=spec.weight_decay)
    theta, _ = trainer.train(spec, theta0, X, y, ft_cfg, weights)
    swag_cfg = trainer.TrainConfig(
        trainer.SGD_CONSTANT, ph["swag_lr"], ph["batch_size"],
        ph["swag_epochs"], seed=derive_seed(master, seed_tag + "/swag"),
        weight_decay=spec.weight_decay)
    moments = swag.SwagMoments(theta0.layout, k_max=ph["swag_rank"])
    _, snapshots = trainer.train(spec, theta, X, y, swag_cfg, weights)
    for snap in snapshots:
        moments.absorb(snap.theta)
    return moments


@dataclass
class SwagPpmResult:
    released_theta: object
    report: ppm.SensitivityReport
    weights: ppm.RiskWeights
    moments: swag.SwagMoments
    epsilon: float = field(init=False)

    def __post_init__(self):
        self.epsilon = self.report.epsilon


def run_swag_ppm(cfg, train_view, out_dir=None, reweighted=False):
    """Figure-of-merit pipeline: two (or three, reweighted) fine-tune + SWAG
    rounds, risk-based weights in between, epsilon from the final draws,
    and a single released draw kept apart from the internal draws."""
    ph = cfg["phases"]
    master = cfg["seed"]
    X = train_view.feature_matrix()
    y = train_view.labels
    ids = train_view.ids
    spec = model_spec(cfg, train_view.num_classes, train_view.feature_dim)
    theta0 = models.init_params(spec, derive_seed(master, "init"))
    internal = None
    if out_dir:
        internal = os.path.join(out_dir, "internal")
        os.makedirs(internal, exist_ok=True)
        os.makedirs(os.path.join(out_dir, "release"), exist_ok=True)

    def phase(name, fn):
        try:
            return fn()
        except Exception as e:  # noqa: BLE001 - annotate phase and re-raise
            raise PhaseError(name, e) from e

    moments1 = phase("swag-round-1",
                     lambda: _train_round(spec, theta0, X, y, None, cfg,
                                          "round1"))
    draws1 = phase("draws-round-1",
                   lambda: moments1.sample(ph["draws"],
                                           derive_seed(master, "draws1")))
    abs_ll1 = phase("risks", lambda: ppm.abs_loglik_matrix(spec, draws1, X, y))
    risks = ppm.compute_risks(abs_ll1)
    weights = ppm.map_weights(ids, risks, ph["c"], ph["g"])
    if internal:
        swag.save_moments(os.path.join(internal, "round1_moments.bin"),
                          moments1)
        np.save(os.path.join(internal, "round1_abs_ll.npy"), abs_ll1)
        ppm.save_weights_csv(os.path.join(internal, "weights_initial.csv"),
                             weights)

    moments2 = phase("swag-round-2",
                     lambda: _train_round(spec, theta0, X, y, weights.alpha,
                                          cfg, "round2"))
    draws2 = phase("draws-round-2",
                   lambda: moments2.sample(ph["draws"],
                                           derive_seed(master, "draws2")))
    abs_ll2 = phase("sensitivity",
                    lambda: ppm.abs_loglik_matrix(spec, draws2, X, y))
    report = ppm.sensitivity(abs_ll2, weights.alpha, ids)
    if internal:
        np.save(os.path.join(internal, "round2_abs_ll.npy"), abs_ll2)
        swag.save_moments(os.path.join(internal, "round2_moments.bin"),
                          moments2)

    final_moments, final_weights, final_report = moments2, weights, report
    if reweighted:
        final_weights = ppm.reweight(weights, report, ph["k"])
        moments3 = phase("swag-round-3",
                         lambda: _train_round(spec, theta0, X, y,
                                              final_weights.alpha, cfg,
                                              "round3"))
        draws3 = phase("draws-round-3",
                       lambda: moments3.sample(ph["draws"],
                                               derive_seed(master, "draws3")))
        abs_ll3 = phase("sensitivity-reweighted",
                        lambda: ppm.abs_loglik_matrix(spec, draws3, X, y))
        final_report = ppm.sensitivity(abs_ll3, final_weights.alpha, ids)
        final_moments = moments3
        if internal:
            np.save(os.path.join(internal, "round3_abs_ll.npy"), abs_ll3)
            swag.save_moments(os.path.join(internal, "round3_moments.bin"),
                              moments3)
            ppm.save_weights_csv(
                os.path.join(internal, "weights_reweighted.csv"),
                final_weights)

    released = final_moments.sample(1, derive_seed(master, "release"))[0]
    result = SwagPpmResult(released, final_report, final_weights,
                           final_moments)
    if out_dir:
        save_checkpoint(os.path.join(out_dir, "release", "released_model.bin"),
                        released, {"epsilon": result.epsilon})
        ppm.save_report_json(os.path.join(out_dir, "privacy_report.json"),
                             final_report)
    return result


def run_dp_sgd(cfg, train_view, delta=None):
    """DP-SGD baseline with sigma calibrated to the target epsilon."""
    dp = cfg["dp_sgd"]
    delta = dp["delta"] if delta is None else delta
    n = len(train_view)
    batch = min(dp["batch_size"], n)
    q = batch / n
    steps = dp["epochs"] * (-(-n // batch))
    sigma = accountant.calibrate_noise(dp["target_epsilon"], delta, q, steps)
    spec = model_spec(cfg, train_view.num_classes, train_view.feature_dim)
    theta0 = models.init_params(spec, derive_seed(cfg["seed"], "init"))
    tc = trainer.TrainConfig(
        trainer.DP_SGD, dp["learning_rate"], batch, dp["epochs"],
        seed=derive_seed(cfg["seed"], "dp-sgd"), clip_norm=dp["clip_norm"],
        noise_multiplier=sigma)
    theta, _ = trainer.train(spec, theta0, train_view.feature_matrix(),
                             train_view.labels, tc)
    budget = accountant.to_dp(
        accountant.compose(accountant.RdpLedger(q, sigma), steps), delta)
    return theta, sigma, budget


def run_nonprivate(cfg, train_view):
    np_cfg = cfg["nonprivate"]
    spec = model_spec(cfg, train_view.num_classes, train_view.feature_dim)
    theta0 = models.init_params(spec, derive_seed(cfg["seed"], "init"))
    tc = trainer.TrainConfig(
        trainer.ADAPTIVE, np_cfg["learning_rate"], np_cfg["batch_size"],
        np_cfg["epochs"], seed=derive_seed(cfg["seed"], "nonprivate"),
        weight_decay=spec.weight_decay)
    theta, _ = trainer.train(spec, theta0, train_view.feature_matrix(),
                             train_view.labels, tc)
    return theta


def predict(spec, theta, view):
    """Argmax predictions; np.argmax breaks ties toward the lowest index."""
    P = models.forward_batch(spec, theta, view.feature_matrix())
    return P.argmax(axis=1)


def evaluate(spec, theta, test_view):
    y_pred = predict(spec, theta, test_view)
    tally = metrics.tally_from_predictions(test_view.labels, y_pred,
                                           test_view.num_classes)
    return {
        "tally": tally,
        "f1_per_class": metrics.f1_per_class(tally),
        "weighted_f1": metrics.weighted_f1(tally),
        "macro_f1": metrics.macro_f1(tally),
    }


@dataclass
class BenchmarkRow:
    name: str
    epsilon: Optional[float]
    delta: str
    weighted_f1: float
    macro_f1: float
    f1_per_class: np.ndarray
    wall_clock: float
    error: Optional[str] = None


def run_benchmark(cfg, out_dir=None):
    """Train the four comparators on a shared split, plus the DP-SGD delta
    sweep, and emit the summary / per-class / sweep tables."""
    train_view, test_view = prepare_data(cfg)
    spec = model_spec(cfg, train_view.num_classes, train_view.feature_dim)
    rows = []
    aux = {"train_view": train_view, "test_view": test_view}

    def bench(name, epsilon, delta, fn):
        start = time.time()
        try:
            theta = fn()
            ev = evaluate(spec, theta, test_view)
            rows.append(BenchmarkRow(name, epsilon() if callable(epsilon)
                                     else epsilon, delta,
                                     ev["weighted_f1"], ev["macro_f1"],
                                     ev["f1_per_class"], time.time() - start))
        except Exception as e:  # noqa: BLE001 - record and continue
            rows.append(BenchmarkRow(name, None, delta, float("nan"),
                                     float("nan"),
                                     np.full(test_view.num_classes, np.nan),
                                     time.time() - start, error=str(e)))

    bench("non-private", None, "-", lambda: run_nonprivate(cfg, train_view))

    swag_dir = os.path.join(out_dir, "swag_ppm") if out_dir else None
    res = {}

    def swag_run(reweighted):
        key = "rw" if reweighted else "plain"
        res[key] = run_swag_ppm(
            cfg, train_view,
            out_dir=(swag_dir + ("_rw" if reweighted else "")
                     if swag_dir else None),
            reweighted=reweighted)
        return res[key].released_theta

    bench("swag-ppm", lambda: res["plain"].epsilon, "O(n^-1/2)",
          lambda: swag_run(False))
    bench("swag-ppm-reweighted", lambda: res["rw"].epsilon, "O(n^-1/2)",
          lambda: swag_run(True))

    dp_out = {}

    def dp_run(delta):
        theta, sigma, budget = run_dp_sgd(cfg, train_view, delta)
        dp_out[delta] = (sigma, budget)
        return theta

    base_delta = cfg["dp_sgd"]["delta"]
    bench("dp-sgd", cfg["dp_sgd"]["target_epsilon"], repr(base_delta),
          lambda: dp_run(base_delta))

    sweep_rows = []
    for delta in cfg["delta_sweep"]:
        before = len(rows)
        bench("dp-sgd", cfg["dp_sgd"]["target_epsilon"], repr(delta),
              lambda: dp_run(delta))
        sweep_rows.append(rows.pop(before))

    if "plain" in res:
        aux["weights"] = res["plain"].weights
        aux["swag_ppm"] = res["plain"]
    if "rw" in res:
        aux["swag_ppm_rw"] = res["rw"]
    aux["dp_budgets"] = dp_out
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_reports(out_dir, cfg, rows, sweep_rows, aux)
    return rows, sweep_rows, aux


def _fmt_eps(row):
    return "-" if row.epsilon is None else "%.4g" % row.epsilon


def write_reports(out_dir, cfg, rows, sweep_rows, aux):
    train_view = aux["train_view"]
    test_view = aux["test_view"]
    train_counts = train_view.class_counts()
    test_counts = test_view.class_counts()

    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["model", "epsilon", "delta", "f1_weighted", "f1_macro"])
        for row in rows:
            w.writerow([row.name, _fmt_eps(row), row.delta,
                        "%.4f" % row.weighted_f1, "%.4f" % row.macro_f1])

    by_name = {row.name: row for row in rows}
    with open(os.path.join(out_dir, "per_class.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["code", "test_size", "f1_nonprivate", "f1_swagppm",
                    "f1_dpsgd"])
        for c in range(test_view.num_classes):
            w.writerow([test_view.label_names[c], int(test_counts[c])] + [
                "%.4f" % by_name[name].f1_per_class[c]
                if name in by_name else ""
                for name in ("non-private", "swag-ppm", "dp-sgd")])

    with open(os.path.join(out_dir, "delta_sweep.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["method", "target_epsilon", "delta", "f1_weighted",
                    "f1_macro"])
        for row in sweep_rows:
            w.writerow([row.name, _fmt_eps(row), row.delta,
                        "%.4f" % row.weighted_f1, "%.4f" % row.macro_f1])
        swag_row = by_name.get("swag-ppm")
        if swag_row:
            w.writerow([swag_row.name, _fmt_eps(swag_row), swag_row.delta,
                        "%.4f" % swag_row.weighted_f1,
                        "%.4f" % swag_row.macro_f1])

    # data behind the F1-by-class-size and weight-density figures
    with open(os.path.join(out_dir, "f1_by_class_size.csv"), "w",
              newline="") as f:
        w = csv.writer(f)
        w.writerow(["code", "train_size", "f1_nonprivate", "f1_swagppm",
                    "f1_dpsgd"])
        for c in range(test_view.num_classes):
            w.writerow([test_view.label_names[c], int(train_counts[c])] + [
                "%.4f" % by_name[name].f1_per_class[c]
                if name in by_name else ""
                for name in ("non-private", "swag-ppm", "dp-sgd")])

    if "weights" in aux:
        top, bottom = metrics.quartile_class_sets(train_counts)
        quart = {}
        for c in top:
            quart[int(c)] = "top"
        for c in bottom:
            quart[int(c)] = "bottom"
        label_of = {int(i): int(lbl) for i, lbl in
                    zip(train_view.ids, train_view.labels)}
        weights = aux["weights"]
        with open(os.path.join(out_dir, "weight_density.csv"), "w",
                  newline="") as f:
            w = csv.writer(f)
            w.writerow(["record_id", "class", "size_quartile", "alpha"])
            for rid, alpha in zip(weights.record_ids, weights.alpha):
                c = label_of[int(rid)]
                w.writerow([int(rid), train_view.label_names[c],
                            quart.get(c, "mid"), repr(float(alpha))])

    with open(os.path.join(out_dir, "summary.md"), "w") as f:
        f.write("| model | epsilon | delta | f1_weighted | f1_macro |\n")
        f.write("|---|---|---|---|---|\n")
        for row in rows:
            f.write("| %s | %s | %s | %.4f | %.4f |\n"
                    % (row.name, _fmt_eps(row), row.delta, row.weighted_f1,
                       row.macro_f1))

    manifest = {
        "config": cfg,
        "input_hash": train_view.provenance,
        "train_manifest": train_view.manifest(),
        "test_manifest": test_view.manifest(),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1, default=str)
