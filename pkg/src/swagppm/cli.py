"""Command-line entry points for the training pipeline and reports."""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import accountant, data, pipeline
from .params import save_checkpoint

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHASE = 3


def _load_cfg(args):
    obj = None
    if args.config:
        with open(args.config) as f:
            obj = json.load(f)
    cfg = pipeline.load_config(obj, args.override)
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _out_dir(args):
    out = args.out or "runs/latest"
    os.makedirs(out, exist_ok=True)
    return out


def cmd_generate_data(args):
    cfg = _load_cfg(args)
    out = _out_dir(args)
    train_view, test_view = pipeline.prepare_data(cfg)
    data.save_manifest(os.path.join(out, "train_manifest.json"), train_view,
                       split_seed=cfg["seed"])
    data.save_manifest(os.path.join(out, "test_manifest.json"), test_view,
                       split_seed=cfg["seed"])
    print("train: %d records, %d classes, gini=%.3f"
          % (len(train_view), train_view.num_classes,
             data.gini(train_view.class_counts())))
    print("test:  %d records" % len(test_view))
    return EXIT_OK


def cmd_train(args):
    cfg = _load_cfg(args)
    out = _out_dir(args)
    train_view, test_view = pipeline.prepare_data(cfg)
    spec = pipeline.model_spec(cfg, train_view.num_classes,
                               train_view.feature_dim)
    theta = pipeline.run_nonprivate(cfg, train_view)
    ev = pipeline.evaluate(spec, theta, test_view)
    save_checkpoint(os.path.join(out, "model.bin"), theta,
                    {"model": "non-private"})
    print("non-private: weighted F1 %.4f, macro F1 %.4f"
          % (ev["weighted_f1"], ev["macro_f1"]))
    return EXIT_OK


def _swag_ppm(args, reweighted):
    cfg = _load_cfg(args)
    out = _out_dir(args)
    train_view, test_view = pipeline.prepare_data(cfg)
    spec = pipeline.model_spec(cfg, train_view.num_classes,
                               train_view.feature_dim)
    result = pipeline.run_swag_ppm(cfg, train_view, out_dir=out,
                                   reweighted=reweighted)
    ev = pipeline.evaluate(spec, result.released_theta, test_view)
    print("epsilon = %.4f (2 * Delta, Delta = %.4f)"
          % (result.epsilon, result.report.delta))
    print("weighted F1 %.4f, macro F1 %.4f"
          % (ev["weighted_f1"], ev["macro_f1"]))
    return EXIT_OK


def cmd_swag_ppm(args):
    return _swag_ppm(args, reweighted=False)


def cmd_swag_ppm_rw(args):
    return _swag_ppm(args, reweighted=True)


def cmd_dp_sgd(args):
    cfg = _load_cfg(args)
    out = _out_dir(args)
    train_view, test_view = pipeline.prepare_data(cfg)
    spec = pipeline.model_spec(cfg, train_view.num_classes,
                               train_view.feature_dim)
    theta, sigma, budget = pipeline.run_dp_sgd(cfg, train_view)
    ev = pipeline.evaluate(spec, theta, test_view)
    save_checkpoint(os.path.join(out, "dp_sgd_model.bin"), theta,
                    {"model": "dp-sgd", "sigma": sigma,
                     "epsilon": budget.epsilon, "delta": budget.delta})
    print("sigma = %.4f, realized (epsilon, delta) = (%.4f, %g)"
          % (sigma, budget.epsilon, budget.delta))
    print("weighted F1 %.4f, macro F1 %.4f"
          % (ev["weighted_f1"], ev["macro_f1"]))
    return EXIT_OK


def cmd_account(args):
    cfg = _load_cfg(args)
    out = _out_dir(args)
    dp = cfg["dp_sgd"]
    n = cfg["data"]["synthetic"]["total_records"] * cfg["data"]["train_fraction"]
    batch = dp["batch_size"]
    q = min(1.0, batch / n)
    steps = dp["epochs"] * int(np.ceil(n / batch))
    sigma = accountant.calibrate_noise(dp["target_epsilon"], dp["delta"], q,
                                       steps)
    ledger = accountant.compose(accountant.RdpLedger(q, sigma), steps)
    path = os.path.join(out, "frontier.csv")
    writer = csv.writer(sys.stdout)
    writer.writerow(["delta", "epsilon", "order"])
    with open(path, "w", newline="") as f:
        fw = csv.writer(f)
        fw.writerow(["delta", "epsilon", "order"])
        for delta in (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.1, 0.5, 0.99):
            budget = accountant.to_dp(ledger, delta)
            for w in (writer, fw):
                w.writerow([delta, "%.6f" % budget.epsilon, budget.order])
    with open(os.path.join(out, "ledger.json"), "w") as f:
        json.dump(accountant.ledger_to_dict(ledger), f, indent=1)
    print("sigma = %.4f for target epsilon %g at delta %g (q=%.4f, T=%d)"
          % (sigma, dp["target_epsilon"], dp["delta"], q, steps),
          file=sys.stderr)
    return EXIT_OK


def cmd_benchmark(args):
    cfg = _load_cfg(args)
    out = _out_dir(args)
    rows, sweep_rows, _ = pipeline.run_benchmark(cfg, out_dir=out)
    failed = [row for row in rows if row.error]
    for row in rows:
        print("%-22s eps=%-8s delta=%-10s wF1=%.4f mF1=%.4f %s"
              % (row.name, pipeline._fmt_eps(row), row.delta,
                 row.weighted_f1, row.macro_f1,
                 ("FAILED: " + row.error) if row.error else ""))
    if failed:
        return EXIT_PHASE
    print("reports written to %s" % out)
    return EXIT_OK


def cmd_report(args):
    out = args.out or "runs/latest"
    path = os.path.join(out, "summary.md")
    if not os.path.exists(path):
        print("no summary at %s; run `benchmark` first" % path,
              file=sys.stderr)
        return EXIT_CONFIG
    print(open(path).read())
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="swagppm",
        description="Private classifier release via posterior-draw "
                    "mechanisms, with a DP-SGD baseline.")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="dotted config override, value parsed as JSON")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in [("generate-data", cmd_generate_data),
                     ("train", cmd_train),
                     ("swag-ppm", cmd_swag_ppm),
                     ("swag-ppm-rw", cmd_swag_ppm_rw),
                     ("dp-sgd", cmd_dp_sgd),
                     ("account", cmd_account),
                     ("benchmark", cmd_benchmark),
                     ("report", cmd_report)]:
        sp = sub.add_parser(name)
        sp.set_defaults(func=fn)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (pipeline.ConfigError, json.JSONDecodeError, FileNotFoundError) as e:
        print("config error: %s" % e, file=sys.stderr)
        return EXIT_CONFIG
    except pipeline.PhaseError as e:
        print("phase failure: %s" % e, file=sys.stderr)
        return EXIT_PHASE


if __name__ == "__main__":
    sys.exit(main())
