"""Command-line driver.

    trojanlab gen-dataset  <config> <outdir>
    trojanlab train-normal <config> <dataset-dir> <model-out>
    trojanlab attack       <config> <dataset-dir> <normal-ckpt> <outdir>
    trojanlab evaluate     <config> <outdir>

`evaluate` reuses a staged experiment directory (dataset/, normal.ckpt,
payload.ckpt) when one is present, and otherwise runs the whole pipeline from
the config into <outdir>.  Exit code is 0 on success, 1 on any stage failure.
"""

from __future__ import annotations

import argparse
import shutil
import sys
from pathlib import Path

from .checkpoint import load_model, save_model
from .dataset import build_dataset, load_dataset, write_dataset
from .experiment import (DATASET_SUBDIR, NORMAL_CKPT, PAYLOAD_CKPT, REPORT_TSV, REPORT_TXT,
                         StageError, evaluate_models, load_config, make_triggered_test,
                         run_experiment, write_attack_manifest)
from .backdoor import poison_dataset, train_payload
from .gnn import train
from .metrics import render_text, render_tsv


def _cmd_gen_dataset(args) -> int:
    cfg = load_config(args.config)
    train_split, test_split = build_dataset(cfg.dataset)
    manifest = write_dataset(train_split, test_split, args.outdir)
    print(f"wrote {len(train_split)} train + {len(test_split)} test samples; "
          f"manifest: {manifest}")
    return 0


def _cmd_train_normal(args) -> int:
    cfg = load_config(args.config)
    train_split, _ = load_dataset(args.dataset)
    result = train(train_split, cfg.hyper)
    save_model(args.model_out, result.params)
    print(f"trained on {len(train_split)} samples for {cfg.hyper.epochs} epochs; "
          f"final mean loss {result.loss_trace[-1]:.6f}" if result.loss_trace
          else "trained (0 epochs)")
    return 0


def _cmd_attack(args) -> int:
    cfg = load_config(args.config)
    train_split, test_split = load_dataset(args.dataset)
    poisoned = poison_dataset(train_split, cfg.attack)
    result = train_payload(poisoned, cfg.hyper)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    save_model(outdir / PAYLOAD_CKPT, result.params)
    write_attack_manifest(poisoned, outdir)
    # stage a self-contained experiment directory for `evaluate`
    normal_src = Path(args.normal_model).resolve()
    normal_dst = (outdir / NORMAL_CKPT).resolve()
    if normal_src != normal_dst:
        shutil.copyfile(normal_src, normal_dst)
    dataset_copy = outdir / DATASET_SUBDIR
    if not dataset_copy.exists():
        shutil.copytree(args.dataset, dataset_copy)
    n_trig = sum(s.provenance.phi is not None for s in poisoned)
    print(f"poisoned {n_trig}/{len(poisoned)} training samples; payload model: "
          f"{outdir / PAYLOAD_CKPT}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    outdir = Path(args.outdir)
    staged = all((outdir / p).exists()
                 for p in (DATASET_SUBDIR, NORMAL_CKPT, PAYLOAD_CKPT))
    if staged:
        _, test_split = load_dataset(outdir / DATASET_SUBDIR)
        normal = load_model(outdir / NORMAL_CKPT)
        payload = load_model(outdir / PAYLOAD_CKPT)
        triggered = make_triggered_test(test_split, cfg)
        report = evaluate_models(normal, payload, test_split, triggered, cfg)
        (outdir / REPORT_TXT).write_text(render_text(report))
        (outdir / REPORT_TSV).write_text(render_tsv(report))
    else:
        outdir.mkdir(parents=True, exist_ok=True)
        report = run_experiment(cfg, outdir)
    sys.stdout.write(render_text(report))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="trojanlab",
                                     description="GNN Trojan-detection and backdoor-attack workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="generate the synthetic corpus")
    p.add_argument("config")
    p.add_argument("outdir")
    p.set_defaults(fn=_cmd_gen_dataset)

    p = sub.add_parser("train-normal", help="train the Trojan detector on the clean train split")
    p.add_argument("config")
    p.add_argument("dataset")
    p.add_argument("model_out")
    p.set_defaults(fn=_cmd_train_normal)

    p = sub.add_parser("attack", help="poison the train split and train the payload model")
    p.add_argument("config")
    p.add_argument("dataset")
    p.add_argument("normal_model")
    p.add_argument("outdir")
    p.set_defaults(fn=_cmd_attack)

    p = sub.add_parser("evaluate", help="compute metrics and write report.txt/report.tsv")
    p.add_argument("config")
    p.add_argument("outdir")
    p.set_defaults(fn=_cmd_evaluate)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except Exception as exc:  # config/IO/validation errors, tagged by command
        print(f"[{args.command}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
