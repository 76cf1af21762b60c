"""Experiment configuration and the end-to-end pipeline.

Config files are flat ``key = value`` text; `#` starts a comment.  Keys are
prefixed by the section they configure: ``dataset_*``, ``attack_*`` and
``model_*``, plus the free-standing ``stealth_threshold``.  `dataset_seed`
is the only required key.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import netlist
from .backdoor import (AttackConfig, BackdooredModel, PAYLOAD_LABEL_NAMES,
                       classify_backdoored, inject_backdoor_trigger, poison_dataset,
                       train_payload, trigger_length)
from .checkpoint import save_model
from .dataset import (DatasetConfig, LABEL_NAMES, LabeledSample, TJ_IN, build_dataset,
                      write_dataset)
from .gnn import Hyperparams, ModelParams, classify, train
from .graphs import circuit_to_graph
from .metrics import (ExperimentReport, SampleRecord, attack_success_rate, backdoor_accuracy,
                      clean_accuracy, render_text, render_tsv)

ATTACK_MANIFEST = "attack.tsv"
REPORT_TXT = "report.txt"
REPORT_TSV = "report.tsv"
NORMAL_CKPT = "normal.ckpt"
PAYLOAD_CKPT = "payload.ckpt"
DATASET_SUBDIR = "dataset"


class ConfigError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    attack: AttackConfig
    hyper: Hyperparams
    stealth_threshold: float = 0.1


_INT = int
_FLOAT = float
_STR = str

# key -> (section attribute path, type)
_SCHEMA = {
    "dataset_seed": ("dataset.seed", _INT),
    "dataset_n_circuits": ("dataset.n_circuits", _INT),
    "dataset_gate_count_min": ("dataset.gate_count_range.0", _INT),
    "dataset_gate_count_max": ("dataset.gate_count_range.1", _INT),
    "dataset_input_count_min": ("dataset.input_count_range.0", _INT),
    "dataset_input_count_max": ("dataset.input_count_range.1", _INT),
    "dataset_trojan_fraction": ("dataset.trojan_fraction", _FLOAT),
    "dataset_holdout": ("dataset.holdout", _STR),
    "dataset_n_families": ("dataset.n_families", _INT),
    "attack_phi": ("attack.phi", _FLOAT),
    "attack_gamma": ("attack.gamma", _FLOAT),
    "attack_target_label": ("attack.target_label", _INT),
    "attack_seed": ("attack.seed", _INT),
    "model_layers": ("hyper.layers", _INT),
    "model_hidden": ("hyper.hidden", _INT),
    "model_pooling_ratio": ("hyper.pooling_ratio", _FLOAT),
    "model_dropout_rate": ("hyper.dropout_rate", _FLOAT),
    "model_epochs": ("hyper.epochs", _INT),
    "model_batch_size": ("hyper.batch_size", _INT),
    "model_learning_rate": ("hyper.learning_rate", _FLOAT),
    "model_seed": ("hyper.seed", _INT),
    "stealth_threshold": ("stealth_threshold", _FLOAT),
}


def parse_config(text: str) -> ExperimentConfig:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        cut = raw.find("#")
        body = (raw if cut < 0 else raw[:cut]).strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, val = body.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        _, typ = _SCHEMA[key]
        try:
            values[key] = typ(val)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad {typ.__name__} value for '{key}': '{val}'")
    if "dataset_seed" not in values:
        raise ConfigError("missing required key 'dataset_seed'")

    def take(key, default):
        return values.get(key, default)

    dataset = DatasetConfig(
        seed=values["dataset_seed"],
        n_circuits=take("dataset_n_circuits", 60),
        gate_count_range=(take("dataset_gate_count_min", 50), take("dataset_gate_count_max", 300)),
        input_count_range=(take("dataset_input_count_min", 6), take("dataset_input_count_max", 16)),
        trojan_fraction=take("dataset_trojan_fraction", 0.5),
        holdout=take("dataset_holdout", "F0"),
        n_families=take("dataset_n_families", 6),
    )
    attack = AttackConfig(
        phi=take("attack_phi", 0.5),
        gamma=take("attack_gamma", 0.5),
        target_label=take("attack_target_label", 0),
        seed=take("attack_seed", 1),
    )
    hyper = Hyperparams(
        layers=take("model_layers", 2),
        hidden=take("model_hidden", 200),
        pooling_ratio=take("model_pooling_ratio", 0.8),
        dropout_rate=take("model_dropout_rate", 0.5),
        epochs=take("model_epochs", 200),
        batch_size=take("model_batch_size", 4),
        learning_rate=take("model_learning_rate", 0.001),
        seed=take("model_seed", 0),
    )
    try:
        dataset.validate()
        attack.validate()
        hyper.validate()
    except Exception as exc:
        raise ConfigError(str(exc))
    return ExperimentConfig(dataset, attack, hyper, take("stealth_threshold", 0.1))


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def config_echo(cfg: ExperimentConfig) -> tuple[str, ...]:
    """Canonical `key = value` rendering of the effective configuration."""
    d, a, h = cfg.dataset, cfg.attack, cfg.hyper
    flat = {
        "dataset_seed": d.seed, "dataset_n_circuits": d.n_circuits,
        "dataset_gate_count_min": d.gate_count_range[0],
        "dataset_gate_count_max": d.gate_count_range[1],
        "dataset_input_count_min": d.input_count_range[0],
        "dataset_input_count_max": d.input_count_range[1],
        "dataset_trojan_fraction": d.trojan_fraction,
        "dataset_holdout": d.holdout, "dataset_n_families": d.n_families,
        "attack_phi": a.phi, "attack_gamma": a.gamma,
        "attack_target_label": a.target_label, "attack_seed": a.seed,
        "model_layers": h.layers, "model_hidden": h.hidden,
        "model_pooling_ratio": h.pooling_ratio, "model_dropout_rate": h.dropout_rate,
        "model_epochs": h.epochs, "model_batch_size": h.batch_size,
        "model_learning_rate": h.learning_rate, "model_seed": h.seed,
        "stealth_threshold": cfg.stealth_threshold,
    }
    return tuple(f"{k} = {flat[k]}" for k in sorted(flat))


# ---------------------------------------------------------------------------
# pipeline stages


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc)


def make_triggered_test(test: list[LabeledSample], cfg: ExperimentConfig) -> list[LabeledSample]:
    """Backdoor-triggered copies of the TjIn test samples (the ASR set)."""
    rng = np.random.default_rng([cfg.attack.seed, 1])
    out = []
    for s in test:
        if s.label != TJ_IN:
            continue
        seed = int(rng.integers(2 ** 63))
        circuit = inject_backdoor_trigger(s.circuit, cfg.attack.phi, seed)
        prov = replace(s.provenance, base_label=s.label, phi=cfg.attack.phi,
                       trigger_len=trigger_length(cfg.attack.phi, len(s.circuit.gates)))
        out.append(LabeledSample(circuit_to_graph(circuit), circuit, TJ_IN, prov))
    return out


def write_attack_manifest(poisoned: list[LabeledSample], outdir: Path) -> None:
    """Dataset-manifest rows extended with phi, trigger_len, payload_label."""
    lists_dir = outdir / "netlists_poisoned"
    lists_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for s in poisoned:
        p = s.provenance
        rel = f"netlists_poisoned/{p.sample_id}.bench"
        (outdir / rel).write_text(netlist.emit_netlist(s.circuit))
        phi = "-" if p.phi is None else f"{p.phi}"
        rows.append((p.sample_id, p.family, LABEL_NAMES[p.base_label], str(p.seed), rel,
                     "train", phi, str(p.trigger_len), PAYLOAD_LABEL_NAMES[s.label]))
    rows.sort(key=lambda r: r[0])
    (outdir / ATTACK_MANIFEST).write_text("".join("\t".join(r) + "\n" for r in rows))


def evaluate_models(normal: ModelParams, payload: ModelParams,
                    test: list[LabeledSample], triggered: list[LabeledSample],
                    cfg: ExperimentConfig) -> ExperimentReport:
    model = BackdooredModel(normal, payload)
    hyper = cfg.hyper
    log = []
    for s in test:
        y = classify(normal, s.graph, hyper).label
        x = classify(payload, s.graph, hyper).label
        log.append(SampleRecord(s.provenance.sample_id, "clean", s.label, y, x,
                                classify_backdoored(model, s.graph, hyper)))
    for s in triggered:
        y = classify(normal, s.graph, hyper).label
        x = classify(payload, s.graph, hyper).label
        log.append(SampleRecord(s.provenance.sample_id, "triggered", s.label, y, x,
                                classify_backdoored(model, s.graph, hyper)))
    return ExperimentReport(
        config_lines=config_echo(cfg),
        holdout=cfg.dataset.holdout,
        phi=cfg.attack.phi,
        clean_accuracy=clean_accuracy(normal, test, hyper),
        backdoor_accuracy=backdoor_accuracy(model, test, hyper),
        attack_success_rate=attack_success_rate(model, triggered, hyper),
        stealth_threshold=cfg.stealth_threshold,
        sample_log=tuple(log),
    )


def run_experiment(cfg: ExperimentConfig, outdir: str | Path | None = None) -> ExperimentReport:
    """Full pipeline: dataset -> normal model -> poison -> payload -> metrics.

    Deterministic end to end: the same config yields byte-identical artifacts.
    When `outdir` is given, writes the dataset, both checkpoints, the attack
    manifest and report.txt/report.tsv there.
    """
    out = Path(outdir) if outdir is not None else None
    train_split, test_split = _stage("gen-dataset", build_dataset, cfg.dataset)
    if out is not None:
        _stage("gen-dataset", write_dataset, train_split, test_split, out / DATASET_SUBDIR)
    normal = _stage("train-normal", train, train_split, cfg.hyper).params
    if out is not None:
        _stage("train-normal", save_model, out / NORMAL_CKPT, normal)
    poisoned = _stage("attack", poison_dataset, train_split, cfg.attack)
    payload = _stage("attack", train_payload, poisoned, cfg.hyper).params
    if out is not None:
        _stage("attack", save_model, out / PAYLOAD_CKPT, payload)
        _stage("attack", write_attack_manifest, poisoned, out)
    triggered = _stage("evaluate", make_triggered_test, test_split, cfg)
    report = _stage("evaluate", evaluate_models, normal, payload, test_split, triggered, cfg)
    if out is not None:
        (out / REPORT_TXT).write_text(render_text(report))
        (out / REPORT_TSV).write_text(render_tsv(report))
    return report
