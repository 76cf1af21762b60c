"""Evaluation metrics and the experiment report."""

from __future__ import annotations

from dataclasses import dataclass

from .backdoor import BackdooredModel, classify_backdoored
from .dataset import LABEL_NAMES, TJ_FREE, TJ_IN, LabeledSample
from .gnn import Hyperparams, ModelParams, classify


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    kind: str            # "clean" or "triggered"
    true_label: int
    normal_label: int
    payload_label: int
    composed_label: int


@dataclass(frozen=True)
class ExperimentReport:
    config_lines: tuple[str, ...]
    holdout: str
    phi: float
    clean_accuracy: float
    backdoor_accuracy: float
    attack_success_rate: float
    stealth_threshold: float
    sample_log: tuple[SampleRecord, ...]

    @property
    def stealthy(self) -> bool:
        return abs(self.backdoor_accuracy - self.clean_accuracy) <= self.stealth_threshold


def clean_accuracy(normal: ModelParams, test: list[LabeledSample], hyper: Hyperparams) -> float:
    """Fraction of clean test samples the detector labels correctly."""
    if not test:
        raise ValueError("empty test set")
    hits = sum(classify(normal, s.graph, hyper).label == s.label for s in test)
    return hits / len(test)


def backdoor_accuracy(model: BackdooredModel, clean_test: list[LabeledSample],
                      hyper: Hyperparams) -> float:
    """Accuracy of the composed model on clean (trigger-free) test samples."""
    if not clean_test:
        raise ValueError("empty test set")
    if any(s.provenance.phi is not None for s in clean_test):
        raise ValueError("clean_test contains triggered circuits")
    hits = sum(classify_backdoored(model, s.graph, hyper) == s.label for s in clean_test)
    return hits / len(clean_test)


def attack_success_rate(model: BackdooredModel, triggered_tjin_test: list[LabeledSample],
                        hyper: Hyperparams) -> float:
    """Fraction of triggered Trojan-in samples the composed model calls Trojan-free."""
    if not triggered_tjin_test:
        raise ValueError("empty triggered set")
    for s in triggered_tjin_test:
        if s.label != TJ_IN or s.provenance.phi is None:
            raise ValueError("attack_success_rate expects triggered TjIn samples only")
    hits = sum(classify_backdoored(model, s.graph, hyper) == TJ_FREE
               for s in triggered_tjin_test)
    return hits / len(triggered_tjin_test)


def render_tsv(report: ExperimentReport) -> str:
    lines = [
        f"clean_accuracy\t{report.clean_accuracy:.6f}",
        f"backdoor_accuracy\t{report.backdoor_accuracy:.6f}",
        f"attack_success_rate\t{report.attack_success_rate:.6f}",
        f"stealthy\t{int(report.stealthy)}",
    ]
    return "\n".join(lines) + "\n"


def render_text(report: ExperimentReport) -> str:
    head = (f"{'Testing':<10} {'Trigger':<8} {'Clean':<9} {'Backdoor':<9} {'Attack':<12}\n"
            f"{'Dataset':<10} {'Size':<8} {'Accuracy':<9} {'Accuracy':<9} {'Success Rate':<12}\n")
    trigger = f"{report.phi * 100:.0f}%"
    row = (f"{report.holdout:<10} {trigger:<8} "
           f"{report.clean_accuracy:<9.3f} {report.backdoor_accuracy:<9.3f} "
           f"{report.attack_success_rate:<12.3f}\n")
    verdict = "yes" if report.stealthy else "no"
    stealth = (f"stealthy: {verdict} (|{report.backdoor_accuracy:.3f} - "
               f"{report.clean_accuracy:.3f}| <= {report.stealth_threshold:.2f})\n")
    cfg = "".join(f"  {line}\n" for line in report.config_lines)
    log_head = "sample\tkind\ttrue\tnormal\tpayload\tcomposed\n"
    log = "".join(
        f"{r.sample_id}\t{r.kind}\t{LABEL_NAMES[r.true_label]}\t{LABEL_NAMES[r.normal_label]}"
        f"\t{r.payload_label}\t{LABEL_NAMES[r.composed_label]}\n"
        for r in report.sample_log)
    return (head + row + "\n" + stealth + "\nconfiguration:\n" + cfg
            + "\nper-sample predictions:\n" + log_head + log)
