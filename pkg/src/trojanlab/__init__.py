"""trojanlab: gate-level Trojan detection with a from-scratch GNN, plus a
functionality-preserving backdoor-attack workbench."""

from .netlist import (Circuit, CoverageMap, Gate, NetlistError, check_equivalence,
                      emit_netlist, parse_netlist, simulate, splice_not_chain,
                      toggle_coverage)
from .graphs import Graph, NormalizedAdjacency, circuit_to_graph, normalize_adjacency
from .gnn import (Hyperparams, ModelParams, Prediction, TrainResult, attention_topk_pool,
                  classify, gcn_forward, gradients, loss_cross_entropy, readout_max, train)
from .checkpoint import load_model, save_model
from .dataset import (DatasetConfig, LabeledSample, TJ_FREE, TJ_IN, build_dataset,
                      gen_circuit, inject_trojan, load_dataset, write_dataset)
from .backdoor import (AttackConfig, BackdooredModel, TRIGGER_ABSENT, TRIGGER_PRESENT,
                       classify_backdoored, compose_labels, inject_backdoor_trigger,
                       poison_dataset, select_trigger_net, train_payload)
from .metrics import (ExperimentReport, attack_success_rate, backdoor_accuracy,
                      clean_accuracy)
from .experiment import ExperimentConfig, load_config, parse_config, run_experiment

__version__ = "0.1.0"
