"""Collective entanglement-witness classification at desk scale.

Layers, bottom up: `linalg` (dense two-qubit algebra), `sampling`
(counter-mode random ensembles), `states` (states, channels, collective
probabilities), `witnesses` (the three analytical witnesses),
`dataset` (purity-uniform labeled builder + file formats), `svm`
(from-scratch SMO ensembles), `evaluate` (confusion/ROC/batch spreads),
`cli` (orchestration).
"""

from . import dataset, evaluate, linalg, sampling, states, svm, witnesses
from .dataset import (Dataset, DatasetSpec, LabeledSample,
                      QuotaStarvationError, build_uniform_purity_dataset,
                      read_csv, read_w2qd, shard, split_train_test,
                      write_csv, write_manifest, write_w2qd)
from .evaluate import (ConfusionMatrix, RocCurve, RocPoint, apr, batch_std,
                       confusion, improvement_factor, rates, roc_and_auc)
from .states import (KrausChannel, bell_phi_plus, depolarize, negativity,
                     purity, singlet_projector, werner)
from .svm import (ClassWeights, RbfKernel, TrainedSvc, VotingEnsemble,
                  decision_value, penalty_sweep, predict, train_ensemble,
                  train_smo)
from .witnesses import (WitnessRecord, chsh_witness, collectibility,
                        entropic_witness, witness_record)

__all__ = [n for n in dir() if not n.startswith("_")]
