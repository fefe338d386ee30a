"""Joint sparse and low-rank representation (SLR, C-HiSLR) for multichannel classification."""
from ._backend import BACKEND
from .classify import (ClassificationReport, ConfusionMatrix, ConfusionSummary,
                       accumulate_confusion, aggregate_runs, eigenface_classify, eigenface_fit,
                       residual_classify, src_classify)
from .dataio import (EmotionSequence, SyntheticProblem, build_dictionary, build_test_unit,
                     generate_synthetic, generate_synthetic_sequences, load_sequence_dir,
                     split_train_test)
from .dictionary import GroupedDictionary
from .errors import *  # noqa: F401,F403
from .linalg import SvdFactors, matmul, norm, read_csv, svd_thin, write_csv
from .prox import (GroupPartition, group_shrink, hierarchical_prox, singular_value_threshold,
                   soft_threshold)
from .solvers import (DecompositionResult, SolverConfig, admm_solve, omp, x_step_chislr,
                      x_step_slr)

__version__ = "0.1.0"
