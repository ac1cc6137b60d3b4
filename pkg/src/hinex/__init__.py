"""Hierarchy-aware nexus classifiers for open-vocabulary recognition.

The pipeline runs offline: retrieve super-/sub-categories for each target
class from a semantic hierarchy, integrate them into Is-A sentences, embed
the sentences, and fuse the embeddings into one classifier vector per
class. Evaluation covers detection mAP50 across granularity levels and
zero-shot top-1 accuracy.
"""

from .classify import Prediction, predict, predict_batch, scores
from .embedding import (
    DeterministicBackend,
    EmbeddingBackend,
    FileStoreBackend,
    HttpBackend,
    normalize,
)
from .evaluation import (
    DetectionRecord,
    EvalReport,
    GroundTruthBox,
    evaluate_map50,
    evaluate_top1,
    expand_vocabulary,
    iou,
    summarize_levels,
)
from .hierarchy import (
    CategoryNode,
    SemanticHierarchy,
    Vocabulary,
    load_hierarchy,
    load_hierarchy_file,
    load_vocabulary,
    save_hierarchy_file,
)
from .hiergen import HierGenConfig, parse_amp_list, sub_prompt, super_prompt, synthesize_hierarchy
from .nexus import (
    NexusClassifier,
    aggregate_mean,
    aggregate_principal_eigenvector,
    build_classifier,
    load_classifier,
    save_classifier,
)
from .sentences import (
    Branch,
    SentenceSet,
    enumerate_branches,
    render_concat,
    render_ensemble_names,
    render_is_a,
)

__version__ = "0.1.0"
