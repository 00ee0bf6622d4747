"""galleryscope: synthetic gallery + wearable-visit simulation with a VGG-nano
classifier, two-stage pre-train/fine-tune training, and ordered top-k
evaluation.

Subpackages/modules:
    nn        dense-tensor kernels, the VGG-nano network, SGD, gradient checks
    data      gallery manifests, label spaces, validation
    sim       procedural galleries, capture degradations, visit simulation
    augment   crop/flip/rotation/contrast training-set expansion
    training  pre-training, fine-tuning with leave-one-split-out CV, checkpoints
    evaluate  ordered top-k metrics, coverage, visit records, reports
    cli       the `galleryscope` command-line pipeline
"""

from . import augment, data, evaluate, nn, sim, training
from .augment import AugmentPolicy, augment_image, expand_training_set
from .data import (
    ArtworkInstance,
    CaptureRecord,
    GalleryManifest,
    LabelSpace,
    ManifestError,
    build_label_space,
    load_manifest,
    save_manifest,
    validate_manifest,
)
from .evaluate import (
    EvalReport,
    Prediction,
    VisitRecord,
    aggregate_splits,
    build_eval_report,
    build_visit_record,
    distinct_coverage,
    split_topk_accuracy,
    topk_hit,
)
from .sim import (
    DegradationConfig,
    VisitPlan,
    apply_degradations,
    generate_gallery,
    get_preset,
    render_training_views,
    simulate_visit,
)
from .training import (
    Checkpoint,
    HyperParams,
    finetune_cv,
    load_checkpoint,
    make_generic_set,
    pretrain,
    replace_head,
    save_checkpoint,
)

__version__ = "0.1.0"
