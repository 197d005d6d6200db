"""Query-efficient black-box adversarial attacks via surrogate-gradient
sign switching, with RGF fallbacks and an experiment harness."""

from . import errors
from .dataset import (
    DatasetManifest,
    generate_synthetic_dataset,
    load_dataset,
    load_manifest,
    write_dataset,
)
from .engine import (
    AttackConfig,
    AttackResult,
    IterationTrace,
    choose_target_class,
    default_step_size,
    rgf_estimate,
    run_attack,
    run_no_switch,
    run_rgf_baseline,
    run_switch,
)
from .experiment import (
    ExperimentReport,
    ImageRecord,
    SwitchStats,
    aggregate_queries,
    budget_curve,
    emit_report,
    load_report,
    query_histogram,
    run_experiment,
    switch_statistics,
)
from .models import (
    LinearModel,
    Mlp2Model,
    builtin_gradient,
    load_model,
    make_linear,
    make_mlp2,
    save_model,
)
from .objectives import (
    AttackGoal,
    attack_loss,
    is_success,
    margin_loss,
    neg_cross_entropy,
)
from .oracles import (
    BuiltinOracle,
    BuiltinSurrogate,
    ControlledCosineSurrogate,
    NegatedSurrogate,
    QueryLedger,
    RandomSurrogate,
    RemoteOracle,
    RemoteSurrogate,
    controlled_cosine_surrogate,
    query_loss,
    random_surrogate,
)
from .tensors import (
    ImageTensor,
    box_clamp,
    clip_epsilon,
    cosine_similarity,
    lp_normalize,
)

__version__ = "0.1.0"
