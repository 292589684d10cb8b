"""Semi-supervised variable selection with random axis-aligned projection ensembles."""
from .base_em import (
    EmConfig,
    EmParams,
    SoftLabels,
    e_step,
    em_update_tanh,
    init_hierarchical,
    init_uniform_sphere,
    m_step,
    run_em_multistart,
    run_em_single,
)
from .base_lda import ClassMoments, WhitenedBetween, class_moments, lda_base
from .dataset import LabeledDataset, drop_collinear, load_csv, standardize
from .errors import SharpSSLError
from .evaluation import (
    misclustering_rate,
    pair_frobenius_loss,
    population_diagnostics,
    recovery,
    sign_loss,
)
from .projections import Projection, SeededRng, back_project_diag, project, sample_projection
from .sharp_ssl import (
    PopulationOracle,
    SelectionResult,
    SharpConfig,
    fit_predict,
    score_group,
    select_variables,
)
from .synth import MixtureSpec, bayes_risk, build_figure2_spec, build_two_class_spec, sample

__version__ = "0.1.0"
