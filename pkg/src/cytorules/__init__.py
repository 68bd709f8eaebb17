"""Interpretable slide classification from per-cell feature vectors.

Pipeline: embed cells into a 2D space fit on reference slides of one class,
distort the space into a unit circle, summarize each slide as a 12-sector
density chart plus pairwise ratios (78 variables), and classify slides with
a Bayesian rule set searched by simulated annealing.
"""

from .dataset import (
    CellRecord,
    ClassLabel,
    Dataset,
    FeatureMap,
    PlantedSpec,
    Slide,
    SynthesisConfig,
    generate_planted_dataset,
    load_dataset,
    masked_average_pool,
    save_dataset,
    synthesize_ensemble,
)
from .embed import EmbeddingConfig, EmbeddingModel, fit_embedding, knn_graph, transform_points
from .chart import (
    DensityChart,
    DistortionParams,
    density_chart,
    distort,
    feature_vector,
    fit_distortion,
)
from .brs import BrsPrior, Condition, Rule, RuleSet, SaSchedule, evaluate, learn, predict
from .baselines import (
    BaselineConfig,
    LinearModel,
    MlpModel,
    predict_baseline,
    train_linear_svm,
    train_logistic,
    train_mlp,
)
from .evaluation import (
    PipelineConfig,
    Report,
    SplitConfig,
    patient_level_split,
    run_experiment,
    run_pipeline_once,
)
from .service import NearestCellsQuery, SessionState, load_session, nearest_cells, serve

__version__ = "0.1.0"
