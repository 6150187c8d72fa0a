"""gapbench: ampute, impute, and score multivariate clinical time series.

The package turns fully (or mostly) observed vital-sign tensors into
controlled imputation benchmarks: artificial missingness under four
mechanisms (mcar, mar, mnar, bo), a pluggable suite of imputation methods,
error and distribution-divergence metrics over the removed cells, and a
seeded experiment grid with reproducible CSV reports.
"""

__version__ = "0.1.0"

from .amputation import (
    MECHANISMS,
    AmputationConfig,
    AmputationError,
    LogisticMaskModel,
    achieved_rate,
    ampute_data,
    blackout_mask,
    calibrate_intercept,
    mar_mask,
    mcar_mask,
    mnar_mask,
)
from .analysis import (
    AnalysisError,
    InformativeMissingnessReport,
    MissingnessCorrelation,
    informative_missingness,
    missingness_correlation,
)
from .bench import (
    BenchError,
    ConfigError,
    ExperimentGrid,
    MethodSpec,
    ResultRow,
    SyntheticSpec,
    emit_results,
    grid_from_config,
    grid_from_manifest,
    grid_to_config,
    run_grid,
    summarize,
)
from .dataset import (
    DEFAULT_FEATURES,
    DatasetError,
    Feature,
    NormalizationStats,
    SplitAssignment,
    VitalsFrame,
    fit_normalizer,
    frames_equal,
    generate_synthetic,
    load_csv,
    read_mask_csv,
    split_stays,
    write_csv,
    write_mask_csv,
)
from .imputers import (
    FittedImputer,
    ImputationError,
    Imputer,
    ImputerSpec,
    available_methods,
    fit,
    impute,
    lookup,
    register,
)
from .metrics import (
    AggregateCell,
    MetricError,
    MetricReport,
    Provenance,
    aggregate_runs,
    evaluate,
    jsd_histogram,
)
