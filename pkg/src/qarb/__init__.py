"""Condition-number preselection and cointegration screening for statistical arbitrage."""
from .arbitrage import (
    EnsembleSpec,
    Portfolio,
    PortfolioPool,
    ScreenConfig,
    ScreeningReport,
    complexity_experiment,
    exhaustive_pool,
    screen_fixed,
    screen_progressive,
)
from .data import PricePanel, SynthSpec, load_csv, load_report, save_csv, save_report, synth
from .econometrics import (
    QlrContract,
    adf_test,
    df_critical_values,
    difference,
    engle_granger,
    error_propagation_probe,
    ols_fit,
    qlr_fit,
)
from .embedding import build_embedding, exact_condition_number
from .errors import (
    ConfigError,
    DegenerateInput,
    NullSpectrumAnomaly,
    OrderError,
    ParseError,
    ProtocolViolation,
    QarbError,
    RankDeficient,
    ShapeError,
    ValidationError,
    VersionError,
)
from .estimators import ConditionNumberPreselector, Differencer, EngleGranger
from .qcnc import CncConfig, qcnc
from .vtpa import VtpaConfig, query_ledger, vtpa

__version__ = "0.1.0"
