from .adf import AdfReport, adf_design, adf_test, difference
from .cointegration import (
    CointegrationResult,
    ProbeReport,
    ProbeRun,
    engle_granger,
    error_propagation_probe,
)
from .critical import calibrate, df_critical_values, packaged_table, read_table, simulate_df_tau, write_table
from .regression import QlrContract, RegressionFit, ols_fit, qlr_fit

__all__ = [
    "AdfReport", "CointegrationResult", "ProbeReport", "ProbeRun", "QlrContract", "RegressionFit",
    "adf_design", "adf_test", "calibrate", "df_critical_values", "difference", "engle_granger",
    "error_propagation_probe", "ols_fit", "packaged_table", "qlr_fit", "read_table", "simulate_df_tau", "write_table",
]
