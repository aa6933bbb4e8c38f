"""cdkit: confidence distribution inference toolkit.

The submodules carry the full API; the names re-exported here cover the
everyday workflow of building a confidence distribution, reading estimates
and intervals off it, and checking how well it is calibrated.
"""

from cdkit.cd_core import (
    ConfidenceDistribution,
    cd_density,
    cd_eval,
    cd_quantile,
    central_interval,
    grid_cd,
    load_cd_csv,
    location_scale_cd,
    sample_cd,
    save_cd_csv,
    transform_cd,
)
from cdkit.constructors import (
    DataSample,
    PairedSample,
    exponential_rate_cd,
    fisher_z_corr_cd,
    normal_mean_cd,
    normal_variance_cd,
)
from cdkit.inference import (
    NullRegion,
    SupportReport,
    cd_mean,
    cd_median,
    cd_mode,
    support_report,
)
from cdkit.simlab import CdGenerator, calibrate, coverage, ks_uniform

__version__ = "0.1.0"

__all__ = [
    "CdGenerator",
    "ConfidenceDistribution",
    "DataSample",
    "NullRegion",
    "PairedSample",
    "SupportReport",
    "calibrate",
    "cd_density",
    "cd_eval",
    "cd_mean",
    "cd_median",
    "cd_mode",
    "cd_quantile",
    "central_interval",
    "coverage",
    "exponential_rate_cd",
    "fisher_z_corr_cd",
    "grid_cd",
    "ks_uniform",
    "load_cd_csv",
    "location_scale_cd",
    "normal_mean_cd",
    "normal_variance_cd",
    "sample_cd",
    "save_cd_csv",
    "support_report",
    "transform_cd",
]
