"""Streaming multivariate anomaly detection (RAID)."""

from ._core import (
    CdfEstimate,
    DetectionRecord,
    Detector,
    DetectorConfig,
    MultivariateMoments,
    UnivariateMoments,
    brent_root,
    mvn_log_cdf,
    normal_cdf,
    pdf,
    run_cli,
    score_run,
    synth_scenario,
    uni_cdf,
    uni_ppf,
)

__all__ = [
    "CdfEstimate",
    "DetectionRecord",
    "Detector",
    "DetectorConfig",
    "MultivariateMoments",
    "UnivariateMoments",
    "brent_root",
    "mvn_log_cdf",
    "normal_cdf",
    "pdf",
    "run_cli",
    "score_run",
    "synth_scenario",
    "uni_cdf",
    "uni_ppf",
]
