"""Baseline robust aggregators used for comparison with FedSECA."""

from fedseca.baselines.clipping import (
    CClip,
    CCRandBucket,
    CCSeqBucket,
    cc_rand_bucket,
    cc_seq_bucket,
    centered_clip,
)
from fedseca.baselines.copod import CopodDos, copod_dos, copod_scores
from fedseca.baselines.fldetector import FLDetector
from fedseca.baselines.simple import (
    CWMedian,
    CWTrimmedMean,
    FedAvg,
    Krum,
    cw_median,
    cw_trimmed_mean,
    fedavg,
    krum,
)
from fedseca.baselines.ties import RTiesMerge, ties_merge_robust
from fedseca.baselines.weiszfeld import HuberLoss, RFA, huber_weiszfeld, rfa_geomedian

__all__ = [
    "CClip",
    "CCRandBucket",
    "CCSeqBucket",
    "CWMedian",
    "CWTrimmedMean",
    "CopodDos",
    "FLDetector",
    "FedAvg",
    "HuberLoss",
    "Krum",
    "RFA",
    "RTiesMerge",
    "cc_rand_bucket",
    "cc_seq_bucket",
    "centered_clip",
    "copod_dos",
    "copod_scores",
    "cw_median",
    "cw_trimmed_mean",
    "fedavg",
    "huber_weiszfeld",
    "krum",
    "rfa_geomedian",
    "ties_merge_robust",
]
