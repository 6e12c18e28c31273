"""Disjoint and sliding blocks estimators of the extremal index."""
from .asymptotics import (AsymptoticParams, BiasPair, OptimalAlpha, asymptotic_bias,
                          bias_corrected, confidence_interval, optimal_alpha, optimal_tau,
                          sigma_matrix, v_matrix, variance_fn)
from .blocks import (BlockConfig, BlockStats, ThetaEstimate, TimeSeries, block_maxima,
                     block_stats, c2_hat, fhat, intervals_estimator, select_threshold,
                     sliding_excess_variance, tau_hat, theta_hat, window_exceedance_counts)
from .errors import (DegenerateThresholdError, ExtremalIndexError, InsufficientDataError,
                     InsufficientExceedancesError, InvalidConfigError)
from .processes import (ClusterTheory, ProcessSpec, cluster_theory, simulate,
                        theoretical_Fr, theoretical_theta_r)

__version__ = "0.1.0"
