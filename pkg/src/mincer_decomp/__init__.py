"""Between/within decomposition of the effect of schooling on wage inequality."""
from .decomposition import (DecompositionResult, MomentSet, closed_form_simple, compute_moments,
                            decompose, inequality_level, shift_derivatives)
from .errors import ConvergenceError, DataError, NumericalError, RankDeficientError
from .estimators import (GammaCovariance, MeanFit, QuantileGrid, QuantileProfile, estimate_omega,
                         fit_ols, fit_profile, fit_quantile)
from .model_frame import (CovariateSpec, DesignMatrix, ObservationTable, build_design,
                          load_table, shift_education, write_table)
from .pipeline import PipelineResult, estimate, estimate_design

__version__ = "0.1.0"
