"""Exact moderate and large deviation toolkit for linear random fields."""

__version__ = "0.1.0"

from .errors import (ConfigError, DegenerateField, EmptyKernelSupport, InvalidRegime, LRFError,
                     NegativeWeight, NonintegrableMoment, NumericDomainError, TooManyAtoms, WindowOverflow)
from .slowly_varying import KaramataReport, SlowlyVaryingFn, karamata_check
from .field import (AngularProfile, FiniteSupport, IndexRegion, LongRangeIsotropic, ShortRange, WeightAggregates,
                    WeightTable, aggregates, build_weights, rho_bounds)
from .innovations import (DiscreteCentered, Gaussian, ParetoHybrid, Rademacher, RngStream, TailDescriptor,
                          UniformCentered, sample, student_like, survival, truncated_moment)
from .montecarlo import TailEstimate, enumerate_tail, lil_replication, simulate_tail
from .deviations import (DeviationPrediction, fuk_nagaev_bound, large_prediction, moderate_prediction,
                         normal_cdf, normal_tail, normal_tail_bounds, uniform_prediction, validity_ranges)
from .regression import RegressionDesign, lil_envelope, regression_weights, smoother_weight_table
from .davis_gut import DavisGutSpec, davis_gut_classify, davis_gut_term, psi, psi_first_exceed, series_partial
