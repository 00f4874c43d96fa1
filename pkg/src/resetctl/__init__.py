"""Simulation and analysis of reset control systems under sensor quantization."""

from .describing import df_oracle, sidf, sidf_band, theta_rho
from .elements import (TABLE1_PARAMS, TABLE3_PARAMS, CgLpPidParams, ResetCondition,
                       ResetController, base_linear, make_cglp, make_cglp_pid, make_clegg,
                       make_fore, make_sore, with_band)
from .errors import (ConfigError, DimensionError, DivergenceError, DomainError,
                     GuaranteeVoidError, InvalidContextError, OracleUnsettledError,
                     ResetCtlError, SingularityError, UnsupportedTopologyError)
from .lti import (DiscreteStateSpace, StateSpace, c2d_tustin, c2d_zoh, freq_response,
                  mat_exp, series)
from .simulation import (NO_NOISE, NO_QUANTIZER, NoiseSpec, Quantizer, ReferenceSignal,
                         SimConfig, quantize, sigma_sensitivity, simulate)
from .stability import check_certificate, closed_loop_A, hbeta_response, search_hbeta
from .tuning import (DeltaTuningSpec, bls_sensitivity, error_from_disturbance, tune_delta,
                     verify_no_reset)

__version__ = "0.1.0"
