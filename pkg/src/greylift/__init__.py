"""greylift: generalized grey Brownian motion -- special functions, exact and
lifted path generators, grey Ornstein-Uhlenbeck laws, and Monte Carlo
verification."""

from .model import (GreyError, ParameterError, AccuracyError, NumericalRankError,
                    EmbeddingError, QueryError, DegenerateLawError,
                    GreyParams, TimeGrid, PathEnsemble, RngStream,
                    validate_params, save_ensemble, load_ensemble)
from .specfun import (SeriesPolicy, DEFAULT_POLICY, mittag_leffler,
                      gen_mittag_leffler, m_wright, m_wright_2var, m_wright_d)
from .sampling import (StableSamplerConfig, make_stream, sample_gaussian,
                       sample_stable, sample_y_beta, y_beta_moment)
from .fbm_exact import (CovarianceMatrix, fbm_kernel, fbm_covariance,
                        fbm_cholesky, fbm_circulant, fbm_mvn, mvn_sigma2,
                        mvn_discrete_variance)
from .markov_lift import (LiftNodes, OUBank, build_nodes, default_node_config,
                          kernel_approx, lift_covariance, LiftCovariance,
                          simulate_bank, truncation_bound)
from .greyproc import (GgbmLawQuery, GreyOUQuery, f_norm_sq, g_norm_sq,
                       ggbm_char, ggbm_density, ggbm_paths, grey_ou_char,
                       grey_ou_density, grey_ou_paths)
from .verify import (McEstimate, Probe, LawReport, empirical_char,
                     empirical_cov, integrability_value, run_law_suite)

__version__ = "0.1.0"
