# PRIOR CONSTANTS

# normal priors on beta_t, lambda_t, phi_t, gamma, alpha
DEFAULT_PRIOR_MEAN = 0.0
DEFAULT_PRIOR_VARIANCE = 1e5

# inverse gamma priors on sigma_y^2, sigma_s0^2, sigma_s1^2
DEFAULT_IG_SHAPE = 1e-3
DEFAULT_IG_RATE = 1e-3

# flat prior interval for rho
DEFAULT_RHO_LOWER = 0.0
DEFAULT_RHO_UPPER = 0.95
# alternative interval that reduces boundary spikes
ALTERNATIVE_RHO_UPPER = 0.9

# CONSTRAINT CONSTANTS

# sigma_y^2 >= frac * min_t Var(Y | T=t)
DEFAULT_SIGMA_Y2_FLOOR_FRAC = 0.05
# sigma_y^2 >= factor * min_t Var(Y|S,T=t)^2 / Var(Y|T=t) under the dominant effect assumption
DOMINANT_FLOOR_FACTOR = 0.9
# starting magnitude for sign constrained coefficients that start at zero
SIGN_CONSTRAINT_START = 1e-6

# CHAIN CONSTANTS

DEFAULT_N_ITER = 25000
DEFAULT_BURN_IN = 5000
DEFAULT_THIN = 30
DEFAULT_SEED = 20250101

# random walk proposal sd for rho (reflected at the prior bounds)
DEFAULT_RHO_PROPOSAL_SD = 0.05
# random walk proposal sd for log sigma_st^2
DEFAULT_SIGMA_S_PROPOSAL_SD = 0.1

# binary chains
DEFAULT_BINARY_N_ITER = 8000
DEFAULT_BINARY_BURN_IN = 2000
DEFAULT_BINARY_THIN = 20
# grid resolution for the p11 update
DEFAULT_P11_GRID_POINTS = 512

# SAMPLER CONSTANTS

# one-sided truncation further than this many sd goes straight to the inverse cdf
TRUNC_NORMAL_TAIL_SD = 6.0
# proposals tried before a truncated sampler falls back to the inverse cdf
MAX_REJECTIONS = 64
# rejection sampling is only attempted when the truncation keeps at least this much mass
REJECTION_MIN_MASS = 0.25
# truncation mass below this is treated as an incompatible constraint
MIN_TRUNCATION_MASS = 1e-300

# IDENTIFICATION CONSTANTS

# sigma_y^2 grid used for PCE bands
DEFAULT_BAND_GRID = 10_000
# coarse sigma_y^2 grid of the brute force region oracle, refined by bisection at its edges
DEFAULT_ORACLE_GRID = 2_001
ORACLE_BISECTIONS = 60
# tolerance of the moment and assumption checks in the oracle
ORACLE_RTOL = 1e-8
# relative tolerance for algebraic identities
IDENTITY_RTOL = 1e-9

# HARNESS CONSTANTS

DEFAULT_N_REPLICATES = 50
CREDIBLE_LEVEL = 0.95
# a scenario aborts when more than this fraction of replicates fail
MAX_FAILURE_FRACTION = 0.2
# stream ids of chains are offset so they never collide with simulation streams
CHAIN_STREAM_OFFSET = 1_000_000
RHO_DENSITY_BINS = 60

RHO_IDENT_SAMPLE_SIZES = (300, 600, 1200)
RATE_STUDY_SAMPLE_SIZES = (300, 600, 1200, 2400, 4800)

# CLI CONSTANTS

THREADS_ENV_VAR = "PRINSTRAT_THREADS"

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_NUMERICAL_ERROR = 4
EXIT_GATE_FAILURE = 5

# SCENARIO CONSTANTS

TABLE1_SAMPLE_SIZE = 300
TABLE1_RHO = 0.75
TABLE1_REGIMES = ("none", "dominant", "same_sign_arm1")
RHO_IDENT_REGIMES = ("none", "zero_beta01", "two_constraints")
# principal ignorability holds in the truth; rho only enters through its prior
PI_SAMPLE_SIZE = 300
PI_REPLICATES = 4
PI_REGIMES = ("pi", "none")
RATE_STUDY_REPLICATES = 5
BINARY_SIGN_SAMPLE_SIZE = 5000
BINARY_P11_SAMPLE_SIZE = 10_000
BINARY_REGIMES = ("none", "sign_positive")

# GATE CONSTANTS

# printed reference values per regime, strata ordered by S(1)
TABLE1_REFERENCE_MEANS = {
    "none": (17.0, 34.0, 50.0),
    "dominant": (16.0, 34.0, 51.0),
    "same_sign_arm1": (23.0, 34.0, 45.0),
}
TABLE1_REFERENCE_WIDTHS = {
    "none": (43.0, 13.0, 43.0),
    "dominant": (25.0, 9.0, 25.0),
    "same_sign_arm1": (32.0, 12.0, 32.0),
}
GATE_MIN_ECR = 0.90
GATE_MEAN_TOL = 3.0
GATE_WIDTH_REL_TOL = 0.4
GATE_RHO_MEAN_RANGE = (0.65, 0.85)
GATE_RHO_MAX_SD_IDENTIFIED = 0.10
GATE_RHO_MIN_SD_UNCONSTRAINED = 0.15
GATE_SLOPE_RANGE = (-1.2, -0.8)
GATE_ASYMVAR_FACTOR = 2.0
GATE_BINARY_BETA_TOL = 0.15
GATE_BINARY_MIN_SIGN_MASS = 0.10
GATE_BINARY_P11_TOL = 0.07
