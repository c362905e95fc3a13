# src/config/settings.py


# Application Settings
APP_NAME = "groupfs"
VERSION = "1.0.0"
CHECKPOINT_SCHEMA_VERSION = 1

# Environment
OUTPUT_ROOT_ENV = "GROUPFS_OUTPUT_ROOT"
LOG_LEVEL_ENV = "GROUPFS_LOG_LEVEL"
DEFAULT_OUTPUT_ROOT = "runs"
DEFAULT_LOG_LEVEL = "INFO"


# Graph Config
KERNEL_NEIGHBORS = 7          # K in the self-tuning kernel
FEATURE_KERNEL_NEIGHBORS = 7  # K for the feature graph
DIFFUSION_STEPS = 2           # t
GAMMA_FLOOR_FACTOR = 1e-12    # gamma_i >= factor * median(gamma)
DEGREE_FLOOR = 1e-300
ZERO_NORM_TOL = 1e-12


# Grouping (Gumbel-Softmax)
P_MAIN = 0.7
START_TEMPERATURE = 10.0
MIN_TEMPERATURE = 1e-2


# Gates (STG)
GATE_SIGMA = 0.5
GATE_MU_INIT = 0.5


# Optimizer (Adam, framework defaults)
LEARNING_RATE = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


# Training
DEFAULT_EPOCHS = 500
DEFAULT_BATCH_SIZE = 100
DEFAULT_LAMBDA1 = 1.0
DEFAULT_LAMBDA2 = 6.2
AUTO_LAMBDA2_FRACTION = 0.5    # lambda2="auto": this share of the initial opening threshold
LAMBDA1_BALANCE_RATIO = 10.0  # warn when |L_s| and lambda1*L_f differ by more in the first epoch
DEFAULT_GROUPS = 12
LOG_EVERY_EPOCHS = 50


# Group-count heuristic
KMEANS_RESTARTS = 10
KMEANS_RESEED_ATTEMPTS = 10
KMEANS_MAX_ITER = 300


# Evaluation
EVAL_SEEDS = tuple(range(10))


# Gradient check
GRADCHECK_STEP = 1e-5
GRADCHECK_TOLERANCE = 1e-4
GRADCHECK_ABS_FLOOR = 1e-6
GRADCHECK_CLIP_MARGIN = 1e-3
GRADCHECK_SAMPLES = 30
GRADCHECK_FEATURES = 12
GRADCHECK_GROUPS = 4


# Synthetic two-moons
MOONS_SAMPLES = 1000
MOONS_FEATURES = 20
MOONS_RHO = 0.95
MOONS_NOISE_STD = 0.05
MOONS_BLOCK_SIZE = 5
