"""
Default settings for rwenas.

Every value here can be overridden from a run config file (see ``rwenas.config``).
"""

PROJECT_NAME = 'rwenas'

# Search spaces
MICRO_NODES = 4             # intermediate nodes per cell
MICRO_OPS = 8               # size of the operation set
MACRO_PHASES = 3
MACRO_NODES = 6             # operation nodes per phase

# Network scale during search
MICRO_INIT_CHANNELS = 10
MICRO_LAYERS = 5
MACRO_INIT_CHANNELS = 32
INPUT_RESOLUTION = 32       # native CIFAR-10 resolution
NUM_CLASSES = 10
OP_ORDER = 'relu_conv_bn'   # or 'conv_bn_relu'

# Tensor engine
BN_EPS = 1e-5
INIT_SCHEME = 'pytorch_default'

# Linear probe training
RWE_EPOCHS = 30
RWE_BATCH_SIZE = 512
RWE_LR = 0.25
RWE_MOMENTUM = 0.9
RWE_FOLDS = 5
RWE_NORM_BATCH = 512        # rows per forward pass, fixes normalization statistics
RWE_LOADER_BATCH = 128
RWE_STANDARDIZE_FEATURES = True

# Reference training (fully trained networks for correlation checks)
ORACLE_NETWORKS = 20
ORACLE_EPOCHS = 15
ORACLE_BATCH_SIZE = 64
ORACLE_LR = 0.05
ORACLE_MOMENTUM = 0.9
ORACLE_WEIGHT_DECAY = 3e-4
ORACLE_GRAD_CLIP = 5.0

# NSGA-II
POP_SIZE = 20
MAX_GEN = 30
CROSSOVER_PROB = 0.9
MUTATION_ETA = 20.0
FAILED_RWE_ERROR = 1.0
FAILED_FLOPS_M = 1e6        # worst-case complexity assigned to failed evaluations

# Dataset
VALID_FRACTION = 0.2
SYNTH_CLASSES = 4
SYNTH_SIZE = 10_000
CIFAR10_URL = 'https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz'
DOWNLOAD_CHUNK_SIZE = 1024 * 1024
DOWNLOAD_TIMEOUT = 60

# Correlation ablation
ABLATION_GENERATIONS = 20
ABLATION_TRIALS = 5
ABLATION_ESTIMATORS = ['rwe', 'neg_flops', 'neg_params']

# Output files
OUTPUT_DIR = './runs'
CONFIG_FILE = 'config.json'
GENERATION_LOG_FILE = 'generations.jsonl'
EVALUATION_LOG_FILE = 'evaluations.jsonl'
FRONT_FILE = 'front.csv'
TRACE_FILE = 'trace.csv'
ORACLE_FILE = 'oracle.csv'

# CLI
LOG_LEVEL = 'WARNING'       # reduce log noise in CLI mode
WORKERS = 1
