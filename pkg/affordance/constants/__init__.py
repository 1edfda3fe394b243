import os

# Get the absolute path to the repository root
BASE_DIR = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
DATA_DIR = os.path.join(BASE_DIR, 'data')
FIXTURES_DIR = os.path.join(DATA_DIR, 'fixtures')

# Numerical tolerances shared by policies, models and the oracle
PROBABILITY_TOLERANCE = 1e-12
RESIDUAL_TOLERANCE = 1e-9

# Model file format
MODEL_FORMAT_VERSION = 1
MODEL_MAGIC = b'GVFMODEL'

# Experiment config schema
CONFIG_SCHEMA_VERSION = 1
MODEL_EXTENSION = '.gvfmodel'

# Result tables
CSV_FLOAT_FORMAT = '%.17g'
