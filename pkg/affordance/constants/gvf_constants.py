"""
Defaults and fixed conventions for environments, learners and controllers.
"""

# ChainWorld
CHAIN_ACTIONS = ['left', 'right']
CHAIN_LEFT, CHAIN_RIGHT = 0, 1

# GridWorld
GRID_ACTIONS = ['up', 'down', 'left', 'right']
GRID_MOVES = {
    0: (-1, 0),
    1: (1, 0),
    2: (0, -1),
    3: (0, 1),
}

# LaneWorld
LANE_ACTIONS = ['steer-', 'steer0', 'steer+']
LANE_LIMIT = 1.2
LANE_EDGE = 1.0
LANE_STEER_STEP = 0.05
LANE_DEFAULT_SIGMA = 0.01
LANE_DEFAULT_HORIZON = 1000
# Stand-in horizons for the multi-timescale lane predictions
LANE_DEMO_GAMMAS = [0.5, 0.8, 0.9, 0.95]

# Learners
DEFAULT_STEP_SIZE = 0.1
DEFAULT_BUFFER_CAPACITY = 10_000
DEFAULT_MINIBATCH_SIZE = 32

# Affordance control
DEFAULT_SUCCESS_THRESHOLD = 0.8
DEFAULT_FIND_GAMMA = 0.9
DEFAULT_SUCCESS_SIGNAL = 'success'

# PSR agent and Markov diagnostic
DEFAULT_PSR_BINS = 10
MARKOV_MIN_SUPPORT = 30
MARKOV_NOISE_THRESHOLD = 0.1

# RunLog column order; probe columns are inserted after `demon`
RUN_LOG_LEADING_COLUMNS = ['step', 'demon']
RUN_LOG_TRAILING_COLUMNS = ['delta', 'rho', 'rho_bar', 'ude', 'episode', 'cumulant_observed']
