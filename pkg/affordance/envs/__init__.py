from affordance.envs.base import Environment, FiniteModel
from affordance.envs.chain import ChainWorld
from affordance.envs.grid import GridWorld
from affordance.envs.lane import LaneWorld

__all__ = ['Environment', 'FiniteModel', 'ChainWorld', 'GridWorld', 'LaneWorld']
