# affordance/utils/helpers.py
"""
Miscellaneous helper functions.
"""
import os

import pandas as pd

from affordance.constants import CSV_FLOAT_FORMAT, MODEL_EXTENSION
from affordance.utils.validators import validate_demon_name


def model_path(directory: str, demon: str) -> str:
    """Where the trained weights of `demon` live under `directory`"""
    return os.path.join(directory, f"{validate_demon_name(demon)}{MODEL_EXTENSION}")


def write_csv(frame: pd.DataFrame, path: str) -> str:
    """
    Write a result table: header row, no index, floats that round-trip
    exactly, '\\n' line endings.
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
    return path
