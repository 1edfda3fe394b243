"""
Question specifications, transitions and experiment config schema.
"""
