# affordance/__init__.py
"""
Predictive knowledge with general value functions: GVF/GAVF questions,
exact evaluation, on- and off-policy learning, hordes of demons and the
control schemes that act on their predictions.
"""
__version__ = '0.1.0'
