# affordance/services/__init__.py
"""
Experiment assembly and orchestration behind the CLI.
"""
