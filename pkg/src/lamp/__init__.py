"""Poisson versus self-exciting point processes.

Simulation of Poisson, Hawkes and driven (dependent) point processes, the
locally asymptotically uniformly most powerful tests against self-exciting
alternatives, and a Monte-Carlo harness for their size, power and finite-T
thresholds.
"""

__version__ = "0.1.0"
