"""
Qubit dynamics in a hierarchical lossy-cavity environment: non-Markovianity,
quantum speed limit and Omega-N phase diagrams.
"""

__version__ = "0.1.0"
