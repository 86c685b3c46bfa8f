"""
qnd-runner - Simulador da interação QND N-partida mediada por duas ancilas
"""

__version__ = "0.1.0"
