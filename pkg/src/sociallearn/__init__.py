"""Equilibria and Monte Carlo for costly observation in sequential social learning."""
