"""Numerical core: action, series, critical points, thimbles, quadrature, asymptotics, monodromy."""
