"""Constrained particular solutions of Fredholm-like equations x = A x + phi."""
