"""figrender: renders contrastlab experiment CSVs into figures.

Consumes only the CSV files a completed run directory contains; never
recomputes a metric. Seven figure kinds: gap_curve, polar_grid,
joint_grid, delta_grid, concentration, sphere_overlay, grad_consistency.
"""

__version__ = "0.1.0"
