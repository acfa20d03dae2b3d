"""contrastlab: a numerical laboratory for contrastive-learning geometry.

Implements the empirical InfoNCE family and its deterministic large-batch
energies, the intrinsic free-energy functionals with their Gibbs
equilibria on grids, a particle surrogate on the sphere, and the
diagnostics that measure the population-level gap between two trained
modalities. See README.md for the experiment runners.
"""

__version__ = "0.1.0"
