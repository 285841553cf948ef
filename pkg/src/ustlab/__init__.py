"""ustlab: a simulation laboratory for the four-dimensional uniform spanning
tree, loop-erased random walk, random interlacements, and the Abelian
sandpile, built around exact structural identities and reproducible
Monte Carlo scaling experiments."""

from .rng import RngStream, hash64

__version__ = "0.1.0"

__all__ = ["RngStream", "hash64", "__version__"]
