"""Alternative clustering with kernel dimension reduction, solved by an
iterative spectral method on the Stiefel manifold."""

__version__ = "0.1.0"
