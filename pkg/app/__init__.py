"""gbcheck - numerical checks of the local Gauss-Bonnet-Chern theorem."""

__version__ = "1.0.0"
