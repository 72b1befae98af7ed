"""Binary search trees of permuton samples: simulation and verification."""
__version__ = "0.1.0"
