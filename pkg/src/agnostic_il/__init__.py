"""Interactive imitation learning on exactly analyzable environments."""

__version__ = "0.1.0"
