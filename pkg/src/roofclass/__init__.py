"""Roof type and material classification from aerial RGB and LiDAR height rasters."""

__version__ = "0.1.0"
