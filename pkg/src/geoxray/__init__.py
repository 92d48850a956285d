"""Attenuated geodesic X-ray transforms with matrix weights on simple disks."""

__version__ = "0.1.0"
