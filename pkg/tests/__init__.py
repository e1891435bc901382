"""Test package for spatialref."""
