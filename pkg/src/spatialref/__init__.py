"""spatialref - resolve implicit spatial references in collaborative VR transcripts."""

__version__ = "0.1.0"
