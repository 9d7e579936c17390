"""File formats, synthetic scenes and dataset-level drivers."""
