"""Geometry of multi-time optical media on the first-order jet space."""
