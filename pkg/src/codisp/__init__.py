"""Codispersion analysis under contamination."""
