"""Benchmark data pipeline: parsing, NaN repair, segmentation, splits, metrics."""
