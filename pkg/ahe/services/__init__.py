"""Numerical services: grid types, lifts, solvers, fills, pipelines and the benchmark harness."""
