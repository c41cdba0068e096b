"""Experiment harness: runs, metrics, sweeps, reports and oracle verification."""
