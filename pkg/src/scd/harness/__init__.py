"""Experiment harness: datasets, metrics, runs and the command line."""
