"""Experiment orchestration: configuration, persistence, CLI, verify suite."""
