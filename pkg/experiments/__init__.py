"""Seeded Monte Carlo campaigns and concentration checks."""
