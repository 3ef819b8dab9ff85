"""Shared plumbing for linear algebra, seeding, settings and persistence."""
