"""Fundus image enhancement, a from-scratch CNN and DR grading metrics."""

__version__ = "0.1.0"
