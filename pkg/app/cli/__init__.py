"""
Command-line surface of the lab.
"""

from app.cli.main import cli

__all__ = ["cli"]
