"""
Open ASEP Shock Duality Lab

Entry point for the command-line tool.
"""

from app.cli import cli

if __name__ == "__main__":
    cli()
