"""
Subcommands of the duality-lab command-line tool.
"""

from app.cli.commands.evolve import evolve, propagator
from app.cli.commands.invariant import invariant
from app.cli.commands.manifold import check_manifold
from app.cli.commands.simulate import simulate
from app.cli.commands.spectrum import spectrum, xxz
from app.cli.commands.verify import verify

COMMANDS = [check_manifold, verify, evolve, propagator, invariant, spectrum, xxz, simulate]

__all__ = [
    "COMMANDS",
    "check_manifold",
    "evolve",
    "invariant",
    "propagator",
    "simulate",
    "spectrum",
    "verify",
    "xxz",
]
