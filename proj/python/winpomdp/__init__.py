"""Windowed latent-variable RL toolkit for tabular POMDPs."""

from ._winpomdp import *  # noqa: F401,F403
from ._winpomdp import __doc__  # noqa: F401

__version__ = "0.1.0"
