"""Discounted LQR stability certificates, gain synthesis and policy iteration."""

from ._dlqr import *  # noqa: F401,F403
from ._dlqr import __doc__  # noqa: F401

__version__ = "0.1.0"
