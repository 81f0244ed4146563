"""Discrete-time simulator for atomic swaps, swaptions and their channel routing."""
from .chainsim import COIN, World, coins, format_amount
from .terms import InvalidTerms, SwapTerms, SwaptionTerms

__version__ = "0.1.0"
