"""Detection of lexicon-based fake trend attacks and the bots behind them."""

__version__ = "0.1.0"
