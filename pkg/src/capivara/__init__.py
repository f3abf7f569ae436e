"""Capivara: a decentralized package-repository blockchain, simulated.

Packages live in a hash-chained ledger; distributions ("trails") vouch for
them, confirmed downloads drive trail popularity, and the next block's
forger is drawn from members of the four most popular trails.
"""

__version__ = "0.1.0"
