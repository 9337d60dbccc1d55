"""Fixed block-length joint source-channel coding for 2-user interference
channels: probability primitives, the random-coding exponent, the worked
two-source example, sufficient-condition checkers, the layered codec, and
a Monte Carlo harness."""

from . import bounds, codec, dueck, exponent, probkit, simulate

__all__ = ["bounds", "codec", "dueck", "exponent", "probkit", "simulate"]
__version__ = "0.1.0"
