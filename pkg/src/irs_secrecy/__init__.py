"""Joint precoding and IRS phase tuning for weighted secrecy sum-rate maximization."""

__version__ = "0.1.0"
