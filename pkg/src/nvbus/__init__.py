"""Dark-spin-chain coupling of NV-center registers: models, protocols and planners."""

__version__ = "0.1.0"
