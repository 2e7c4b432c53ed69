"""Demand-aware tariff and contract optimization for electricity retailers.

The package covers the full pipeline: half-hourly meter data ingestion,
price-sensitive demand regression, sampling of the price coefficient,
scenario generation and reduction, and a risk-averse two-stage stochastic
program that picks a time-of-use tariff together with a forward contract
and a PPA position.
"""

__version__ = "0.1.0"
