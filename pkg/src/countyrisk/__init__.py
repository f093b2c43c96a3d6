"""County-level risk-perception indicators from ordinal survey data.

Pipeline stages: factor scoring, areal aggregation, neighbour graphs,
Moran's I, CAR smoothing, exposure covariates and Bayesian regression.
"""

__version__ = "0.1.0"
