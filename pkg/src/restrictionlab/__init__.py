"""restrictionlab: numerical laboratory for conformal restriction measures.

Subpackages
-----------
exponents   exact intersection-exponent algebra and parameter conversions
conformal   closed-form conformal map primitives and composable map chains
loewner     chordal/radial Loewner flows, traces, capacities, zipper
sle         SLE_kappa and SLE_kappa(rho) driving/trace samplers
brownian    Brownian kernels, excursions, excursion measure, loops
verify      Monte Carlo estimators, martingale checks, restriction builds
cli         batch experiment runner
"""

__version__ = "0.1.0"
