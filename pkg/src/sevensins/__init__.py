"""Mean-variance portfolio toolkit with side-by-side demonstrations of common modelling mistakes.

Modules
-------
linalg        symmetric eigendecomposition, Cholesky and SPD solves
covariance    estimation, diagnosis, exploit construction and repair
models        problem types, validation and the transaction-cost lifting
analytic      closed-form optima and Sharpe ratio utilities
conic_solver  log-barrier interior-point solver with phase-one detection
annealing     simulated-annealing baseline and solver comparison
backtest      rolling-window rebalancing with costs
cli           the ``sevensins`` command
"""

__version__ = "0.1.0"
