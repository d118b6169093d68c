"""Technical-indicator price forecasting with elastic net, random forest, linear SVR and stacking."""

__version__ = "0.1.0"
