"""U-statistic decomposition and bounds."""
