"""Energy and flexible-ramping co-optimization with regulated forecast-based dispatch."""
