"""Small covering experiment plans and the statistics to analyse their scores."""
__version__ = "0.1.0"
