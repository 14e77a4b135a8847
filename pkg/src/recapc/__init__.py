"""Planning toolkit for recommendation under aggregated user-type preferences
with churn."""

__version__ = "0.1.0"
