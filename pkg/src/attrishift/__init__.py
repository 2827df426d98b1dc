"""Explanation-distribution based model monitoring and fairness auditing."""

__version__ = "0.1.0"
