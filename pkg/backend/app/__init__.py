"""
regkit: numerical verification of constraint qualifications, R-regularity
and partial calmness for parametric and bilevel programs.
"""

__version__ = "1.0.0"
