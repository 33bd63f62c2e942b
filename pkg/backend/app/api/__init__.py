"""
HTTP surface of regkit.
"""
