"""
Pydantic schemas for reports, certificates and problem files.
"""
