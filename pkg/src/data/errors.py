"""
Data Errors for RecNet

Shared by every module of the data pipeline.
"""


class DataError(Exception):
    """Raised when captions, features or dataset files are unusable."""
    pass
