"""Main source package for lagmesh."""
__version__ = '1.0.0'
