"""Atom-optics Fermi accelerator: classical and quantum simulation toolkit."""
__version__ = "0.1.0"
