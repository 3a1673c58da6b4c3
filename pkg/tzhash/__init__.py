# Transductive zero-shot hashing
__version__ = "1.0.0"
