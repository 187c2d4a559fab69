"""Dynamic-behavior malware analytics: sandbox log parsing, features,
boosted-tree detection, family clustering and generative coverage."""

__version__ = "0.1.0"
