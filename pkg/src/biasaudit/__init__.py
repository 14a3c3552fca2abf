"""Group-fairness audit of facial-expression classifiers with LIME explanations."""

__version__ = "0.1.0"
