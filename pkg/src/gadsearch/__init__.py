"""gadsearch: rank black-box classifier predictions by adversarial distance to
steer a labeling oracle toward high-confidence errors.
"""

__version__ = "0.1.0"
