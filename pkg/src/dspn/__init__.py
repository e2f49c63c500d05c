"""dspn: distantly supervised pyramid network for unified sentiment analysis.

Given reviews labeled only with star ratings, jointly learns aspect-category
detection, aspect-category sentiment, and review rating prediction, and
exposes the full word -> aspect -> review pyramid of predictions at inference.
"""

__version__ = "0.1.0"
