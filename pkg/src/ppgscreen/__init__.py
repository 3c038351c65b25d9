"""PPG heartbeat morphology pipeline for diabetes screening.

Raw fingertip PPG goes through low-pass filtering, sliding-window baseline
removal, beat segmentation and validation, per-beat morphological feature
extraction, and subject-grouped cross-validated classification with an
L1-penalized logistic regression and a gradient-boosted tree ensemble.
"""

__version__ = "0.1.0"
