"""Character recognition from compressive-sensing measurements.

Character images are segmented and normalised (:mod:`csocr.imaging`),
projected with a random +/-1 matrix (:mod:`csocr.sensing`) and the
projections are classified by one-vs-one linear SVMs
(:mod:`csocr.classifier`).  :mod:`csocr.reconstruction` recovers signals
from the same measurements, and :mod:`csocr.evaluation` runs the repeated
hold-out experiments.
"""

__version__ = "0.1.0"
