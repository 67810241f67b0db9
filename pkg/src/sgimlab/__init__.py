"""Goal-babbling laboratory for a simulated fishing arm.

A library plus CLI for studying how intrinsically motivated goal
exploration combines with social guidance (demonstrated policies and
demonstrated outcomes) on a redundant 25-parameter motor task. Ships a
calibrated surrogate environment, five learner strategies, three
demonstration builders, and an experiment harness with an acceptance
report.
"""

__version__ = "0.1.0"
