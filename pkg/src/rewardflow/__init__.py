"""Multi-reward conditioned flow matching on 2D synthetic data.

Pipeline: generate a conditional point dataset, score it with an analytic
four-reward suite, bin the scores into equal-population quantile bins, train
a reward-conditioned velocity field, and sample with reward-space
classifier-free guidance (isolation, pairwise trade-offs, best-of-N).
"""

__version__ = "0.1.0"
