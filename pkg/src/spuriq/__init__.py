"""Quantify dataset spuriousness as unique information via partial information decomposition."""

from spuriq.dist_core import (
    AbsoluteContinuityError,
    Alphabet,
    Channel,
    JointPMF3,
    PairPMF,
    compose_channels,
    conditional_mutual_information,
    entropy,
    joint_mutual_information,
    kl_divergence,
    marginalize,
    mutual_information,
)

__version__ = "0.1.0"
