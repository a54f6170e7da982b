"""posslib: maxitive (possibilistic) Bayesian inference.

Possibility functions on grids, maxitive posteriors and consistency bounds,
possibilistic exponential families with their conjugate updates, and
optimisation of the lower consistency bound within a conjugate family.
"""

from .bounds import (
    CboReport,
    LossOnGrid,
    cbo_report,
    d_max,
    log_z_max,
    lower_cbo,
    maxitive_posterior,
    sandwich_objective,
    upper_cbo,
)
from .core import (
    DiscretePossibility,
    Grid,
    JointDiscretePossibility,
    ModeSet,
    SmoothPossibility,
    condition,
    join,
    leq,
    marginalize,
    normal_possibility,
    normalize_max,
    poss_expectation,
    precision_at_mode,
    transform_mode,
)
from .expfam import (
    ConjugateMember,
    ExpFamilySpec,
    conjugate_update,
    make_bernoulli_style,
    make_binomial,
    make_normal_known_var,
    make_poisson_style,
)
from .varopt import RegularisedLoss, StepConfig, run

__version__ = "0.1.0"
