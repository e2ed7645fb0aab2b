# -*- coding: utf-8 -*-
"""
Error types shared by the verification modules
"""


class DetlabError(Exception):
    """Base class for every error raised by the library"""


class NotPSD(DetlabError):
    """A matrix expected in Sym+(n) has an eigenvalue below -tol"""


class OnSingularSet(DetlabError):
    """Evaluation requested on the singular set of a field"""


class InvalidExponent(DetlabError):
    """Exponent configuration outside the admissible range"""


class ConvexityMarginViolated(DetlabError):
    """Periodic potential cannot be rescaled to a positive Hessian margin"""


class NonFiniteSample(DetlabError):
    """An integrand returned NaN or inf at a quadrature node"""


class NotSingular(DetlabError):
    """Blow-up threshold requested for a function without a power singularity"""


class NegativeInput(DetlabError):
    """A quantity defined only for non-negative functions received negatives"""


class DivergenceUnavailable(DetlabError):
    """Field distance needs a divergence that neither field provides"""


class ConfigError(DetlabError):
    """Malformed run configuration"""
