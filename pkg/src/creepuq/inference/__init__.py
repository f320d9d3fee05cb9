from .hmc import LogDensityTarget, PosteriorSamples, SamplerError, leapfrog, nuts_sample
from .predict import posterior_predict
from .vi import MeanFieldPosterior, elbo, gaussian_kl, vi_fit

__all__ = [
    "LogDensityTarget",
    "MeanFieldPosterior",
    "PosteriorSamples",
    "SamplerError",
    "elbo",
    "gaussian_kl",
    "leapfrog",
    "nuts_sample",
    "posterior_predict",
    "vi_fit",
]
