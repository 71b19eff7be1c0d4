"""Random autoregressive neural quantum states.

Specs are plain dicts (the JSON schema of the command-line configs); they are
validated and completed with defaults on every call.
"""

import json

from . import _core
from ._core import (
    ConfigError,
    Error,
    ParameterSet,
    appendix_b_report as _appendix_b_report,
    exact_ground_energy,
    gap_ratios,
    logit_normal_cdf,
    logit_normal_pdf,
    mass_outside_eps,
    reference_mean_r_min,
)

__version__ = _core.__version__


def _text(spec):
    return spec if isinstance(spec, str) else json.dumps(spec)


def canonical_spec(spec):
    return json.loads(_core.canonical_spec(_text(spec)))


def init_gaussian(spec, sigma, seed):
    return _core.init_gaussian(_text(spec), sigma, seed)


def init_xavier_glorot(spec, seed):
    return _core.init_xavier_glorot(_text(spec), seed)


def state_vector(spec, params):
    return _core.state_vector(_text(spec), params)


def conditionals(spec, params, spins):
    return _core.conditionals(_text(spec), params, list(spins))


def sample(spec, params, n_samples, seed):
    return _core.sample(_text(spec), params, n_samples, seed)


def renyi2_exact(spec, params):
    return _core.renyi2_exact(_text(spec), params)


def renyi2_swap(spec, params, n_samples, seed, n_batches=50):
    return _core.renyi2_swap(_text(spec), params, n_samples, seed, n_batches)


def entanglement_spectrum(spec, params, cutoff=1e-10):
    return _core.entanglement_spectrum(_text(spec), params, cutoff)


def entropy_grid(spec, arch_axis, sigma_axis, n_init, seed, estimator="exact", n_samples=100000, workers=1):
    return _core.entropy_grid(_text(spec), list(arch_axis), list(sigma_axis), n_init, seed, estimator, n_samples,
                              workers)


def exact_energy(spec, params, kind, J=1.0, h=1.0):
    return _core.exact_energy(_text(spec), params, kind, J, h)


def exact_energy_gradient(spec, params, kind, J=1.0, h=1.0):
    return _core.exact_energy_gradient(_text(spec), params, kind, J, h)


def vmc_optimize(spec, params, kind, **kwargs):
    return _core.vmc_optimize(_text(spec), params, kind, **kwargs)


def appendix_b_report(seed=0, workers=1):
    return json.loads(_appendix_b_report(seed, workers))


def parse_config(config):
    return json.loads(_core.parse_config(_text(config)))


def execute(config, workers=1):
    """Runs a study; returns (exit_code, summary, files)."""
    return _core.execute(_text(config), workers)
