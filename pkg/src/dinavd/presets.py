"""Named experiment configs, one per convergence result plus the beta sweep."""

from __future__ import annotations

import copy

from .errors import InvalidArgument

# tight tolerances keep exponentially small gaps resolved down to underflow
_TIGHT = {"rtol": 1e-10, "atol": 1e-300}

PRESETS = {
    "thm1-sharp-quadratic": {
        "result": "sharp rate O(t^(-2 alpha gamma/(gamma+2))) and explicit bound under growth + flatness",
        "config": {
            "name": "thm1-sharp-quadratic",
            "objective": {"name": "quadratic", "dim": 2, "mu": 1.0},
            "dynamics": {"variant": "DIN_AVD", "alpha": 4.0, "beta": 0.5, "t0": 1.0,
                         "t_end": 1e4, "x0": [1.0, 1.0], "sampling": {"log_spaced": 400},
                         **_TIGHT},
            "analysis": {"gamma": 2.0,
                         "claims": ["sharp_rate", "sharp_bound", "gradient_integrable",
                                    "energy_monotone", "sharp_certificates", "jensen"]},
        },
    },
    "thm1-critical-quadratic": {
        "result": "critical case alpha = 1 + 2/gamma: O(1/t^2) bound",
        "config": {
            "name": "thm1-critical-quadratic",
            "objective": {"name": "quadratic", "dim": 2, "mu": 1.0},
            "dynamics": {"variant": "DIN_AVD", "alpha": 2.0, "beta": 1.0, "t0": 1.0,
                         "t_end": 500.0, "x0": [1.0, 1.0], "sampling": {"log_spaced": 400},
                         **_TIGHT},
            "analysis": {"gamma": 2.0, "claims": ["critical_bound", "energy_monotone"]},
        },
    },
    "thm2-sharp-quadratic": {
        "result": "improved o(t^-(alpha-eps)) rate and averaged/inf O(t^-(alpha+1-eps)) rates under quadratic growth",
        "config": {
            "name": "thm2-sharp-quadratic",
            "objective": {"name": "quadratic", "dim": 2, "mu": 0.01},
            "dynamics": {"variant": "DIN_AVD", "alpha": 3.0, "beta": 1.0, "t0": 1.0,
                         "t_end": 1e4, "x0": [1.0, 1.0], "sampling": {"log_spaced": 400},
                         **_TIGHT},
            "analysis": {"epsilon": [0.1, 0.5],
                         "claims": ["improved_rate", "averaged_rate", "energy_monotone", "jensen"]},
        },
    },
    "thm3-flat-power4": {
        "result": "flat rate O(t^(-2 gamma1/(gamma1-2))) and windowed-inf rate for F = |x|^4",
        "config": {
            "name": "thm3-flat-power4",
            "objective": {"name": "power_norm", "dim": 2, "gamma": 4.0, "mu": 0.5},
            "dynamics": {"variant": "DIN_AVD", "alpha": 3.0, "beta": 1.0, "t0": 1.0,
                         "t_end": 1e4, "x0": [1.0, -0.5], "sampling": {"log_spaced": 2000},
                         **_TIGHT},
            "analysis": {"gamma1": 4.0, "gamma2": 4.0, "mu": 0.5, "fit_decades": 2.0,
                         "claims": ["flat_rate", "flat_inf_rate", "flat_certificates",
                                    "energy_monotone", "jensen"]},
        },
    },
    "igahd-least-squares": {
        "result": "IGAHD O(1/k^2) rate and summable k^2 |grad F|^2 on N = 50 least squares",
        "config": {
            "name": "igahd-least-squares",
            "objective": {"name": "least_squares", "n": 50, "seed": 0},
            "scheme": {"name": "igahd", "alpha": 3.0, "units": "lipschitz", "s": 1.0,
                       "beta": "sqrt_s", "max_iter": 5000, "x0": {"seed": 1}},
            "analysis": {"claims": ["igahd_rate", "gradient_summable"]},
        },
    },
    "igahd-beta-damping": {
        "result": "oscillation damping: fewer local maxima of F(x_k) - F* as beta grows",
        "config": {
            "name": "igahd-beta-damping",
            "objective": {"name": "least_squares", "n": 50, "seed": 0},
            "scheme": {"name": "igahd", "alpha": 3.0, "units": "lipschitz", "s": 0.04,
                       "beta_list": [0.0, 1.0, 10.0], "max_iter": 5000, "x0": {"seed": 1}},
            "analysis": {"claims": ["oscillation_damping"]},
        },
    },
    "figure1-beta-sweep": {
        "result": "beta sweep {0, 1, 10, 100, 200}/sqrt(L) on N = 500 least squares at s = 1e-4/L",
        "config": {
            "name": "figure1-beta-sweep",
            "objective": {"name": "least_squares", "n": 500, "seed": 0},
            "scheme": {"name": "igahd", "alpha": 3.0, "units": "lipschitz", "s": 1e-4,
                       "beta_list": [0.0, 1.0, 10.0, 100.0, 200.0], "max_iter": 5000,
                       "x0": {"seed": 1}, "divergence_scan": True},
            "analysis": {"claims": []},
        },
    },
}


def preset_config(name):
    """Deep copy of the named preset's config."""
    if name not in PRESETS:
        raise InvalidArgument(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name]["config"])


def list_presets():
    """One line per preset: name and the result it reproduces."""
    width = max(map(len, PRESETS))
    return "\n".join(f"{n:<{width}}  {p['result']}" for n, p in PRESETS.items())
