"""Built-in scenarios reproducing the reference figures at desk scale."""

BUILTIN_SCENARIOS = {
    "fig2": {
        "name": "fig2",
        "M": 3,
        "N": 3,
        "J": 1.0,
        "U": 0.0,
        "boundary": "open",
        "kappa": 100.0,
        "C_re": 1.0,
        "C_im": 0.0,
        "pattern": "middle_site",
        "N0_K": 1.0,
        "initial_state": [2, 1, 0],
        "engines": ["nonhermitian", "ensemble"],
        "numerics": {
            "dt": 5.0e-4,
            "t_final": 100.0,
            "n_traj": 1000,
            "base_seed": 20160614,
            "sample_points": 201,
        },
    },
    "fig3": {
        "name": "fig3",
        "M": 8,
        "N": 8,
        "J": 1.0,
        "U": 0.0,
        "boundary": "periodic",
        "kappa": 100.0,
        "C_re": 1.0,
        "C_im": 0.0,
        "pattern": "even_sites",
        "N0_K": 4.0,
        "initial_state": [1, 1, 1, 1, 1, 1, 1, 1],
        "engines": ["trajectory"],
        "numerics": {
            "dt": 5.0e-4,
            "t_final": 100.0,
            "base_seed": 20160614,
            "sample_points": 201,
        },
    },
    "fig2_lindblad": {
        "name": "fig2_lindblad",
        "M": 3,
        "N": 3,
        "J": 1.0,
        "U": 0.0,
        "boundary": "open",
        "kappa": 100.0,
        "C_re": 1.0,
        "C_im": 0.0,
        "pattern": "middle_site",
        "N0_K": 1.0,
        "initial_state": [2, 1, 0],
        "engines": ["lindblad"],
        "numerics": {"dt": 5.0e-4, "t_final": 20.0, "sample_points": 101},
    },
    "fig2_raman": {
        "name": "fig2_raman",
        "M": 3,
        "N": 3,
        "J": 1.0,
        "U": 0.0,
        "boundary": "open",
        "kappa": 100.0,
        "C_re": 1.0,
        "C_im": 0.0,
        "pattern": "middle_site",
        "N0_K": 1.0,
        "initial_state": [2, 1, 0],
        "engines": ["raman"],
        "numerics": {"dt": 5.0e-4, "t_final": 100.0, "sample_points": 201},
    },
    "darkstate_m4": {
        "name": "darkstate_m4",
        "M": 4,
        "N": 2,
        "J": 1.0,
        "U": 0.0,
        "boundary": "periodic",
        "kappa": 100.0,
        "C_re": 1.0,
        "C_im": 0.0,
        "pattern": "even_sites",
        "N0_K": 1.0,
        "engines": ["steady_state"],
        "numerics": {"dt": 5.0e-4, "t_final": 1.0, "sample_points": 2},
        "steady_state": {"delta_N": 0, "coefficients": "uniform"},
    },
    "fig2_infer": {
        "name": "fig2_infer",
        "M": 3,
        "N": 3,
        "J": 1.0,
        "U": 0.0,
        "boundary": "open",
        "kappa": 100.0,
        "C_re": 1.0,
        "C_im": 0.0,
        "pattern": "middle_site",
        "N0_K": 1.0,
        "engines": ["infer"],
        "numerics": {"dt": 5.0e-4, "t_final": 0.2, "base_seed": 20160614, "sample_points": 101},
        "infer": {"record": "simulate", "true_subspace": 1, "confidence": 25.0},
    },
}
