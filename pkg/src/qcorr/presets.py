"""Figure presets.  Each entry is a job document plus its full-scale overrides."""

from __future__ import annotations

import copy

PRESETS = {
    "fig1": {
        "description": "R vs cloud size sigma, N=1000, theta=90 deg",
        "config": {
            "name": "fig1",
            "model": "classical",
            "quantity": "r_factor",
            "n_atoms": 1000,
            "sigma": 1.0,
            "theta_deg": 90.0,
            "tau": [0.0],
            "n_realizations": 1000,
            "sweep": {"parameter": "sigma", "logspace": {"start": 0.1, "stop": 10.0, "num": 20}},
            "analytic_column": True,
        },
        "paper_scale": {"n_realizations": 10000},
    },
    "fig2": {
        "description": "timed Dicke g2, R=2, detuning 5*Gamma_N and 0",
        "config": {
            "name": "fig2",
            "model": "analytic_td",
            "n_atoms": 1,
            "sigma": 1.0,
            "gamma_n": 1.0,
            "r_factor": 2.0,
            "detuning_units": "gamma_n",
            "tau_units": "gamma_n",
            "t": "inf",
            "tau": {"start": 0.0, "stop": 10.0, "num": 1001},
            "sweep": {"parameter": "detuning", "values": [5.0, 0.0]},
        },
        "paper_scale": {},
    },
    "fig3": {
        "description": "factorized-state g2, N=1e6, sigma=20, detuning 5*Gamma_N, theta 9-12 deg",
        "config": {
            "name": "fig3",
            "model": "analytic_eberly",
            "n_atoms": 1000000,
            "sigma": 20.0,
            "detuning": 5.0,
            "detuning_units": "gamma_n",
            "tau_units": "gamma_n",
            "t": "inf",
            "tau": {"start": 0.0, "stop": 10.0, "num": 1001},
            "sweep": {"parameter": "theta_deg", "values": [9.0, 10.0, 11.0, 12.0]},
        },
        "paper_scale": {},
    },
    "fig4": {
        "description": "single-excitation g2, N=100, sigma=5, detuning 5, theta=90 deg, t=5",
        "config": {
            "name": "fig4",
            "model": "single_excitation",
            "n_atoms": 100,
            "sigma": 5.0,
            "detuning": 5.0,
            "theta_deg": 90.0,
            "t": 5.0,
            "tau": {"start": 0.0, "stop": 20.0, "num": 401},
            "n_realizations": 20,
            "analytic_column": True,
        },
        "paper_scale": {},
    },
    "fig5": {
        "description": "product-state g2, N=100, sigma=5, detuning 5, theta=16.26 deg, t=5",
        "config": {
            "name": "fig5",
            "model": "product",
            "n_atoms": 100,
            "sigma": 5.0,
            "detuning": 5.0,
            "theta_deg": 16.26,
            "t": 5.0,
            "tau": {"start": 0.0, "stop": 20.0, "num": 401},
            "n_realizations": 20,
            "analytic_column": True,
        },
        "paper_scale": {},
    },
}


def preset_names() -> list[str]:
    return list(PRESETS)


def preset_config(name: str, paper_scale: bool = False) -> dict:
    try:
        entry = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
    cfg = copy.deepcopy(entry["config"])
    cfg["preset"] = name
    if paper_scale:
        cfg.update(copy.deepcopy(entry["paper_scale"]))
    return cfg


def preset_rows() -> list[dict]:
    """Summary rows for listing: parameters and desk-scale overrides per figure."""
    rows = []
    for name, entry in PRESETS.items():
        cfg = entry["config"]
        desk = {k: cfg[k] for k in entry["paper_scale"]}
        rows.append({
            "name": name,
            "description": entry["description"],
            "model": cfg["model"],
            "quantity": cfg.get("quantity", "g2"),
            "n_realizations": cfg.get("n_realizations", 1),
            "desk_overrides": {k: {"desk": desk[k], "full": v} for k, v in entry["paper_scale"].items()},
        })
    return rows
