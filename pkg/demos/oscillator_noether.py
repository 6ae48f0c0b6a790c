"""Conserved quantities of a harmonic oscillator written as a reparametrization-invariant particle.

Run with ``python3 demos/oscillator_noether.py``. The Galilei expression is
conserved only with the kinetic coefficient 1/2; the second run shows the drift
that appears when the coefficient is 1.
"""

import numpy as np

from noetherlab.noether import trajectory_values
from noetherlab.scenarios import ScenarioConfig, build_scenario

for coeff in ("0.5", "1.0"):
    cfg = ScenarioConfig.create("nr-oscillator", overrides=[f"kinetic_coeff={coeff}", "steps=2000"])
    sc = build_scenario(cfg)
    traj = sc.data["prepare"]()
    print(f"kinetic_coeff = {coeff}: {traj.q.shape[0] - 1} RK4 steps, final q = {np.round(traj.q[-1], 6)}")
    for label, spec in sc.data["drift_specs"].items():
        vals = trajectory_values(traj, spec)
        print(f"  {label:14s} start {vals[0]: .6f}  drift {np.max(np.abs(vals - vals[0])):.2e}")
