"""Which vector fields on R^3 are symmetries of the Nambu-Goto string Hamiltonian.

Rigid motions leave the Hamiltonian invariant to rounding; shears, scalings and
twists do not.
"""

from noetherlab.scenarios import ScenarioConfig, run_scenario

res = run_scenario(ScenarioConfig.create("string-3d"), threads=1)
for rep in res.reports:
    if rep.name.startswith("symmetry:"):
        kind = "symmetry" if rep.passed else "broken"
        print(f"{rep.name[9:]:16s} max residual {rep.max_residual:.2e}  -> {kind}")
