"""Structural properties of the MAC operators, independent of any time step.

Random fields exercise the gradient/divergence duality, coercivity of the
diffusion operator, the dual mass balance and the convexity bounds of
Pi_gamma.  The inf-sup constant is then estimated on three grids to show it
does not degrade under refinement.
"""
from lowmach.checks import run_all
from lowmach.diagnostics import infsup_estimate
from lowmach.grid import build_grid

for res in run_all((16, 16)):
    print(res.line())

for n in (8, 16, 32):
    print(f"beta({n}x{n}) = {infsup_estimate(build_grid((n, n))):.4f}")
