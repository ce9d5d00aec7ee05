"""One compressible run at Ma = 1e-2 on a 32 x 32 grid, step by step.

Prints the per-step diagnostics that make the scheme's stability argument
checkable: the kinetic energy balance residual, the sign of the
renormalization remainder, the local entropy left-hand side and the global
entropy compared with its initial bound C0.
"""
from lowmach.harness import RunConfig, check_records, run_compressible

cfg = RunConfig()
res = run_compressible(cfg, 1e-2)

print(f"{'n':>3} {'kinetic res':>11} {'min R_K':>10} {'local LHS':>11} {'global':>9} {'|rho-1|_L2':>11} {'newton':>6}")
for r in res.records:
    print(f"{r.step:3d} {r.kinetic_residual:11.2e} {r.renorm_min_rel:10.2e} {r.local_entropy:11.3e} "
          f"{r.global_entropy:9.5f} {r.rho_dev_l2:11.3e} {r.newton_iterations:6d}")
print(f"C0 = {res.initial.C0:.5f}")

# the same tolerances the CLI uses for its exit code
for name, ok in check_records(res.records, 1e-2).items():
    print(f"{'ok ' if ok else 'BAD'} {name}")
