"""Integrate one buoyancy-driven flow and inspect its conservation laws.

A cellular vortex stirs a warm blob; the temperature field feeds momentum
back through the buoyancy term.  The run prints the physical-invariant
report and saves the norm history as a plot.

Run with:  python3 demos/02_single_run.py
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from bqlim.config import RunConfig
from bqlim.dynamics import energy_balance_residual, run_invariant_report, simulate

cfg = RunConfig(
    n=128,
    t_final=1.0,
    nu=1e-3,
    kappa=1e-2,
    omega0={"family": "taylor_green"},
    theta0={"family": "gaussian", "amplitude": 0.2, "width": 0.25},
    cadence=256,
)

trace, final_state = simulate(cfg)
print(f"{trace.steps} steps, dt in [{trace.dt_min:.2e}, {trace.dt_max:.2e}]")
print(f"energy balance residual: {energy_balance_residual(trace):.3e}")

report = run_invariant_report(trace)
for name, entry in report.items():
    if isinstance(entry, dict) and "passed" in entry:
        print(f"{name}: {'ok' if entry['passed'] else 'VIOLATED'} {entry}")

fig, axes = plt.subplots(2, 2, figsize=(10, 7), sharex=True)
axes[0, 0].plot(trace.t, trace.u_l2)
axes[0, 0].set_title("velocity L2")
axes[0, 1].plot(trace.t, trace.omega_linf, label="sup")
axes[0, 1].plot(trace.t, trace.omega_l2, label="L2")
axes[0, 1].set_title("vorticity norms")
axes[0, 1].legend()
axes[1, 0].plot(trace.t, trace.theta_l2, label="L2")
axes[1, 0].plot(trace.t, trace.theta_linf, label="sup")
axes[1, 0].set_title("temperature norms")
axes[1, 0].legend()
axes[1, 1].plot(trace.t, trace.kinetic, label="kinetic")
axes[1, 1].plot(trace.t, trace.work, label="buoyancy work rate")
axes[1, 1].set_title("energy budget")
axes[1, 1].legend()
for ax in axes[1]:
    ax.set_xlabel("t")
fig.tight_layout()
fig.savefig("single_run_norms.png", dpi=120)
print("wrote single_run_norms.png")
