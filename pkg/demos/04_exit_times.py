"""Exit times from a basin: moment clock, exit cost and a small Kramers fit.

The full acceptance-size fit (1024 paths, four noise levels) takes several
minutes; this demo uses 128 paths and three noise levels.

    python demos/04_exit_times.py
"""
from __future__ import annotations

from reflectmv.exit import exit_cost, get_scenario, kramers_fit, moment_clock, pre_convergence_probability


def main():
    sc = get_scenario("ou-cubic-1d-exit")
    mc = moment_clock(sc, 0.05, 1e-3, 1024, seed=0)
    print(f"moment clock: T_hat={mc.T_hat:.4f}, checks passed: {mc.passed}")
    print(f"exit cost: classical {exit_cost(sc):.4f}, alternative sign convention {exit_cost(sc, 'paper'):.4f}")
    fit = kramers_fit(sc, [1.0, 0.7, 0.5], 1e-3, 128, 300.0, seed=0)
    for r in fit.rows:
        print(f"eps={r['epsilon']}: mean exit time {r['mean_tau']:.2f} +- {r['stderr']:.2f}")
    print(f"slope of log mean exit time vs 1/eps: {fit.slope:.3f} (target {fit.target_classical:.3f})")
    print("P[tau < T_hat]:", [round(p, 4) for _, p in pre_convergence_probability(fit.samples)])


if __name__ == "__main__":
    main()
