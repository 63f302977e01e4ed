"""Propagation of chaos: distance between N-particle and mean-field laws versus N.

A reduced version of the acceptance experiment (coarser grid, smaller
reference). Outputs are identical for any worker count.

    python demos/05_poc_rate.py
"""
from __future__ import annotations

from reflectmv.experiments import PocConfig, run_poc


def main():
    res = run_poc(PocConfig(dt=1e-2, N_list=(32, 64, 128, 256), M_ref=4096, replicates=4, seed=0))
    for r in res.rows:
        print(f"N={r['N']:5d} sup W2^2 = {r['sup_w2_squared']:.3e} +- {r['sup_w2_squared_stderr']:.1e}")
    lo, hi = res.fit.ci()
    print(f"log-log slope {res.fit.slope:.3f} (95% CI {lo:.3f}..{hi:.3f})")


if __name__ == "__main__":
    main()
