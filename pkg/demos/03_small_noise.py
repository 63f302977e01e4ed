"""Small-noise behaviour: the noiseless path, controlled skeletons and the action.

    python demos/03_small_noise.py
"""
from __future__ import annotations

import numpy as np

from reflectmv.ldp import ControlPath, action, concentration_check, euler_skeleton, psi, skeleton
from reflectmv.model import get_model


def main():
    model = get_model("ou-cubic-1d")
    dom = model.default_domain
    dt = 1.0 / 1024
    base = psi(model, dom, model.x0, dt, 1.0)
    print(f"noiseless path at t=1: {base.values[-1, 0]:.5f} (relaxation 1 + 2 e^-2 = {1 + 2 * np.exp(-2):.5f})")

    h = ControlPath.from_function(lambda t: np.sin(2 * np.pi * t) / np.pi, 1.0, dt)
    print(f"action of h = {action(h):.6f}")
    H = skeleton(model, dom, model.x0, h, dt, psi_path=base)
    for n in (4, 16, 64, 256):
        gap = H.sup_distance(euler_skeleton(model, dom, model.x0, h, n, dt, psi_path=base))
        print(f"Euler skeleton with {n:3d} cells: sup gap {gap:.3e}")

    rows = concentration_check(model, dom, model.x0, [0.2, 0.1, 0.05], 1e-3, 1024, seed=0)
    for r in rows:
        print(f"eps={r.epsilon:<5} sup E|X - psi|^2 = {r.estimate:.4e} +- {r.stderr:.1e}")


if __name__ == "__main__":
    main()
