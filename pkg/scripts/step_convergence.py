"""Doppler phase change under step halving for the fig3 scenario.

    python scripts/step_convergence.py
"""

import numpy as np

from u2vchan.channel import doppler_phase_los, doppler_phase_nlos
from u2vchan.config import ScenarioConfig, build_scene, validate


def main():
    scene = build_scene(validate(ScenarioConfig(preset="paper-fig3")))
    sc = scene.scatterers
    t = np.linspace(0, scene.duration, 221)

    def phases(step):
        return (doppler_phase_los(scene.tx, scene.rx, scene.carrier, t, step),
                doppler_phase_nlos(scene.tx, scene.rx, sc["tx"], sc["rx"], sc["velocity"], scene.carrier, t, step))

    print("step_s,max_change_los_rad,max_change_nlos_rad")
    for step in (1e-3, 5e-4, 2e-4, 1e-4):
        a, b = phases(step), phases(step / 2)
        print(f"{step:g},{np.max(np.abs(a[0] - b[0])):.3e},{np.max(np.abs(a[1] - b[1])):.3e}")


if __name__ == "__main__":
    main()
