"""Joint training vs. the Gaussian-optimal baseline on spiky clutter (beta = 0.5).

    python scripts/fig4_spiky_clutter.py [--scale desk|paper] [--seeds 0 1 2]
"""
from _runner import parser, run

if __name__ == "__main__":
    run(["baseline_beta05", "fig4_joint_beta05"], parser(__doc__).parse_args(), "fig4")
