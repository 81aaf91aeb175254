"""Robustness to a clutter-shape mismatch: test on beta = 0.5 after training on
an equal beta in {0.5, 1.3} mixture or on beta = 1.3 alone.

    python scripts/fig5_mixture.py [--scale desk|paper] [--seeds 0 1 2]
"""
from _runner import parser, run

if __name__ == "__main__":
    run(["fig5_mixture", "fig5_beta13", "fig4_joint_beta05"], parser(__doc__).parse_args(),
        "fig5")
