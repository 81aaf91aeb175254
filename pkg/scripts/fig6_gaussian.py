"""Gaussian clutter (beta = 2): joint training, receiver-only training and the
closed-form optimum.

    python scripts/fig6_gaussian.py [--scale desk|paper] [--seeds 0 1 2]
"""
from _runner import parser, run

if __name__ == "__main__":
    run(["baseline_beta2", "fig6_joint", "fig6_rx_only"], parser(__doc__).parse_args(), "fig6")
