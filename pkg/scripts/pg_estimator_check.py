"""Compare the score-function transmitter gradient with a finite difference of
the smoothed objective on a K=2 instance with a frozen random receiver.

Prints, per live parameter, the estimate, its standard error, the
common-random-numbers central difference and their relative gap.

    python scripts/pg_estimator_check.py [--seed 0] [--Q 1000000]
"""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from helpers import policy_gradient_vs_fd  # noqa: E402

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--Q", type=int, default=1_000_000)
    a = p.parse_args()
    est, se, fd = policy_gradient_vs_fd(a.seed, a.Q)
    print(f"{'estimate':>12s} {'std err':>10s} {'finite diff':>12s} {'|est|/se':>9s} {'rel gap':>8s}")
    for i in np.argsort(-np.abs(fd)):
        print(f"{est[i]:12.4e} {se[i]:10.2e} {fd[i]:12.4e} {abs(est[i]) / se[i]:9.1f} "
              f"{abs(est[i] - fd[i]) / abs(fd[i]):8.3f}")
