"""Unsupervised gain/phase calibration from unlabeled radar returns.

Both losses start from an ideal array and learn the impairment from
observations alone. The target positions, gains and even whether a target is
present are never shown to the optimizer. Progress is reported as the
phase-aligned error to the true vector, which the optimizer cannot see.

    python demos/train_demo.py [--iterations 2000] [--seed 0]
"""

import argparse

import numpy as np

from gpical import GainPhase, LossChoice, RandomStreams, ScenarioConfig, draw_gain_phase, train
from gpical.evaluation import kappa_error


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--iterations", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    cfg = ScenarioConfig.desk(n_iterations=args.iterations, seed=args.seed)
    streams = RandomStreams(cfg.seed).child(0)
    kappa_true = draw_gain_phase(cfg, streams.generator("kappa"))
    start = kappa_error(GainPhase.ideal(cfg.n_antennas), kappa_true)
    print(f"error of the ideal-array guess: {start:.3f}")

    every = max(cfg.n_iterations // 8, 1)
    for choice in LossChoice:
        def progress(it, loss, k):
            if it % every == 0:
                print(f"  [{choice.value}] iteration {it:5d}  loss {loss:12.2f}  "
                      f"error {kappa_error(k, kappa_true):.4f}")

        kappa_hat, history = train(cfg, choice, kappa_true, streams, callback=progress)
        final = kappa_error(kappa_hat, kappa_true)
        print(f"{choice.value} loss: final error {final:.4f} ({start / final:.1f}x smaller)")
        print("  |kappa| true   ", np.round(np.abs(kappa_true.kappa[:6]), 3))
        print("  |kappa| learned", np.round(np.abs(kappa_hat.kappa[:6]), 3))


if __name__ == "__main__":
    main()
