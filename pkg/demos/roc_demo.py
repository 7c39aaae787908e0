"""Detection performance of the four array models.

Trains both losses on a few impairment realizations, then compares the
empirical ROC and position errors against the known-impairment and
ideal-array detectors on shared test draws. Defaults are sized to finish
in a few minutes; raise them toward the acceptance scale with the flags.

    python demos/roc_demo.py [--realizations 2] [--iterations 1000] [--trials 2000]
"""

import argparse

from gpical import ScenarioConfig
from gpical.evaluation import METHOD_TAGS, pd_at_pfa, run_comparison


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--realizations", type=int, default=2)
    parser.add_argument("--iterations", type=int, default=1000)
    parser.add_argument("--trials", type=int, default=2000)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--plot", help="save the ROC curves (needs matplotlib)")
    args = parser.parse_args()

    cfg = ScenarioConfig.desk(n_iterations=args.iterations, n_eval_trials=args.trials)
    reports = {r.method_tag: r for r in run_comparison(cfg, args.realizations, args.workers)}

    print(f"{'method':14s} {'Pd@1e-2':>8s} {'Pd@1e-1':>8s} {'angle RMSE':>11s} {'range RMSE':>11s} {'kappa err':>9s}")
    for tag in METHOD_TAGS:
        r = reports[tag]
        print(f"{tag:14s} {pd_at_pfa(r.roc, 1e-2):8.3f} {pd_at_pfa(r.roc, 1e-1):8.3f} "
              f"{r.angle_rmse:9.3f} deg {r.range_rmse:9.3f} m {r.kappa_error:9.3f}")

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 4))
        for tag in METHOD_TAGS:
            roc = reports[tag].roc
            ax.semilogx([p.p_fa for p in roc], [p.p_d for p in roc], label=tag)
        ax.set_xlabel("P_FA")
        ax.set_ylabel("P_D")
        ax.legend()
        fig.savefig(args.plot, dpi=120, bbox_inches="tight")
        print(f"wrote {args.plot}")


if __name__ == "__main__":
    main()
