"""Agreement statistics between measured and reference volumes.

Synthetic "measured" volumes with a systematic 20 % underestimate show
what each statistic sees: rank correlation ignores the bias, ICC and
MAPE punish it, and a no-intercept fit learns and removes it. The
600-bin step-CDF contest score is computed per case.
"""

import numpy as np

from nunet_core import PairedSeries, compute_report, crps_case, crps_score
from nunet_core.agreement import (
    apply_adjustment,
    fit_no_intercept,
    format_agreement_text,
)


def main():
    rng = np.random.default_rng(11)
    truth = tuple(rng.uniform(60.0, 280.0, 12))
    pred = tuple(0.8 * t + rng.normal(0.0, 4.0) for t in truth)  # biased rater
    series = PairedSeries(truth=truth, pred=pred, parameter_name="lv_edv")

    print("before adjustment:")
    print(format_agreement_text(compute_report(series)))

    adj = fit_no_intercept(series)
    print(f"\nfitted no-intercept slope: {adj.slope:.4f} (n={adj.fit_n})")

    adjusted = PairedSeries(
        truth=truth,
        pred=tuple(apply_adjustment(adj, p) for p in pred),
        parameter_name="lv_edv (adjusted)",
    )
    print("\nafter adjustment:")
    print(format_agreement_text(compute_report(adjusted)))

    print("\nstep-CDF contest score, per case (600 one-ml bins):")
    cases = list(zip(adjusted.pred, truth))
    for k, (p, t) in enumerate(cases[:4]):
        print(f"  case {k}: pred {p:6.1f} vs truth {t:6.1f} -> {crps_case(p, t):.4f}")
    print(f"  overall: {crps_score(cases):.4f}")


if __name__ == "__main__":
    main()
