"""Regenerate beta_oracle.json: high-precision reference values for the
Beta log-pdf, CDF, mean, and variance over the acceptance grid.

Run from the repository root:  python tests/oracles/gen_beta_oracle.py

The oracle is mpmath at 40 significant digits — closed forms for the
moments and log-density, the regularized incomplete beta for the CDF —
entirely independent of the package's Lanczos/continued-fraction code
paths. Grid points are evaluated at their exact float64 values so the
reference matches what the implementation actually receives.
"""

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40

PARAM_GRID = [0.5, 0.6, 1.0, 2.0, 5.0, 20.0, 100.0]
Y_GRID = [i / 100.0 for i in range(1, 100)]


def main() -> None:
    params = [(a, b) for a in PARAM_GRID for b in PARAM_GRID]
    means, variances, log_pdfs, cdfs = [], [], [], []
    for a, b in params:
        am, bm = mp.mpf(a), mp.mpf(b)
        means.append(float(am / (am + bm)))
        variances.append(float(am * bm / ((am + bm) ** 2 * (am + bm + 1))))
        ln_b = mp.loggamma(am) + mp.loggamma(bm) - mp.loggamma(am + bm)
        row_pdf, row_cdf = [], []
        for y in Y_GRID:
            ym = mp.mpf(y)
            row_pdf.append(float(
                (am - 1) * mp.log(ym) + (bm - 1) * mp.log(1 - ym) - ln_b))
            row_cdf.append(float(mp.betainc(am, bm, 0, ym, regularized=True)))
        log_pdfs.append(row_pdf)
        cdfs.append(row_cdf)

    out = {
        "params": [[a, b] for a, b in params],
        "y": Y_GRID,
        "mean": means,
        "variance": variances,
        "log_pdf": log_pdfs,
        "cdf": cdfs,
    }
    path = Path(__file__).parent / "beta_oracle.json"
    path.write_text(json.dumps(out))
    print(f"wrote {path} ({len(params)} parameter pairs x {len(Y_GRID)} y values)")


if __name__ == "__main__":
    main()
