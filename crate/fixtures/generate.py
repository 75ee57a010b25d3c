"""Regenerate the synthetic reference fixtures and their expected statistics.

Every file written here is synthetic: S11 curves are sums of Lorentzian
dips with a small seeded ripple, and dimensional measurements are nominal
lengths scaled by hand-picked relative errors and rounded to 0.01 mm.

    python3 fixtures/generate.py
"""

import json
import math
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
NOTE = "synthetic data for pipeline tests, not a measurement"

# Nominal feature lengths of the bundled designs, as reported by
# `antfab design`. The patch width and length are re-derived below from the
# closed-form transmission-line formulas as a cross-check.
PATCH_NOMINAL = {
    "patch_width": 36.735299785841,
    "patch_length": 29.807169188240,
    "feed_width": 4.046919948074,
    "feed_inset": 3.781342538320,
    "notch_gap": 1.000000,
    "substrate_width": 56.735299785841,
    "substrate_length": 49.807169188240,
}
UWB_NOMINAL = {
    "radiator_width": 24.0,
    "radiator_height": 30.0,
    "feed_width": 3.0,
    "feed_gap": 0.3,
    "stub_width": 10.0,
    "stub_length": 12.0,
    "substrate_width": 34.0,
    "substrate_length": 47.3,
}


def patch_dims(f, er, h):
    c = 299_792_458e3
    w = c / (2 * f) * math.sqrt(2 / (er + 1))
    ee = (er + 1) / 2 + (er - 1) / 2 / math.sqrt(1 + 12 * h / w)
    dl = 0.412 * h * (ee + 0.3) * (w / h + 0.264) / ((ee - 0.258) * (w / h + 0.8))
    return w, c / (2 * f * math.sqrt(ee)) - 2 * dl


def s11_db(freqs, dips, rng):
    """|S11| in dB for Lorentzian dips given as (f0_hz, depth_db, q)."""
    mag = np.ones_like(freqs)
    for f0, depth, q in dips:
        d = 1 - 10 ** (depth / 20)
        mag -= d / (1 + (2 * q * (freqs - f0) / f0) ** 2)
    db = 20 * np.log10(np.clip(mag, 1e-6, None))
    return np.minimum(db + rng.normal(0, 0.05, freqs.size), 0.0)


def write_s11():
    rng = np.random.default_rng(7)
    freqs = np.arange(1.0e9, 8.0e9 + 1, 10e6)
    curves = {
        "patch_simulated.s1p": [(3.00e9, -25.0, 40), (4.40e9, -18.0, 45)],
        "patch_conformal_measured.csv": [(2.97e9, -21.0, 35), (4.36e9, -16.5, 40)],
        "patch_planar_measured.csv": [(3.04e9, -19.0, 35), (4.46e9, -7.0, 40)],
    }
    out = HERE / "s11"
    out.mkdir(exist_ok=True)
    for name, dips in curves.items():
        db = s11_db(freqs, dips, rng)
        if name.endswith(".s1p"):
            lines = [f"! {NOTE}", "# GHz S MA R 50"]
            lines += [f"{f / 1e9:.4f} {10 ** (d / 20):.8f} 0.0" for f, d in zip(freqs, db)]
        else:
            lines = [f"# {NOTE}", "freq_hz,s11_db"]
            lines += [f"{f:.1f},{d:.4f}" for f, d in zip(freqs, db)]
        (out / name).write_text("\n".join(lines) + "\n")


def write_dims():
    out = HERE / "dims"
    out.mkdir(exist_ok=True)
    # relative errors in percent, per sample and feature
    sets = {
        "patch_measured": (PATCH_NOMINAL, {
            "conformal_a": {"patch_width": 0.6, "patch_length": -0.8, "feed_width": 2.5,
                            "feed_inset": -3.1, "notch_gap": 12.0, "substrate_width": 0.3,
                            "substrate_length": -0.2},
            "conformal_b": {"patch_width": -0.4, "patch_length": 0.5, "feed_width": 1.9,
                            "feed_inset": 2.2, "notch_gap": -9.0, "substrate_width": 0.2,
                            "substrate_length": 0.4},
        }),
        "uwb_measured": (UWB_NOMINAL, {
            "conformal_a": {"radiator_width": 4.0, "radiator_height": -3.5, "feed_width": 9.0,
                            "feed_gap": 86.0, "stub_width": 5.5, "stub_length": -4.0,
                            "substrate_width": 1.2, "substrate_length": -0.9},
            "conformal_b": {"radiator_width": -2.8, "radiator_height": 3.1, "feed_width": 12.5,
                            "feed_gap": 63.0, "stub_width": -6.0, "stub_length": 3.3,
                            "substrate_width": 0.8, "substrate_length": 1.1},
        }),
    }
    for name, (nominal, samples) in sets.items():
        rows = []
        for sample, errs in samples.items():
            for feat, e in errs.items():
                rows.append((sample, feat, round(nominal[feat] * (1 + e / 100), 2)))
        lines = [f"# {NOTE}", "sample,feature,measured_mm"]
        lines += [f"{s},{f},{m:.2f}" for s, f, m in rows]
        (out / f"{name}.csv").write_text("\n".join(lines) + "\n")

        expected = {}
        for sample in samples:
            errs = [abs(m - nominal[f]) / nominal[f] * 100 for s, f, m in rows if s == sample]
            feats = [f for s, f, _ in rows if s == sample]
            worst = max(range(len(errs)), key=errs.__getitem__)
            expected[sample] = {
                "features": len(errs),
                "mean_abs_error_pct": sum(errs) / len(errs),
                "max_abs_error_pct": errs[worst],
                "worst_feature": feats[worst],
                "flagged": sum(e > 50 for e in errs),
            }
        (out / f"{name}.expected.json").write_text(json.dumps(expected, indent=2) + "\n")


if __name__ == "__main__":
    w, l = patch_dims(3e9, 2.7, 1.5)
    assert abs(w - PATCH_NOMINAL["patch_width"]) < 1e-3, w
    assert abs(l - PATCH_NOMINAL["patch_length"]) < 1e-3, l
    write_s11()
    write_dims()
