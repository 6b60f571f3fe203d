"""The column outlier ratio and the ranking built from it.

An entry is an outlier when |w| exceeds S times the matrix-wide mean
absolute value. The per-column outlier fraction is cheap to compute,
needs no calibration data, and concentrates sharply: a few columns hold
most of the outliers. Sorting columns by it ("outlier order") is the
sensitivity signal that drives both mixed precision and reservation.
"""

from claq import model_outlier_stats, outlier_ratio, synthetic_model, threshold_for_fraction

model = synthetic_model(n_matrices=4, rows=512, cols=512, seed=1)
w = model.matrices[0]

# === RATIOS AT THE DEFAULT SCALE S = 13 ===
profile = outlier_ratio(w, scale=13.0)
print(f"matrix {w.name}: mean|W| = {profile.matrix_mean_abs:.4f}")
print(f"columns with any outlier: {(profile.ratios > 0).sum()} of {profile.cols}")
top = profile.order[:8]
print("top columns by outlier ratio:")
for c in top:
    print(f"  column {c:4d}  ratio {profile.ratios[c]:.4f}")

# === TOP-FRACTION SELECTION ===
# ceil(10%) of columns, the set both downstream strategies target
threshold, selected = threshold_for_fraction(profile, 0.10)
print(f"\ntop 10% selection: {selected.size} columns, threshold ratio {threshold:.4f}")

# === HOW CONCENTRATED ARE THE OUTLIERS? ===
stats, per_layer = model_outlier_stats(model, scale=13.0)
print("\nper-matrix concentration (share of outliers in the top 10% of columns):")
for s in stats:
    print(
        f"  {s.name:42s} outlier fraction {s.total_outlier_fraction:.4f}  "
        f"top-decile share {s.top_decile_share:.2f}"
    )
print("\nper-layer aggregate outlier fraction:")
for layer, frac in per_layer.items():
    print(f"  {layer:10s} {frac:.4f}")

# === SWEEPING THE SCALE ===
# Larger S -> stricter definition -> fewer outliers. Too small and every
# column qualifies (the ranking loses contrast); too large and most
# columns have none. The useful band sits in between.
print("\nscale sweep on one matrix:")
for s in (1, 3, 7, 13, 25, 50, 100):
    p = outlier_ratio(w, scale=float(s))
    print(
        f"  S={s:3d}  mean ratio {p.ratios.mean():.4f}  max ratio {p.ratios.max():.4f}  "
        f"columns with outliers {(p.ratios > 0).sum():4d}"
    )
