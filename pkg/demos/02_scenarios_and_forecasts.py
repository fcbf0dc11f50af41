"""Synthetic sea-level scenarios and noisy forecasts of them.

Generates the three 3-day profiles (normal tides, sustained low waters,
sustained high waters), summarizes their shape, and shows how a forecast
differs from the truth by bounded uniform noise.  Writes the scenario CSVs
next to this script for plotting.
"""

from pathlib import Path

import numpy as np

from fjordtwin import make_tidal_scenario, perturb_forecast, save_scenario

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

for kind in ("normal", "low", "high"):
    sc = make_tidal_scenario(kind, seed=1)
    sea = sc.sea_level.values
    wind = sc.wind_speed.values
    print(f"-- {kind} (starts {sc.sea_level.start.date()}, month {sc.start_month}) --")
    print(f"   sea level: min {sea.min():+.3f} m, max {sea.max():+.3f} m")
    above = sea > 0.25
    below = sea < 0.0
    for name, mask in (("above +0.25 m", above), ("below 0.00 m", below)):
        best = run = 0
        for v in mask:
            run = run + 1 if v else 0
            best = max(best, run)
        print(f"   longest stretch {name}: {(best - 1) * 10 / 60 if best else 0:.1f} h")
    print(f"   wind: mean {wind.mean():.1f} m/s, share at/above 8 m/s "
          f"{100 * np.mean(wind >= 8.0):.0f}%")
    path = out_dir / f"{kind}.csv"
    save_scenario(sc, path)
    print(f"   wrote {path}")

print("\n-- forecast noise (normal scenario, seed 7) --")
sc = make_tidal_scenario("normal", seed=1)
fc = perturb_forecast(sc, seed=7)
sea_err = fc.sea_level.values - sc.sea_level.values
wind_err = fc.wind_speed.values - sc.wind_speed.values
print(f"   sea error:  max |e| {np.abs(sea_err).max():.4f} m (bound 0.005)")
print(f"   wind error: max |e| {np.abs(wind_err).max():.3f} m/s (bound 0.5)")
print(f"   provenance: {fc.label} from {fc.source_label!r}, seed {fc.seed}")
print("   evaluation always uses the unperturbed scenario; forecasts are for training only")
