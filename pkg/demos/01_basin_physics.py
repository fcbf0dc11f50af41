"""A walk through the basin's water-level physics.

Shows how gate flow responds to the head difference and the number of open
gates, how the freshwater inflow varies over the year, and how the basin
equalizes against a constant sea level without ever overshooting it.
"""

from fjordtwin import (
    HydroParams,
    WaterLevels,
    cross_section_total,
    fjord_derivative,
    gate_flow,
    integrate_step,
    stream_flow,
)

params = HydroParams()
print("flow constants (per minute):", params.k_inflow, params.k_outflow)
print("gate actions available to the controller:", params.gate_actions)

print("\n-- gate flow vs head difference (14 gates open) --")
for dh in (0.02, 0.1, 0.25, 0.5, 0.9):
    levels = WaterLevels(h_f=0.05, h_s=0.05 + dh)
    area = cross_section_total(levels, params, 14)
    q = gate_flow(levels, area, params)
    print(f"  sea {dh:+.2f} m above fjord: area {area:7.1f} m^2, inflow {q:10.0f} m^3/min")

levels = WaterLevels(h_f=0.30, h_s=0.05)
area = cross_section_total(levels, params, 14)
print(f"  fjord 0.25 m above sea:     outflow {gate_flow(levels, area, params):10.0f} m^3/min")

print("\n-- monthly stream inflow --")
months = "Jan Feb Mar Apr May Jun Jul Aug Sep Oct Nov Dec".split()
for month, name in enumerate(months, start=1):
    q = stream_flow(month, params)
    rise_per_day = q * 1440.0 / params.fjord_area
    print(f"  {name}: {q:7.1f} m^3/min  (closed-gate rise {100 * rise_per_day:.2f} cm/day)")

print("\n-- closed basin, January: level drift over three days --")
levels = WaterLevels(h_f=0.05, h_s=0.40)
for day in range(1, 4):
    levels = integrate_step(levels, 0, 1, params, duration=1440.0)
    print(f"  after day {day}: fjord at {levels.h_f:+.4f} m DVR90")

print("\n-- equalization with one gate open (streams off, sea fixed at 0.25) --")
quiet = HydroParams(stream_base_flow=0.0)
levels = WaterLevels(h_f=-0.30, h_s=0.25)
hours = 0
for target in (6, 12, 24, 48, 72):
    for _ in range((target - hours) * 6):
        levels = integrate_step(levels, 1, 1, quiet, duration=10.0)
    hours = target
    gap = levels.h_s - levels.h_f
    print(f"  after {hours:2d} h: fjord {levels.h_f:+.4f} m, gap to sea {gap:.4f} m")

print("\nrate of change examples (m/min):")
print("  closed, January:", fjord_derivative(WaterLevels(0.05, 0.40), 0, 1, params))
print("  14 gates, sea 0.25 m higher:", fjord_derivative(WaterLevels(0.0, 0.25), 14, 1, params))
