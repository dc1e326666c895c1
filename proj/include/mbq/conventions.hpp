#pragma once

namespace mbq {

// Market conventions shared across pricing, stripping and calibration.
// delta_years is the VIX window (30 calendar days, ACT/365); day_count
// is the denominator used to turn calendar days into year fractions.
struct Conventions {
  double delta_years = 30.0 / 365.0;
  double day_count = 365.0;

  double years_from_days(double days) const { return days / day_count; }
};

// Process-wide conventions. Mutate once at startup (CLI overrides); all
// pricing paths read through this.
inline Conventions& conventions() {
  static Conventions c;
  return c;
}

}  // namespace mbq
