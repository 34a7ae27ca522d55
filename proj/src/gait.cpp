#include "locoman/gait.hpp"

#include <cmath>
#include <stdexcept>

namespace locoman {

namespace {

double frac(double x) { return x - std::floor(x); }

/// Signed wrap of a cycle coordinate into [-0.5, 0.5).
double wrap_cycle(double x) { return x - std::floor(x + 0.5); }

constexpr double kBandWidth = 0.1;  // transition band, fraction of a cycle

}  // namespace

double gait_phase(const GaitSchedule& schedule, double t, int foot) {
  if (foot < 0 || foot > 3) throw std::out_of_range("gait_phase: foot index");
  return frac(schedule.frequency * t + schedule.offsets[static_cast<size_t>(foot)]);
}

double desired_contact(const GaitSchedule& schedule, double t, int foot) {
  const double duty = schedule.duty;
  if (duty >= 1.0) return 1.0;
  if (duty <= 0.0) return 0.0;

  const double phase = gait_phase(schedule, t, foot);
  // Shrink the band if the duty leaves no room for the full 0.1 cycles.
  const double h = std::min({kBandWidth * 0.5, duty * 0.5, (1.0 - duty) * 0.5});
  const double w = 2.0 * h;

  const double u_on = wrap_cycle(phase);          // distance from swing->stance edge
  const double u_off = wrap_cycle(phase - duty);  // distance from stance->swing edge
  if (std::abs(u_on) <= h) return 0.5 * (1.0 + std::sin(M_PI * u_on / w));
  if (std::abs(u_off) <= h) return 0.5 * (1.0 - std::sin(M_PI * u_off / w));
  return phase < duty ? 1.0 : 0.0;
}

Eigen::Matrix<double, 5, 1> timing_reference(const GaitSchedule& schedule, double t) {
  Eigen::Matrix<double, 5, 1> out;
  for (int foot = 0; foot < 4; ++foot)
    out[foot] = std::sin(2.0 * M_PI * gait_phase(schedule, t, foot));
  out[4] = frac(schedule.frequency * t);
  return out;
}

}  // namespace locoman
