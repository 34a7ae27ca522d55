#pragma once

#include <Eigen/Dense>
#include <array>

namespace locoman {

/// Periodic contact schedule: per-foot phase offsets, stepping frequency and
/// stance duty factor. Foot order is [FL, FR, RL, RR].
struct GaitSchedule {
  std::array<double, 4> offsets = {0.0, 0.5, 0.5, 0.0};  // trot
  double frequency = 2.0;  // Hz
  double duty = 0.5;       // stance fraction of the cycle

  static GaitSchedule trot(double frequency = 2.0, double duty = 0.5) {
    return GaitSchedule{{0.0, 0.5, 0.5, 0.0}, frequency, duty};
  }
};

/// Phase of a foot in [0, 1): frac(frequency * t + offset).
double gait_phase(const GaitSchedule& schedule, double t, int foot);

/// Desired contact in [0, 1]: 1 in stance, 0 in swing, with a sinusoidal
/// transition band 0.1 cycles wide centered on each stance edge. Degenerate
/// duty values (<= 0 or >= 1) give the constant schedule.
double desired_contact(const GaitSchedule& schedule, double t, int foot);

/// 5-vector timing reference: sin(2*pi*phase) for each foot, then the global
/// cycle phase frac(frequency * t).
Eigen::Matrix<double, 5, 1> timing_reference(const GaitSchedule& schedule, double t);

}  // namespace locoman
