#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <stdexcept>
#include <string>
#include <vector>

namespace locoman {

using JointVector = Eigen::VectorXd;
using Jacobian6 = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

/// Intrinsic Z-Y-X (yaw-pitch-roll) Euler angles, returned as (roll, pitch, yaw).
Eigen::Vector3d euler_from_quaternion(const Eigen::Quaterniond& q);
Eigen::Quaterniond quaternion_from_euler(double roll, double pitch, double yaw);
Eigen::Quaterniond quaternion_from_euler(const Eigen::Vector3d& rpy);

/// Rigid pose: position + unit quaternion. Euler accessors use the Z-Y-X
/// convention throughout the project.
struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  Eigen::Vector3d euler() const { return euler_from_quaternion(orientation); }

  static Pose from_euler(const Eigen::Vector3d& position, const Eigen::Vector3d& rpy) {
    return Pose{position, quaternion_from_euler(rpy)};
  }

  Pose operator*(const Pose& rhs) const {
    return Pose{position + orientation * rhs.position,
                (orientation * rhs.orientation).normalized()};
  }

  Pose inverse() const {
    const Eigen::Quaterniond inv = orientation.conjugate();
    return Pose{inv * (-position), inv};
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return position + orientation * p; }

  Eigen::Matrix4d matrix() const;
};

/// 6-vector pose error [position difference; wrapped Euler difference].
Eigen::Matrix<double, 6, 1> pose_error(const Pose& target, const Pose& current);

enum class JointType { revolute, prismatic };

struct Joint {
  std::string name;
  JointType type = JointType::revolute;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();  // unit, in the joint frame
  Eigen::Vector3d offset = Eigen::Vector3d::Zero(); // translation from parent frame
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();    // fixed rotation from parent frame
  double lower = -M_PI;
  double upper = M_PI;
};

/// Serial chain: base mount transform, ordered joints, tool-point offset in
/// the last joint frame. Loadable from a plain-text description (see
/// load_chain for the key set).
class KinematicChain {
 public:
  KinematicChain() = default;

  void set_mount(const Pose& mount) { mount_ = mount; }
  const Pose& mount() const { return mount_; }
  void set_ee_offset(const Eigen::Vector3d& offset) { ee_offset_ = offset; }
  const Eigen::Vector3d& ee_offset() const { return ee_offset_; }

  void add_joint(Joint j);
  const std::vector<Joint>& joints() const { return joints_; }
  int dof() const { return static_cast<int>(joints_.size()); }

  JointVector clamp_to_limits(const JointVector& q) const;
  JointVector mid_position() const;
  bool within_limits(const JointVector& q, double tol = 1e-9) const;

  /// 6-DoF arm used across the project (yaw-pitch-pitch-roll-pitch-roll,
  /// ~0.76 m reach), mounted on the quadruped back.
  static KinematicChain default_arm();

  /// default_arm prefixed with two virtual body-posture joints
  /// (vertical prismatic + pitch) standing in for whole-body reach.
  static KinematicChain body_arm();

 private:
  Pose mount_;
  std::vector<Joint> joints_;
  Eigen::Vector3d ee_offset_ = Eigen::Vector3d::Zero();
};

/// Plain-text chain description IO. Round trip is exact.
/// Keys: `mount_translation x y z`, `mount_rpy r p y`, `ee_offset x y z`, and
/// one `joint` line per joint with `name= type= axis= offset= rpy= lower= upper=`.
KinematicChain load_chain(const std::string& path);
void save_chain(const KinematicChain& chain, const std::string& path);
KinematicChain parse_chain(const std::string& text);
std::string serialize_chain(const KinematicChain& chain);

/// End-effector pose in the chain's base frame (mount included).
Pose forward_kinematics(const KinematicChain& chain, const JointVector& q);

/// Geometric Jacobian of the end-effector, rows [linear(3); angular(3)].
Jacobian6 jacobian(const KinematicChain& chain, const JointVector& q);

struct SingularJacobianError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One pseudoinverse step dq = J^T (J J^T)^-1 e; with damping,
/// dq = J^T (J J^T + lambda^2 I)^-1 e. Throws SingularJacobianError when
/// J J^T is singular and damping is disabled.
Eigen::VectorXd ik_step(const Jacobian6& J, const Eigen::Matrix<double, 6, 1>& e,
                        bool damped = true, double damping = 0.05);

struct IkOptions {
  double pos_tol = 1e-4;    // meters
  double orn_tol = 1e-3;    // radians
  int max_iters = 200;
  bool damped = true;
  double damping = 0.05;
  double step_scale = 1.0;
  int restarts = 16;        // deterministic perturbed restarts on stall
};

struct IkResult {
  JointVector q;
  double pos_error = 0.0;
  double orn_error = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> error_trace;  // accepted-iterate error norms, per attempt start
};

/// Iterative IK on [position; Euler] error with joint-limit clamping after
/// every iteration. Non-convergence is reported, not thrown; the best
/// iterate is returned.
IkResult solve_ik(const KinematicChain& chain, const JointVector& q0, const Pose& target,
                  const IkOptions& opts = {});

/// Spherical convention: x = l cos(p) cos(y), y = l cos(p) sin(y), z = l sin(p).
/// l must be positive.
Eigen::Vector3d spherical_to_cartesian(double l, double p, double y);

struct Spherical {
  double l = 0.0;
  double p = 0.0;
  double y = 0.0;
};
Spherical cartesian_to_spherical(const Eigen::Vector3d& v);

}  // namespace locoman
