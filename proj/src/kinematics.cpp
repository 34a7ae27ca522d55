#include "locoman/kinematics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace locoman {

double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a <= 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

Eigen::Vector3d euler_from_quaternion(const Eigen::Quaterniond& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  const double roll = std::atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y));
  double sp = 2.0 * (w * y - z * x);
  sp = std::clamp(sp, -1.0, 1.0);
  const double pitch = std::asin(sp);
  const double yaw = std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
  return {roll, pitch, yaw};
}

Eigen::Quaterniond quaternion_from_euler(double roll, double pitch, double yaw) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                            Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                            Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
      .normalized();
}

Eigen::Quaterniond quaternion_from_euler(const Eigen::Vector3d& rpy) {
  return quaternion_from_euler(rpy.x(), rpy.y(), rpy.z());
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = orientation.toRotationMatrix();
  m.topRightCorner<3, 1>() = position;
  return m;
}

Eigen::Matrix<double, 6, 1> pose_error(const Pose& target, const Pose& current) {
  Eigen::Matrix<double, 6, 1> e;
  e.head<3>() = target.position - current.position;
  const Eigen::Vector3d de = target.euler() - current.euler();
  for (int i = 0; i < 3; ++i) e[3 + i] = wrap_angle(de[i]);
  return e;
}

void KinematicChain::add_joint(Joint j) {
  if (j.lower >= j.upper) throw std::invalid_argument("joint '" + j.name + "': lower >= upper");
  const double n = j.axis.norm();
  if (n < 1e-12) throw std::invalid_argument("joint '" + j.name + "': zero axis");
  // Leave already-unit axes untouched so save/load round-trips bit-exactly.
  if (std::abs(n - 1.0) > 1e-9) j.axis /= n;
  joints_.push_back(std::move(j));
}

JointVector KinematicChain::clamp_to_limits(const JointVector& q) const {
  JointVector out = q;
  for (int i = 0; i < dof(); ++i) out[i] = std::clamp(q[i], joints_[i].lower, joints_[i].upper);
  return out;
}

JointVector KinematicChain::mid_position() const {
  JointVector q(dof());
  for (int i = 0; i < dof(); ++i) q[i] = 0.5 * (joints_[i].lower + joints_[i].upper);
  return q;
}

bool KinematicChain::within_limits(const JointVector& q, double tol) const {
  for (int i = 0; i < dof(); ++i)
    if (q[i] < joints_[i].lower - tol || q[i] > joints_[i].upper + tol) return false;
  return true;
}

KinematicChain KinematicChain::default_arm() {
  KinematicChain c;
  c.set_mount(Pose{{0.0, 0.0, 0.07}, Eigen::Quaterniond::Identity()});
  c.add_joint({"shoulder_yaw", JointType::revolute, Eigen::Vector3d::UnitZ(),
               {0.0, 0.0, 0.045}, Eigen::Vector3d::Zero(), -2.7, 2.7});
  c.add_joint({"shoulder_pitch", JointType::revolute, Eigen::Vector3d::UnitY(),
               {0.0, 0.0, 0.042}, Eigen::Vector3d::Zero(), -2.9, 2.9});
  c.add_joint({"elbow_pitch", JointType::revolute, Eigen::Vector3d::UnitY(),
               {0.35, 0.0, 0.0}, Eigen::Vector3d::Zero(), -2.8, 2.8});
  c.add_joint({"forearm_roll", JointType::revolute, Eigen::Vector3d::UnitX(),
               {0.22, 0.0, 0.0}, Eigen::Vector3d::Zero(), -2.8, 2.8});
  c.add_joint({"wrist_pitch", JointType::revolute, Eigen::Vector3d::UnitY(),
               {0.07, 0.0, 0.0}, Eigen::Vector3d::Zero(), -2.6, 2.6});
  c.add_joint({"wrist_roll", JointType::revolute, Eigen::Vector3d::UnitX(),
               {0.05, 0.0, 0.0}, Eigen::Vector3d::Zero(), -2.9, 2.9});
  c.set_ee_offset({0.06, 0.0, 0.0});
  return c;
}

KinematicChain KinematicChain::body_arm() {
  KinematicChain arm = default_arm();
  KinematicChain c;
  c.set_mount(Pose{});
  c.add_joint({"body_lift", JointType::prismatic, Eigen::Vector3d::UnitZ(),
               Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), -0.16, 0.10});
  c.add_joint({"body_pitch", JointType::revolute, Eigen::Vector3d::UnitY(),
               Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), -0.55, 0.55});
  for (Joint j : arm.joints()) {
    if (j.name == "shoulder_yaw") j.offset += arm.mount().position;
    c.add_joint(std::move(j));
  }
  c.set_ee_offset(arm.ee_offset());
  return c;
}

namespace {

Pose joint_transform(const Joint& j, double q) {
  Pose p;
  p.position = j.offset;
  p.orientation = quaternion_from_euler(j.rpy);
  if (j.type == JointType::revolute) {
    p.orientation = (p.orientation * Eigen::Quaterniond(Eigen::AngleAxisd(q, j.axis))).normalized();
  } else {
    p.position += p.orientation * (j.axis * q);
  }
  return p;
}

}  // namespace

Pose forward_kinematics(const KinematicChain& chain, const JointVector& q) {
  if (q.size() != chain.dof())
    throw std::invalid_argument("forward_kinematics: q has " + std::to_string(q.size()) +
                                " entries, chain has " + std::to_string(chain.dof()) + " joints");
  Pose t = chain.mount();
  for (int i = 0; i < chain.dof(); ++i) t = t * joint_transform(chain.joints()[i], q[i]);
  Pose ee = t;
  ee.position = t.apply(chain.ee_offset());
  return ee;
}

Jacobian6 jacobian(const KinematicChain& chain, const JointVector& q) {
  if (q.size() != chain.dof())
    throw std::invalid_argument("jacobian: q/chain dimension mismatch");
  const int n = chain.dof();
  Jacobian6 J(6, n);

  // Walk the chain once, recording each joint's world axis and origin.
  std::vector<Eigen::Vector3d> axes(n), origins(n);
  Pose t = chain.mount();
  for (int i = 0; i < n; ++i) {
    const Joint& j = chain.joints()[i];
    Pose fixed;
    fixed.position = j.offset;
    fixed.orientation = quaternion_from_euler(j.rpy);
    t = t * fixed;
    axes[i] = t.orientation * j.axis;
    origins[i] = t.position;
    if (j.type == JointType::revolute) {
      Pose rot;
      rot.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(q[i], j.axis));
      t = t * rot;
    } else {
      Pose tr;
      tr.position = j.axis * q[i];
      t = t * tr;
    }
  }
  const Eigen::Vector3d p_ee = t.apply(chain.ee_offset());

  for (int i = 0; i < n; ++i) {
    if (chain.joints()[i].type == JointType::revolute) {
      J.block<3, 1>(0, i) = axes[i].cross(p_ee - origins[i]);
      J.block<3, 1>(3, i) = axes[i];
    } else {
      J.block<3, 1>(0, i) = axes[i];
      J.block<3, 1>(3, i).setZero();
    }
  }
  return J;
}

Eigen::VectorXd ik_step(const Jacobian6& J, const Eigen::Matrix<double, 6, 1>& e, bool damped,
                        double damping) {
  Eigen::Matrix<double, 6, 6> JJt = J * J.transpose();
  if (damped) {
    JJt += damping * damping * Eigen::Matrix<double, 6, 6>::Identity();
    return J.transpose() * JJt.ldlt().solve(e);
  }
  Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(JJt);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible())
    throw SingularJacobianError("ik_step: J J^T is singular; enable damping");
  return J.transpose() * lu.solve(e);
}

namespace {

/// Map from Z-Y-X Euler-angle rates to world angular velocity. Applying it to
/// the Euler difference makes the error commensurate with the geometric
/// Jacobian's angular rows; the reported error stays the plain Euler norm.
Eigen::Matrix3d euler_rate_map(const Eigen::Vector3d& rpy) {
  const double th = rpy.y(), ps = rpy.z();
  Eigen::Matrix3d E;
  E << std::cos(th) * std::cos(ps), -std::sin(ps), 0.0,
       std::cos(th) * std::sin(ps),  std::cos(ps), 0.0,
      -std::sin(th),                 0.0,          1.0;
  return E;
}

}  // namespace

IkResult solve_ik(const KinematicChain& chain, const JointVector& q0, const Pose& target,
                  const IkOptions& opts) {
  if (q0.size() != chain.dof())
    throw std::invalid_argument("solve_ik: q0/chain dimension mismatch");

  IkResult best;
  best.q = chain.clamp_to_limits(q0);
  best.pos_error = std::numeric_limits<double>::infinity();
  best.orn_error = std::numeric_limits<double>::infinity();
  int iterations = 0;

  // Deterministic restart offsets; no rng so repeated solves are identical.
  uint64_t mix = 0x51a2b3c4d5e6f708ULL;
  auto perturb = [&mix](double lo, double hi) {
    mix ^= mix << 13;
    mix ^= mix >> 7;
    mix ^= mix << 17;
    return lo + (hi - lo) * (static_cast<double>(mix >> 11) * 0x1.0p-53);
  };

  for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
    JointVector q;
    if (attempt == 0) {
      q = chain.clamp_to_limits(q0);
    } else {
      q.resize(chain.dof());
      for (int i = 0; i < chain.dof(); ++i)
        q[i] = perturb(chain.joints()[i].lower, chain.joints()[i].upper);
    }

    Pose current = forward_kinematics(chain, q);
    Eigen::Matrix<double, 6, 1> e = pose_error(target, current);
    double err = e.norm();
    int stall = 0;
    if (attempt == 0) best.error_trace.push_back(err);

    for (int it = 0; it < opts.max_iters; ++it) {
      ++iterations;
      const Jacobian6 J = jacobian(chain, q);
      Eigen::Matrix<double, 6, 1> e_step = e;
      e_step.tail<3>() = euler_rate_map(current.euler()) * e.tail<3>();
      Eigen::VectorXd dq;
      try {
        dq = ik_step(J, e_step, opts.damped, opts.damping);
      } catch (const SingularJacobianError&) {
        break;
      }

      // Backtracking keeps the accepted-iterate error non-increasing.
      double scale = opts.step_scale;
      bool accepted = false;
      for (int ls = 0; ls < 8; ++ls) {
        JointVector q_try = chain.clamp_to_limits(q + scale * dq);
        Pose cur_try = forward_kinematics(chain, q_try);
        Eigen::Matrix<double, 6, 1> e_try = pose_error(target, cur_try);
        const double err_try = e_try.norm();
        if (err_try < err) {
          q = std::move(q_try);
          current = cur_try;
          e = e_try;
          err = err_try;
          accepted = true;
          if (attempt == 0) best.error_trace.push_back(err);
          break;
        }
        scale *= 0.5;
      }
      if (!accepted) {
        if (++stall >= 3) break;
      } else {
        stall = 0;
      }
      if (e.head<3>().norm() < opts.pos_tol && e.tail<3>().norm() < opts.orn_tol) break;
    }

    const double pos = e.head<3>().norm();
    const double orn = e.tail<3>().norm();
    if (pos + 0.2 * orn < best.pos_error + 0.2 * best.orn_error) {
      best.q = q;
      best.pos_error = pos;
      best.orn_error = orn;
    }
    if (best.pos_error < opts.pos_tol && best.orn_error < opts.orn_tol) break;
  }

  // Position-priority polish: when the full pose stalls short of tolerance,
  // finish on the position alone and keep whatever orientation results.
  if (best.pos_error >= opts.pos_tol) {
    JointVector q = best.q;
    Pose current = forward_kinematics(chain, q);
    Eigen::Matrix<double, 6, 1> e = pose_error(target, current);
    double perr = e.head<3>().norm();
    for (int it = 0; it < opts.max_iters && perr >= opts.pos_tol; ++it) {
      ++iterations;
      const Jacobian6 J = jacobian(chain, q);
      Eigen::Matrix<double, 6, 1> e_pos = Eigen::Matrix<double, 6, 1>::Zero();
      e_pos.head<3>() = e.head<3>();
      Eigen::VectorXd dq;
      try {
        dq = ik_step(J, e_pos, opts.damped, opts.damping);
      } catch (const SingularJacobianError&) {
        break;
      }
      double scale = opts.step_scale;
      bool accepted = false;
      for (int ls = 0; ls < 8; ++ls) {
        JointVector q_try = chain.clamp_to_limits(q + scale * dq);
        Pose cur_try = forward_kinematics(chain, q_try);
        Eigen::Matrix<double, 6, 1> e_try = pose_error(target, cur_try);
        if (e_try.head<3>().norm() < perr) {
          q = std::move(q_try);
          current = cur_try;
          e = e_try;
          perr = e.head<3>().norm();
          accepted = true;
          break;
        }
        scale *= 0.5;
      }
      if (!accepted) break;
    }
    if (perr < best.pos_error) {
      best.q = q;
      best.pos_error = perr;
      best.orn_error = e.tail<3>().norm();
    }
  }

  best.converged = best.pos_error < opts.pos_tol && best.orn_error < opts.orn_tol;
  best.iterations = iterations;
  return best;
}

Eigen::Vector3d spherical_to_cartesian(double l, double p, double y) {
  if (l <= 0.0) throw std::domain_error("spherical_to_cartesian: l must be positive");
  return {l * std::cos(p) * std::cos(y), l * std::cos(p) * std::sin(y), l * std::sin(p)};
}

Spherical cartesian_to_spherical(const Eigen::Vector3d& v) {
  Spherical s;
  s.l = v.norm();
  if (s.l <= 0.0) throw std::domain_error("cartesian_to_spherical: zero vector");
  s.p = std::asin(std::clamp(v.z() / s.l, -1.0, 1.0));
  s.y = std::atan2(v.y(), v.x());
  return s;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_vec3(const Eigen::Vector3d& v) {
  return fmt_double(v.x()) + "," + fmt_double(v.y()) + "," + fmt_double(v.z());
}

Eigen::Vector3d parse_vec3(const std::string& s, const std::string& what) {
  Eigen::Vector3d v;
  char c1, c2;
  std::istringstream in(s);
  if (!(in >> v.x() >> c1 >> v.y() >> c2 >> v.z()) || c1 != ',' || c2 != ',')
    throw std::invalid_argument("chain description: bad vector for " + what + ": '" + s + "'");
  return v;
}

}  // namespace

std::string serialize_chain(const KinematicChain& chain) {
  std::ostringstream out;
  out << "# serial chain description\n";
  out << "mount_translation " << fmt_vec3(chain.mount().position) << "\n";
  out << "mount_rpy " << fmt_vec3(euler_from_quaternion(chain.mount().orientation)) << "\n";
  out << "ee_offset " << fmt_vec3(chain.ee_offset()) << "\n";
  for (const Joint& j : chain.joints()) {
    out << "joint name=" << j.name
        << " type=" << (j.type == JointType::revolute ? "revolute" : "prismatic")
        << " axis=" << fmt_vec3(j.axis) << " offset=" << fmt_vec3(j.offset)
        << " rpy=" << fmt_vec3(j.rpy) << " lower=" << fmt_double(j.lower)
        << " upper=" << fmt_double(j.upper) << "\n";
  }
  return out.str();
}

KinematicChain parse_chain(const std::string& text) {
  KinematicChain chain;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    auto rest = [&ls]() {
      std::string r;
      std::getline(ls, r);
      const size_t b = r.find_first_not_of(" \t");
      return b == std::string::npos ? std::string() : r.substr(b);
    };
    if (head == "mount_translation") {
      Pose m = chain.mount();
      m.position = parse_vec3(rest(), head);
      chain.set_mount(m);
    } else if (head == "mount_rpy") {
      Pose m = chain.mount();
      m.orientation = quaternion_from_euler(parse_vec3(rest(), head));
      chain.set_mount(m);
    } else if (head == "ee_offset") {
      chain.set_ee_offset(parse_vec3(rest(), head));
    } else if (head == "joint") {
      Joint j;
      std::string kv;
      bool has_name = false, has_axis = false, has_limits_lo = false, has_limits_hi = false;
      while (ls >> kv) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
          throw std::invalid_argument("chain description line " + std::to_string(lineno) +
                                      ": expected key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        if (key == "name") {
          j.name = val;
          has_name = true;
        } else if (key == "type") {
          if (val == "revolute")
            j.type = JointType::revolute;
          else if (val == "prismatic")
            j.type = JointType::prismatic;
          else
            throw std::invalid_argument("chain description: unknown joint type '" + val + "'");
        } else if (key == "axis") {
          j.axis = parse_vec3(val, "axis");
          has_axis = true;
        } else if (key == "offset") {
          j.offset = parse_vec3(val, "offset");
        } else if (key == "rpy") {
          j.rpy = parse_vec3(val, "rpy");
        } else if (key == "lower") {
          j.lower = std::stod(val);
          has_limits_lo = true;
        } else if (key == "upper") {
          j.upper = std::stod(val);
          has_limits_hi = true;
        } else {
          throw std::invalid_argument("chain description line " + std::to_string(lineno) +
                                      ": unknown key '" + key + "'");
        }
      }
      if (!has_name || !has_axis || !has_limits_lo || !has_limits_hi)
        throw std::invalid_argument("chain description line " + std::to_string(lineno) +
                                    ": joint requires name, axis, lower, upper");
      chain.add_joint(std::move(j));
    } else {
      throw std::invalid_argument("chain description line " + std::to_string(lineno) +
                                  ": unknown directive '" + head + "'");
    }
  }
  return chain;
}

KinematicChain load_chain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_chain: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_chain(ss.str());
}

void save_chain(const KinematicChain& chain, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_chain: cannot open " + path);
  out << serialize_chain(chain);
}

}  // namespace locoman
