#include "locoman/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <thread>

#include "locoman/metrics.hpp"
#include "locoman/rng.hpp"

namespace locoman {

// ---------------------------------------------------------------------------
// Codec

namespace {

constexpr size_t kMaxFrame = 1 << 20;

void put_u32le(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32le(const std::string& s, size_t pos) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(static_cast<uint8_t>(s[pos + static_cast<size_t>(i)])) << (8 * i);
  return v;
}

bool known_type(uint8_t t) {
  return t == static_cast<uint8_t>(MessageType::goal_request) ||
         t == static_cast<uint8_t>(MessageType::command_response) ||
         t == static_cast<uint8_t>(MessageType::heartbeat);
}

}  // namespace

std::string encode_message(const WireMessage& msg) {
  std::string out;
  const uint32_t length = 1 + 4 * static_cast<uint32_t>(msg.payload.size());
  put_u32le(out, length);
  out.push_back(static_cast<char>(msg.type));
  for (float f : msg.payload) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32le(out, bits);
  }
  return out;
}

WireMessage decode_message(const std::string& bytes) {
  if (bytes.size() < 5) throw ProtocolError("frame shorter than header", bytes.size());
  const uint32_t length = get_u32le(bytes, 0);
  if (length < 1) throw ProtocolError("length field smaller than the type byte", 0);
  if (length > kMaxFrame) throw ProtocolError("frame length exceeds the limit", 0);
  if (bytes.size() != 4 + static_cast<size_t>(length))
    throw ProtocolError("frame length mismatch: header says " + std::to_string(length) +
                            ", got " + std::to_string(bytes.size() - 4),
                        4);
  const uint8_t type = static_cast<uint8_t>(bytes[4]);
  if (!known_type(type)) throw ProtocolError("unknown message type", 4);
  if ((length - 1) % 4 != 0) throw ProtocolError("payload is not a whole number of floats", 5);

  WireMessage msg;
  msg.type = static_cast<MessageType>(type);
  const size_t n = (length - 1) / 4;
  msg.payload.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const uint32_t bits = get_u32le(bytes, 5 + 4 * i);
    std::memcpy(&msg.payload[i], &bits, 4);
  }
  return msg;
}

std::vector<WireMessage> FrameDecoder::feed(const std::string& bytes) {
  buffer_ += bytes;
  std::vector<WireMessage> out;
  while (buffer_.size() >= 4) {
    const uint32_t length = get_u32le(buffer_, 0);
    if (length < 1 || length > kMaxFrame)
      throw ProtocolError("stream corrupted: bad length field", 0);
    if (buffer_.size() < 4 + static_cast<size_t>(length)) break;
    out.push_back(decode_message(buffer_.substr(0, 4 + length)));
    buffer_.erase(0, 4 + length);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scheduler

void VirtualScheduler::schedule_cls(long long t_ns, int cls, std::function<void()> fn) {
  queue_.push(Event{std::max(t_ns, now_ns_), cls, seq_++, std::move(fn)});
}

void VirtualScheduler::run_until(double t_end, const std::function<void(double)>& pace) {
  const long long end_ns = to_ns(t_end);
  while (!queue_.empty() && queue_.top().time_ns <= end_ns) {
    Event e = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();
    now_ns_ = e.time_ns;
    if (pace) pace(now());
    e.fn();
  }
  now_ns_ = end_ns;
}

void TimingConfig::validate() const {
  if (low_period <= 0 || request_period <= 0 || arm_period <= 0)
    throw std::invalid_argument("TimingConfig: periods must be positive");
  if (!(arm_period < low_period && low_period < request_period))
    throw std::invalid_argument("TimingConfig: need arm period < low period < request period");
  if (low_period / arm_period < 16.0 - 1e-9)
    throw std::invalid_argument("TimingConfig: arm loop must run at >= 16x the low-level rate");
}

// ---------------------------------------------------------------------------
// Harness

namespace {

struct HarnessState {
  TimingConfig timing;
  Rng rng{0};
  KinematicChain arm = KinematicChain::default_arm();
  SurrogateParams surrogate;
  EpisodeParams ep;
  GaitSchedule gait = GaitSchedule::trot();
  RobotState state;
  Eigen::VectorXd z_env = Eigen::VectorXd::Zero(kExtrinsicsDim);

  uint64_t next_command_id = 1;
  uint64_t latest_received_id = 0;
  HighAction latest_received;
  double latest_received_emit_time = 0.0;
  uint64_t last_applied_id = 0;
  Pose ee_cmd;
  LowCommand held;
  Eigen::Matrix<double, 9, 1> last_applied_vec = Eigen::Matrix<double, 9, 1>::Zero();

  bool server_busy = false;
  bool server_has_pending = false;
  Eigen::VectorXd pending_request;
  long responses_emitted = 0;

  double last_delivery_up = 0.0;
  double last_delivery_down = 0.0;

  HarnessResult result;
  std::string log;
  long low_tick_index = 0;
  long long receiver_next_ns = 0;
  long long low_next_ns = 0;
  long long arm_next_ns = 0;
};

Eigen::VectorXd request_payload(const HarnessState& h) {
  Eigen::VectorXd v(kGoalRequestFloats);
  int i = 0;
  v.segment<12>(i) = h.state.leg_q;
  v.segment<6>(i + 12) = h.state.arm_q;
  v[i + 18] = h.state.gripper;
  i += 19;
  v.segment<12>(i) = h.state.leg_dq;
  v.segment<6>(i + 12) = h.state.arm_dq;
  i += 18;
  const Pose ee = ee_pose_arm_base(h.state, h.arm);
  v.segment<3>(i) = ee.position;
  v.segment<3>(i + 3) = ee.euler();
  i += 6;
  v.segment<3>(i) = h.state.base_lin_vel;
  i += 3;
  v.segment<9>(i) = h.last_applied_vec;
  return v;
}

double sample_latency(const LatencyModel& m, Rng& rng) {
  return m.fixed + (m.jitter > 0.0 ? rng.uniform(0.0, m.jitter) : 0.0);
}

void log_line(HarnessState& h, MetricRow row) {
  h.log += to_json_line(row);
  h.log += "\n";
}

Pose held_target_base(const HarnessState& h) {
  const InvariantFrame frame = InvariantFrame::from_base(h.state.base, 0.55);
  const Eigen::Vector3d world_p = frame.to_world(h.held.p_cmd);
  const Pose inv = h.state.base.inverse();
  return Pose{inv.apply(world_p),
              (inv.orientation * (quaternion_from_euler(0.0, 0.0, frame.yaw) *
                                  quaternion_from_euler(h.held.o_cmd)))
                  .normalized()};
}

}  // namespace

HarnessResult run_harness(const TimingConfig& timing, HighServerFn server, LowLegsFn low_legs,
                          HarnessMode mode) {
  timing.validate();
  auto h = std::make_shared<HarnessState>();
  h->timing = timing;
  h->rng = Rng(timing.seed);
  h->surrogate.arm_substeps = 0;  // the arm actor owns the fast loop
  h->surrogate.gait_coupling = false;
  h->state.leg_q = default_leg_posture();
  double ext = 0.0;
  for (int f = 0; f < 4; ++f)
    ext += leg_extension(h->state.leg_q[3 * f + 1], h->state.leg_q[3 * f + 2], h->surrogate);
  h->state.base.position = {0.0, 0.0, ext / 4.0};
  h->state.arm_q.resize(6);
  h->state.arm_q << 0.0, -0.73, 1.57, 0.0, -0.35, 0.0;
  const InvariantFrame frame0 = InvariantFrame::from_base(h->state.base, 0.55);
  h->ee_cmd.position =
      frame0.to_frame(h->state.base.apply(ee_pose_arm_base(h->state, h->arm).position));
  h->held.p_cmd = h->ee_cmd.position;

  auto sched = std::make_shared<VirtualScheduler>();

  // ---- server: serial processing; the newest pending request wins
  auto server_cycle = std::make_shared<std::function<void()>>();
  *server_cycle = [h, sched, server, server_cycle]() {
    if (h->server_busy || !h->server_has_pending) return;
    if (h->timing.server_max_responses >= 0 &&
        h->responses_emitted >= h->timing.server_max_responses)
      return;  // silent server: requests keep arriving, nothing comes back
    h->server_busy = true;
    const Eigen::VectorXd req = h->pending_request;
    h->server_has_pending = false;
    const double proc = h->timing.server_proc_max > h->timing.server_proc_min
                            ? h->rng.uniform(h->timing.server_proc_min, h->timing.server_proc_max)
                            : h->timing.server_proc_min;
    sched->schedule_delivery(sched->now() + proc, [h, sched, server, req, server_cycle]() {
      h->server_busy = false;
      const Eigen::Matrix<double, 9, 1> cmd = server(req);
      ++h->responses_emitted;
      const uint64_t id = h->next_command_id++;
      const double emit_time = sched->now();
      WireMessage msg;
      msg.type = MessageType::command_response;
      msg.payload.resize(kCommandFloats);
      for (int i = 0; i < kCommandFloats; ++i)
        msg.payload[static_cast<size_t>(i)] = static_cast<float>(cmd[i]);
      const std::string bytes = encode_message(msg);
      log_line(*h, {{"time", emit_time},
                    {"actor", std::string("server")},
                    {"event", std::string("emit")},
                    {"command_id", static_cast<long>(id)}});
      const double delay = sample_latency(h->timing.response_latency, h->rng);
      const double deliver = std::max(sched->now() + delay, h->last_delivery_down);
      h->last_delivery_down = deliver;
      sched->schedule_delivery(deliver, [h, sched, bytes, id, emit_time]() {
        const WireMessage m = decode_message(bytes);
        Eigen::Matrix<double, 9, 1> v;
        for (int i = 0; i < 9; ++i) v[i] = static_cast<double>(m.payload[static_cast<size_t>(i)]);
        h->latest_received = HighAction::from_vector(v);
        h->latest_received_id = id;
        h->latest_received_emit_time = emit_time;
        ++h->result.responses_received;
        log_line(*h, {{"time", sched->now()},
                      {"actor", std::string("goal_receiver")},
                      {"event", std::string("response")},
                      {"command_id", static_cast<long>(id)}});
      });
      (*server_cycle)();  // start on a queued request, if any arrived meanwhile
    });
  };

  // ---- goal receiver: periodic request with the latest proprioception
  auto receiver_tick = std::make_shared<std::function<void()>>();
  *receiver_tick = [h, sched, receiver_tick, server_cycle]() {
    const Eigen::VectorXd payload = request_payload(*h);
    WireMessage msg;
    msg.type = MessageType::goal_request;
    msg.payload.resize(kGoalRequestFloats);
    for (int i = 0; i < kGoalRequestFloats; ++i)
      msg.payload[static_cast<size_t>(i)] = static_cast<float>(payload[i]);
    const std::string bytes = encode_message(msg);
    ++h->result.requests_sent;
    log_line(*h, {{"time", sched->now()},
                  {"actor", std::string("goal_receiver")},
                  {"event", std::string("request")}});
    const double delay = sample_latency(h->timing.request_latency, h->rng);
    const double deliver = std::max(sched->now() + delay, h->last_delivery_up);
    h->last_delivery_up = deliver;
    sched->schedule_delivery(deliver, [h, bytes, server_cycle]() {
      const WireMessage m = decode_message(bytes);
      Eigen::VectorXd req(static_cast<int>(m.payload.size()));
      for (size_t i = 0; i < m.payload.size(); ++i) req[static_cast<int>(i)] = m.payload[i];
      h->pending_request = req;  // newest request wins
      h->server_has_pending = true;
      (*server_cycle)();
    });
    h->receiver_next_ns += VirtualScheduler::to_ns(h->timing.request_period);
    sched->schedule_ns(h->receiver_next_ns, *receiver_tick);
  };

  // ---- low loop: consume the latest command, keep holding stale ones
  auto low_tick = std::make_shared<std::function<void()>>();
  *low_tick = [h, sched, low_tick, low_legs]() {
    const long tick = h->low_tick_index++;
    if (h->latest_received_id != h->last_applied_id) {
      const HighAction& a = h->latest_received;
      Eigen::Vector3d dp = a.dpose.head<3>(), dr = a.dpose.tail<3>();
      for (int i = 0; i < 3; ++i) {
        dp[i] = std::clamp(dp[i], -0.04, 0.04);
        dr[i] = std::clamp(dr[i], -0.1, 0.1);
      }
      h->ee_cmd.position += dp;
      h->ee_cmd.orientation =
          (h->ee_cmd.orientation * quaternion_from_euler(dr.x(), dr.y(), dr.z())).normalized();
      h->held.p_cmd = h->ee_cmd.position;
      h->held.o_cmd = euler_from_quaternion(h->ee_cmd.orientation);
      h->held.v_lin = std::clamp(a.velocity[0], -0.6, 0.6);
      h->held.yaw_rate = std::clamp(a.velocity[1], -1.0, 1.0);
      if (a.gripper_close) {
        h->held.v_lin = 0.0;
        h->held.yaw_rate = 0.0;
      }
      h->last_applied_id = h->latest_received_id;
      h->last_applied_vec = a.vector();
      CommandApplication app;
      app.command_id = h->latest_received_id;
      app.low_tick = tick;
      app.emitted_time = h->latest_received_emit_time;
      app.applied_time = sched->now();
      h->result.applications.push_back(app);
      log_line(*h, {{"time", sched->now()},
                    {"actor", std::string("low_loop")},
                    {"event", std::string("apply")},
                    {"command_id", static_cast<long>(app.command_id)},
                    {"tick", tick},
                    {"v_lin", h->held.v_lin}});
    }

    Eigen::VectorXd legs;
    if (low_legs) {
      const Eigen::VectorXd obs =
          assemble_obs_low(h->state, Eigen::VectorXd::Zero(12), h->z_env,
                           timing_reference(h->gait, sched->now()), h->held);
      legs = low_legs(obs);
    } else {
      legs = gait_reference_legs(h->gait, sched->now(), h->surrogate);
    }
    LowStepInput in;
    in.leg_targets = legs;
    in.ee_target_base = held_target_base(*h);
    in.v_lin_cmd = h->held.v_lin;
    in.yaw_rate_cmd = h->held.yaw_rate;
    h->state = step_low(h->state, in, h->arm, h->surrogate, h->ep, h->gait, sched->now(), h->rng);
    ++h->result.low_ticks;
    h->low_next_ns += VirtualScheduler::to_ns(h->timing.low_period);
    sched->schedule_ns(h->low_next_ns, *low_tick);
  };

  // ---- arm loop: fast IK micro steps toward the held command
  auto arm_tick = std::make_shared<std::function<void()>>();
  *arm_tick = [h, sched, arm_tick]() {
    const Pose target = held_target_base(*h);
    const double max_step = h->surrogate.arm_max_speed * h->timing.arm_period;
    const Eigen::VectorXd q_new = arm_ik_step_toward(h->arm, h->state.arm_q, target, max_step);
    h->state.arm_dq = (q_new - h->state.arm_q) / h->timing.arm_period;
    h->state.arm_q = q_new;
    ++h->result.arm_ticks;
    h->arm_next_ns += VirtualScheduler::to_ns(h->timing.arm_period);
    sched->schedule_ns(h->arm_next_ns, *arm_tick);
  };

  sched->schedule(0.0, *receiver_tick);
  sched->schedule(0.0, *low_tick);
  sched->schedule(0.0, *arm_tick);

  if (mode == HarnessMode::real_time) {
    const auto wall_start = std::chrono::steady_clock::now();
    sched->run_until(timing.duration, [wall_start](double t) {
      // absolute deadlines: no drift accumulation across events
      std::this_thread::sleep_until(wall_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                     std::chrono::duration<double>(t)));
    });
  } else {
    sched->run_until(timing.duration);
  }

  for (size_t i = 1; i < h->result.applications.size(); ++i)
    h->result.ticks_per_command.push_back(h->result.applications[i].low_tick -
                                          h->result.applications[i - 1].low_tick);
  h->result.last_applied_id = h->last_applied_id;
  h->result.final_command = h->held;
  h->result.final_state = h->state;
  h->result.log = std::move(h->log);
  return std::move(h->result);
}

}  // namespace locoman
