#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <string>
#include <vector>

#include "locoman/sim_env.hpp"

namespace locoman {

// ---------------------------------------------------------------------------
// Framed wire protocol: [length u32 LE][type u8][payload f32 LE ...]
// length counts the type byte plus the payload bytes.

enum class MessageType : uint8_t { goal_request = 1, command_response = 2, heartbeat = 3 };

struct WireMessage {
  MessageType type = MessageType::heartbeat;
  std::vector<float> payload;
};

struct ProtocolError : std::runtime_error {
  size_t offset;  // byte offset of the fault within the frame
  ProtocolError(const std::string& what, size_t off)
      : std::runtime_error(what + " (offset " + std::to_string(off) + ")"), offset(off) {}
};

/// Goal-request payload: q(19), dq(18), ee pose(6), base velocity(3), last
/// applied action(9).
inline constexpr int kGoalRequestFloats = 55;
inline constexpr int kCommandFloats = 9;

std::string encode_message(const WireMessage& msg);
/// Decodes exactly one frame; trailing bytes or truncation raise ProtocolError.
WireMessage decode_message(const std::string& bytes);

/// Incremental decoder for byte streams (handles partial frames), making the
/// codec usable over any transport.
class FrameDecoder {
 public:
  std::vector<WireMessage> feed(const std::string& bytes);

 private:
  std::string buffer_;
};

// ---------------------------------------------------------------------------
// Deterministic discrete-event scheduler on an integer nanosecond clock, so
// periodic grids coincide exactly. Two classes order same-time events:
// message deliveries (0) run before periodic ticks (1); ties fall back to
// scheduling order.

class VirtualScheduler {
 public:
  static long long to_ns(double seconds) {
    return static_cast<long long>(std::llround(seconds * 1e9));
  }

  void schedule_ns(long long t_ns, std::function<void()> fn) {
    schedule_cls(t_ns, 1, std::move(fn));
  }
  void schedule_delivery_ns(long long t_ns, std::function<void()> fn) {
    schedule_cls(t_ns, 0, std::move(fn));
  }
  void schedule(double time, std::function<void()> fn) {
    schedule_cls(to_ns(time), 1, std::move(fn));
  }
  void schedule_delivery(double time, std::function<void()> fn) {
    schedule_cls(to_ns(time), 0, std::move(fn));
  }
  /// Run events until the queue empties or time exceeds t_end. The optional
  /// pacer runs before each event (real-time mode sleeps in it).
  void run_until(double t_end, const std::function<void(double)>& pace = nullptr);
  double now() const { return static_cast<double>(now_ns_) * 1e-9; }
  long long now_ns() const { return now_ns_; }

 private:
  struct Event {
    long long time_ns;
    int cls;
    uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Event& o) const {
      if (time_ns != o.time_ns) return time_ns > o.time_ns;
      if (cls != o.cls) return cls > o.cls;
      return seq > o.seq;
    }
  };
  void schedule_cls(long long t_ns, int cls, std::function<void()> fn);

  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  long long now_ns_ = 0;
  uint64_t seq_ = 0;
};

/// Per-message delay = fixed + U(0, jitter); delivery is order-preserving
/// within a channel.
struct LatencyModel {
  double fixed = 0.0;
  double jitter = 0.0;
};

struct TimingConfig {
  double low_period = 0.02;       // 50 Hz quadruped loop
  double request_period = 0.1;    // goal receiver
  double arm_period = 1.0 / 800;  // arm loop
  LatencyModel request_latency;   // client -> server transit
  LatencyModel response_latency;  // server -> client transit
  double server_proc_min = 0.0;   // serial processing time per request
  double server_proc_max = 0.0;
  long server_max_responses = -1;  // >= 0 silences the server afterwards
  double duration = 2.0;           // seconds of virtual time
  uint64_t seed = 0;

  void validate() const;
};

enum class HarnessMode { virtual_time, real_time };

/// The high-level policy behind the server: request payload in, 9-dim
/// command out.
using HighServerFn = std::function<Eigen::Matrix<double, 9, 1>(const Eigen::VectorXd& request)>;
/// Low-level leg policy: 90-dim observation in, 12 leg targets out. An empty
/// function selects the gait-reference legs.
using LowLegsFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct CommandApplication {
  uint64_t command_id = 0;
  long low_tick = 0;        // first low tick that executed this command
  double emitted_time = 0;  // server send time
  double applied_time = 0;  // low-tick time of first application
};

struct HarnessResult {
  long low_ticks = 0;
  long arm_ticks = 0;
  long requests_sent = 0;
  long responses_received = 0;
  std::vector<CommandApplication> applications;
  std::vector<long> ticks_per_command;  // gaps between consecutive applications
  uint64_t last_applied_id = 0;
  LowCommand final_command;
  RobotState final_state;
  std::string log;  // JSON-lines trajectory log, byte-deterministic
};

/// Four logical actors (low loop, arm loop, goal receiver, server) exchanging
/// framed messages over latency-injected channels on one deterministic event
/// queue. The low and arm loops always execute the latest received command
/// and keep holding it until an update arrives. Real-time mode paces the same
/// queue against the monotonic clock.
HarnessResult run_harness(const TimingConfig& timing, HighServerFn server,
                          LowLegsFn low_legs = nullptr,
                          HarnessMode mode = HarnessMode::virtual_time);

}  // namespace locoman
