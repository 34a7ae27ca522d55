#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "locoman/kinematics.hpp"
#include "locoman/rng.hpp"

namespace locoman {

enum class PrimitiveKind { sphere, box, cylinder };

/// Analytic scene primitive. dimensions: sphere (radius,-,-); box half
/// extents (hx,hy,hz); cylinder (radius, half_height,-) along local z.
struct ScenePrimitive {
  PrimitiveKind kind = PrimitiveKind::sphere;
  Eigen::Vector3d dimensions = {0.1, 0.1, 0.1};
  Pose pose;
  int id = 0;
};

struct Scene {
  std::vector<ScenePrimitive> objects;
  int target_id = -1;
};

struct CameraIntrinsics {
  int width = 64;
  int height = 64;
  double fov_h = 1.2;  // radians
  double fov_v = 1.2;
  double far_clip = 3.0;
};

enum class CameraMount { head, wrist };

struct CameraModel {
  CameraMount mount = CameraMount::head;
  Pose offset;  // camera frame in the mount frame; camera looks along +x, z up
  CameraIntrinsics intrinsics;
  double jitter_translation = 0.0;  // per-episode pose jitter ranges
  double jitter_rotation = 0.0;
  int latency_steps = 0;
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // row-major

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<size_t>(w * h), fill) {}
  double& at(int r, int c) { return pixels[static_cast<size_t>(r * width + c)]; }
  double at(int r, int c) const { return pixels[static_cast<size_t>(r * width + c)]; }
};

struct DepthFrame {
  Image depth;                // meters; far_clip where nothing was hit
  std::vector<uint8_t> mask;  // 1 where the nearest hit is the target object
  double timestamp = 0.0;

  uint8_t mask_at(int r, int c) const { return mask[static_cast<size_t>(r * depth.width + c)]; }
};

/// Nearest analytic ray-primitive intersections from the camera pose.
DepthFrame render(const Scene& scene, const Pose& camera_pose, const CameraIntrinsics& cam);

/// Distance along a world ray to the primitive, or a negative value on miss.
double ray_primitive(const ScenePrimitive& prim, const Eigen::Vector3d& origin,
                     const Eigen::Vector3d& dir);

/// Clip to [min_depth, far], suppress non-target pixels to far, map linearly
/// to [0,1] ("segmented depth image").
Image preprocess(const DepthFrame& frame, double min_depth = 0.2, double far = 3.0);

struct AugmentConfig {
  double p_erase = 0.0;
  double erase_max_frac = 0.2;  // >= 1 erases the full frame
  double p_blur = 0.0;
  double blur_sigma_max = 1.5;  // pixels
  double p_noise = 0.0;
  double noise_sigma = 0.02;
  double p_rotate = 0.0;
  double rotate_max_deg = 5.0;
  double fill = 1.0;  // far value after normalization
};

Image augment(const Image& img, Rng& rng, const AugmentConfig& cfg);

struct FrameStack {
  int k = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;  // [k][H][W], channel 0 oldest

  double at(int ch, int r, int c) const {
    return data[static_cast<size_t>((ch * height + r) * width + c)];
  }
};

/// Channel-stack of the k most recent frames, oldest first; a short history
/// repeats its oldest frame.
FrameStack frame_stack(const std::vector<Image>& history, int k = 4);

/// Fixed-latency delivery: the frame read at step t was pushed at step
/// t - latency (the first frame is held until enough history exists).
class FrameDelayLine {
 public:
  explicit FrameDelayLine(int latency) : latency_(latency) {}
  void push(DepthFrame frame);
  const DepthFrame& current() const;
  bool empty() const { return frames_.empty(); }
  int latency() const { return latency_; }

 private:
  int latency_ = 0;
  std::deque<DepthFrame> frames_;
};

/// Synthetic dropout + nearest-neighbour fill; exercises the hole-filling
/// path that real frames need (a no-op on clean simulated frames).
Image fill_holes(const Image& img, double hole_value);

/// Frame dump, magic "VBCD": version u8, width u16, height u16
/// (little-endian), row-major f32 depth, packed mask bits (LSB first).
void save_frame(const std::string& path, const DepthFrame& frame);
DepthFrame load_frame(const std::string& path);

}  // namespace locoman
