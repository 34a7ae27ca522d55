#include "locoman/depth_camera.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace locoman {

namespace {

double ray_sphere(double r, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  const double b = o.dot(d);
  const double c = o.squaredNorm() - r * r;
  const double disc = b * b - c;
  if (disc < 0.0) return -1.0;
  const double s = std::sqrt(disc);
  const double t0 = -b - s, t1 = -b + s;
  if (t0 > 1e-9) return t0;
  if (t1 > 1e-9) return t1;
  return -1.0;
}

double ray_box(const Eigen::Vector3d& half, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-12) {
      if (o[i] < -half[i] || o[i] > half[i]) return -1.0;
      continue;
    }
    double t0 = (-half[i] - o[i]) / d[i];
    double t1 = (half[i] - o[i]) / d[i];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return -1.0;
  }
  if (tmin > 1e-9) return tmin;
  if (tmax > 1e-9) return tmax;
  return -1.0;
}

double ray_cylinder(double r, double half_h, const Eigen::Vector3d& o,
                    const Eigen::Vector3d& d) {
  double best = -1.0;
  // side surface
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-12) {
    const double b = o.x() * d.x() + o.y() * d.y();
    const double c = o.x() * o.x() + o.y() * o.y() - r * r;
    const double disc = b * b - a * c;
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      for (double t : {(-b - s) / a, (-b + s) / a}) {
        if (t > 1e-9 && std::abs(o.z() + t * d.z()) <= half_h) {
          if (best < 0.0 || t < best) best = t;
        }
      }
    }
  }
  // caps
  if (std::abs(d.z()) > 1e-12) {
    for (double zc : {-half_h, half_h}) {
      const double t = (zc - o.z()) / d.z();
      if (t > 1e-9) {
        const double x = o.x() + t * d.x(), y = o.y() + t * d.y();
        if (x * x + y * y <= r * r && (best < 0.0 || t < best)) best = t;
      }
    }
  }
  return best;
}

}  // namespace

double ray_primitive(const ScenePrimitive& prim, const Eigen::Vector3d& origin,
                     const Eigen::Vector3d& dir) {
  // Rigid transform into the primitive frame preserves ray parameter scale.
  const Pose inv = prim.pose.inverse();
  const Eigen::Vector3d o = inv.apply(origin);
  const Eigen::Vector3d d = inv.orientation * dir;
  switch (prim.kind) {
    case PrimitiveKind::sphere: return ray_sphere(prim.dimensions.x(), o, d);
    case PrimitiveKind::box: return ray_box(prim.dimensions, o, d);
    case PrimitiveKind::cylinder: return ray_cylinder(prim.dimensions.x(), prim.dimensions.y(), o, d);
  }
  return -1.0;
}

DepthFrame render(const Scene& scene, const Pose& camera_pose, const CameraIntrinsics& cam) {
  if (cam.width < 16 || cam.height < 16)
    throw std::invalid_argument("render: resolution must be at least 16x16");
  if (cam.fov_h <= 0.0 || cam.fov_h >= M_PI || cam.fov_v <= 0.0 || cam.fov_v >= M_PI)
    throw std::invalid_argument("render: fov out of range");

  DepthFrame frame;
  frame.depth = Image(cam.width, cam.height, cam.far_clip);
  frame.mask.assign(static_cast<size_t>(cam.width * cam.height), 0);

  const double th = std::tan(cam.fov_h / 2.0);
  const double tv = std::tan(cam.fov_v / 2.0);
  const Eigen::Vector3d origin = camera_pose.position;

  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      // camera frame: +x forward, +y left, +z up; pixel (0,0) top-left
      const double u = (2.0 * (c + 0.5) / cam.width - 1.0);
      const double v = (1.0 - 2.0 * (r + 0.5) / cam.height);
      Eigen::Vector3d d_cam(1.0, -u * th, v * tv);
      const Eigen::Vector3d d = (camera_pose.orientation * d_cam).normalized();

      double best = cam.far_clip;
      int best_id = -1;
      for (const ScenePrimitive& prim : scene.objects) {
        const double t = ray_primitive(prim, origin, d);
        if (t > 0.0 && t < best) {
          best = t;
          best_id = prim.id;
        }
      }
      frame.depth.at(r, c) = best;
      frame.mask[static_cast<size_t>(r * cam.width + c)] =
          (best_id >= 0 && best_id == scene.target_id) ? 1 : 0;
    }
  }
  return frame;
}

Image preprocess(const DepthFrame& frame, double min_depth, double far) {
  Image out(frame.depth.width, frame.depth.height);
  const double span = far - min_depth;
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c) {
      double d = frame.mask_at(r, c) ? frame.depth.at(r, c) : far;
      d = std::clamp(d, min_depth, far);
      out.at(r, c) = (d - min_depth) / span;
    }
  return out;
}

namespace {

Image erase_rect(const Image& img, Rng& rng, const AugmentConfig& cfg) {
  Image out = img;
  int w, h, x0, y0;
  if (cfg.erase_max_frac >= 1.0) {
    w = img.width;
    h = img.height;
    x0 = y0 = 0;
  } else {
    const double frac = rng.uniform(0.25, 1.0) * cfg.erase_max_frac;
    const double side = std::sqrt(frac);
    w = std::clamp(static_cast<int>(std::lround(img.width * side)), 1, img.width);
    h = std::clamp(static_cast<int>(std::lround(img.height * side)), 1, img.height);
    x0 = rng.uniform_int(0, img.width - w);
    y0 = rng.uniform_int(0, img.height - h);
  }
  for (int r = y0; r < y0 + h; ++r)
    for (int c = x0; c < x0 + w; ++c) out.at(r, c) = cfg.fill;
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[static_cast<size_t>(i + radius)];
  }
  for (auto& k : kernel) k /= sum;

  auto clampi = [](int v, int lo, int hi) { return std::min(hi, std::max(lo, v)); };
  Image tmp(img.width, img.height), out(img.width, img.height);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<size_t>(i + radius)] * img.at(r, clampi(c + i, 0, img.width - 1));
      tmp.at(r, c) = acc;
    }
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<size_t>(i + radius)] * tmp.at(clampi(r + i, 0, img.height - 1), c);
      out.at(r, c) = acc;
    }
  return out;
}

Image rotate_bilinear(const Image& img, double degrees, double fill) {
  const double a = degrees * M_PI / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
  Image out(img.width, img.height, fill);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      // inverse map
      const double x = ca * (c - cx) + sa * (r - cy) + cx;
      const double y = -sa * (c - cx) + ca * (r - cy) + cy;
      const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
      if (x0 < 0 || y0 < 0 || x0 + 1 >= img.width || y0 + 1 >= img.height) continue;
      const double fx = x - x0, fy = y - y0;
      out.at(r, c) = (1 - fy) * ((1 - fx) * img.at(y0, x0) + fx * img.at(y0, x0 + 1)) +
                     fy * ((1 - fx) * img.at(y0 + 1, x0) + fx * img.at(y0 + 1, x0 + 1));
    }
  return out;
}

}  // namespace

Image augment(const Image& img, Rng& rng, const AugmentConfig& cfg) {
  Image out = img;
  if (cfg.p_erase > 0.0 && rng.bernoulli(cfg.p_erase)) out = erase_rect(out, rng, cfg);
  if (cfg.p_blur > 0.0 && rng.bernoulli(cfg.p_blur)) {
    const double sigma = rng.uniform(0.3, cfg.blur_sigma_max);
    out = gaussian_blur(out, sigma);
  }
  if (cfg.p_noise > 0.0 && rng.bernoulli(cfg.p_noise)) {
    for (auto& p : out.pixels) p = std::clamp(p + rng.gaussian(0.0, cfg.noise_sigma), 0.0, 1.0);
  }
  if (cfg.p_rotate > 0.0 && rng.bernoulli(cfg.p_rotate)) {
    const double deg = rng.uniform(-cfg.rotate_max_deg, cfg.rotate_max_deg);
    out = rotate_bilinear(out, deg, cfg.fill);
  }
  return out;
}

FrameStack frame_stack(const std::vector<Image>& history, int k) {
  if (history.empty()) throw std::invalid_argument("frame_stack: empty history");
  const Image& ref = history.back();
  FrameStack out;
  out.k = k;
  out.height = ref.height;
  out.width = ref.width;
  out.data.resize(static_cast<size_t>(k * ref.height * ref.width));
  const int n = static_cast<int>(history.size());
  for (int ch = 0; ch < k; ++ch) {
    // channel 0 = oldest of the k-window; short histories repeat the oldest
    const int idx = std::max(0, n - k + ch);
    const Image& src = history[static_cast<size_t>(idx)];
    if (src.width != ref.width || src.height != ref.height)
      throw std::invalid_argument("frame_stack: mixed resolutions");
    std::copy(src.pixels.begin(), src.pixels.end(),
              out.data.begin() + static_cast<long>(ch) * ref.height * ref.width);
  }
  return out;
}

void FrameDelayLine::push(DepthFrame frame) {
  frames_.push_back(std::move(frame));
  const size_t needed = static_cast<size_t>(latency_) + 1;
  while (frames_.size() > needed) frames_.pop_front();
}

const DepthFrame& FrameDelayLine::current() const {
  if (frames_.empty()) throw std::runtime_error("FrameDelayLine: no frame pushed yet");
  return frames_.front();
}

Image fill_holes(const Image& img, double hole_value) {
  Image out = img;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      if (img.at(r, c) != hole_value) continue;
      // nearest valid neighbour by expanding rings
      bool filled = false;
      for (int ring = 1; ring < std::max(img.width, img.height) && !filled; ++ring) {
        for (int dr = -ring; dr <= ring && !filled; ++dr)
          for (int dc = -ring; dc <= ring && !filled; ++dc) {
            if (std::max(std::abs(dr), std::abs(dc)) != ring) continue;
            const int rr = r + dr, cc = c + dc;
            if (rr < 0 || cc < 0 || rr >= img.height || cc >= img.width) continue;
            if (img.at(rr, cc) != hole_value) {
              out.at(r, c) = img.at(rr, cc);
              filled = true;
            }
          }
      }
    }
  return out;
}

namespace {

void put_u16le(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

void save_frame(const std::string& path, const DepthFrame& frame) {
  std::string buf = "VBCD";
  buf.push_back(1);  // version
  put_u16le(buf, static_cast<uint16_t>(frame.depth.width));
  put_u16le(buf, static_cast<uint16_t>(frame.depth.height));
  for (double d : frame.depth.pixels) {
    const float f = static_cast<float>(d);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  const size_t npix = frame.mask.size();
  for (size_t i = 0; i < npix; i += 8) {
    uint8_t byte = 0;
    for (size_t b = 0; b < 8 && i + b < npix; ++b)
      if (frame.mask[i + b]) byte |= static_cast<uint8_t>(1u << b);
    buf.push_back(static_cast<char>(byte));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_frame: cannot open " + path);
  out << buf;
}

DepthFrame load_frame(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_frame: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 9 || buf.substr(0, 4) != "VBCD")
    throw std::runtime_error("load_frame: bad magic");
  if (buf[4] != 1) throw std::runtime_error("load_frame: unsupported version");
  auto u16 = [&buf](size_t pos) {
    return static_cast<uint16_t>(static_cast<uint8_t>(buf[pos]) |
                                 (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8));
  };
  const int w = u16(5), h = u16(7);
  const size_t npix = static_cast<size_t>(w) * static_cast<size_t>(h);
  const size_t mask_bytes = (npix + 7) / 8;
  if (buf.size() != 9 + npix * 4 + mask_bytes)
    throw std::runtime_error("load_frame: truncated file");

  DepthFrame frame;
  frame.depth = Image(w, h);
  size_t pos = 9;
  for (size_t i = 0; i < npix; ++i) {
    uint32_t bits = 0;
    for (int k = 0; k < 4; ++k)
      bits |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + static_cast<size_t>(k)]))
              << (8 * k);
    float f;
    std::memcpy(&f, &bits, 4);
    frame.depth.pixels[i] = static_cast<double>(f);
    pos += 4;
  }
  frame.mask.assign(npix, 0);
  for (size_t i = 0; i < npix; ++i)
    frame.mask[i] = (static_cast<uint8_t>(buf[pos + i / 8]) >> (i % 8)) & 1u;
  return frame;
}

}  // namespace locoman
