#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "locoman/depth_camera.hpp"

using namespace locoman;

namespace {

CameraIntrinsics odd_cam(int n = 65) {
  CameraIntrinsics cam;
  cam.width = n;
  cam.height = n;
  cam.fov_h = 1.0;
  cam.fov_v = 1.0;
  cam.far_clip = 3.0;
  return cam;
}

ScenePrimitive sphere_at(const Eigen::Vector3d& p, double r, int id) {
  ScenePrimitive s;
  s.kind = PrimitiveKind::sphere;
  s.dimensions = {r, 0, 0};
  s.pose.position = p;
  s.id = id;
  return s;
}

}  // namespace

TEST_CASE("empty scene renders at the far clip") {
  Scene scene;
  const DepthFrame f = render(scene, Pose{}, odd_cam());
  for (double d : f.depth.pixels) CHECK(d == 3.0);
  for (uint8_t m : f.mask) CHECK(m == 0);
}

TEST_CASE("center pixel depth of an on-axis sphere is analytic") {
  Scene scene;
  scene.objects.push_back(sphere_at({1.0, 0.0, 0.0}, 0.2, 1));
  scene.target_id = 1;
  const CameraIntrinsics cam = odd_cam(65);  // odd resolution: exact center pixel
  const DepthFrame f = render(scene, Pose{}, cam);
  const int mid = 32;
  CHECK(std::abs(f.depth.at(mid, mid) - 0.8) < 1e-9);
  CHECK(f.mask_at(mid, mid) == 1);
}

TEST_CASE("occluded object contributes no mask pixels") {
  Scene scene;
  scene.objects.push_back(sphere_at({1.0, 0.0, 0.0}, 0.3, 1));
  ScenePrimitive box;
  box.kind = PrimitiveKind::box;
  box.dimensions = {0.1, 0.1, 0.1};
  box.pose.position = {2.0, 0.0, 0.0};  // fully behind the sphere
  box.id = 2;
  scene.objects.push_back(box);
  scene.target_id = 2;

  const DepthFrame f = render(scene, Pose{}, odd_cam());
  // Oracle: per-pixel minimum over objects must never be the box where the
  // sphere covers it; the box subtends a smaller angle than the sphere.
  for (int r = 0; r < f.depth.height; ++r)
    for (int c = 0; c < f.depth.width; ++c) CHECK(f.mask_at(r, c) == 0);
}

TEST_CASE("box and cylinder intersections agree with hand geometry") {
  ScenePrimitive box;
  box.kind = PrimitiveKind::box;
  box.dimensions = {0.5, 0.4, 0.3};
  box.pose.position = {2.0, 0.0, 0.0};
  CHECK(ray_primitive(box, {0, 0, 0}, {1, 0, 0}) == doctest::Approx(1.5));

  ScenePrimitive cyl;
  cyl.kind = PrimitiveKind::cylinder;
  cyl.dimensions = {0.25, 0.5, 0};
  cyl.pose.position = {1.0, 0.0, 0.0};
  CHECK(ray_primitive(cyl, {0, 0, 0}, {1, 0, 0}) == doctest::Approx(0.75));
  // from above, hits the cap
  CHECK(ray_primitive(cyl, {1.0, 0.0, 2.0}, {0, 0, -1}) == doctest::Approx(1.5));
  // rotated box: quarter turn about z swaps x/y extents
  box.pose.orientation = quaternion_from_euler(0, 0, M_PI / 2);
  CHECK(ray_primitive(box, {0, 0, 0}, {1, 0, 0}) == doctest::Approx(2.0 - 0.4));
}

TEST_CASE("mask pixels carry the target's analytic intersection distance") {
  Scene scene;
  scene.objects.push_back(sphere_at({1.2, 0.1, -0.05}, 0.25, 7));
  ScenePrimitive ground;
  ground.kind = PrimitiveKind::box;
  ground.dimensions = {10, 10, 0.05};
  ground.pose.position = {0, 0, -0.55};
  ground.id = 0;
  scene.objects.push_back(ground);
  scene.target_id = 7;

  const CameraIntrinsics cam = odd_cam(33);
  const Pose cam_pose;
  const DepthFrame f = render(scene, cam_pose, cam);
  const double th = std::tan(cam.fov_h / 2.0), tv = std::tan(cam.fov_v / 2.0);
  int mask_pixels = 0;
  for (int r = 0; r < cam.height; ++r)
    for (int c = 0; c < cam.width; ++c) {
      if (!f.mask_at(r, c)) continue;
      ++mask_pixels;
      const double u = 2.0 * (c + 0.5) / cam.width - 1.0;
      const double v = 1.0 - 2.0 * (r + 0.5) / cam.height;
      const Eigen::Vector3d d = Eigen::Vector3d(1.0, -u * th, v * tv).normalized();
      const double t = ray_primitive(scene.objects[0], cam_pose.position, d);
      CHECK(t > 0.0);
      CHECK(f.depth.at(r, c) == doctest::Approx(t).epsilon(1e-12));
    }
  CHECK(mask_pixels > 0);
}

TEST_CASE("preprocess clips at 0.2 m and normalizes to [0,1]") {
  DepthFrame f;
  f.depth = Image(16, 16, 1.0);
  f.mask.assign(256, 1);
  f.depth.at(0, 0) = 0.05;  // below the clip floor
  f.depth.at(0, 1) = 3.0;   // at the far value
  f.depth.at(0, 2) = 0.2;
  const Image out = preprocess(f, 0.2, 3.0);
  CHECK(out.at(0, 0) == doctest::Approx(0.0));
  CHECK(out.at(0, 1) == doctest::Approx(1.0));
  CHECK(out.at(0, 2) == doctest::Approx(0.0));

  // non-target pixels are pushed to the far value
  f.mask[5] = 0;
  const Image seg = preprocess(f, 0.2, 3.0);
  CHECK(seg.pixels[5] == doctest::Approx(1.0));
}

TEST_CASE("preprocess is monotone on fuzzed frames") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    DepthFrame f;
    f.depth = Image(16, 16);
    f.mask.assign(256, 1);
    for (auto& d : f.depth.pixels) d = rng.uniform(0.0, 4.0);
    const Image out = preprocess(f, 0.2, 3.0);
    for (size_t i = 0; i + 1 < f.depth.pixels.size(); ++i)
      for (size_t j = i + 1; j < i + 5 && j < f.depth.pixels.size(); ++j) {
        if (f.depth.pixels[i] >= f.depth.pixels[j])
          CHECK(out.pixels[i] >= out.pixels[j]);
        else
          CHECK(out.pixels[i] <= out.pixels[j]);
      }
  }
}

TEST_CASE("augmentations are the identity at probability zero") {
  Rng rng(5);
  Image img(32, 32);
  for (auto& p : img.pixels) p = rng.uniform(0.0, 1.0);
  AugmentConfig cfg;  // all probabilities zero
  const Image out = augment(img, rng, cfg);
  for (size_t i = 0; i < img.pixels.size(); ++i) CHECK(out.pixels[i] == img.pixels[i]);
}

TEST_CASE("full-frame erase yields a constant far-value frame") {
  Rng rng(7);
  Image img(32, 32, 0.3);
  AugmentConfig cfg;
  cfg.p_erase = 1.0;
  cfg.erase_max_frac = 1.0;
  cfg.fill = 1.0;
  const Image out = augment(img, rng, cfg);
  for (double p : out.pixels) CHECK(p == 1.0);
}

TEST_CASE("gaussian noise has the folded-normal mean change") {
  Rng rng(11);
  AugmentConfig cfg;
  cfg.p_noise = 1.0;
  cfg.noise_sigma = 0.01;
  Image img(64, 64, 0.5);
  double total = 0.0;
  int count = 0;
  for (int f = 0; f < 100; ++f) {
    const Image out = augment(img, rng, cfg);
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      total += std::abs(out.pixels[i] - img.pixels[i]);
      ++count;
    }
  }
  const double expected = cfg.noise_sigma * std::sqrt(2.0 / M_PI);
  CHECK(std::abs(total / count - expected) / expected < 0.1);
}

TEST_CASE("frame stack repeats the oldest frame and keeps order") {
  std::vector<Image> history;
  Image a(8, 8, 0.1);
  history.push_back(a);
  FrameStack s = frame_stack(history, 4);
  CHECK(s.k == 4);
  CHECK(s.height == 8);
  CHECK(s.width == 8);
  for (int ch = 0; ch < 4; ++ch) CHECK(s.at(ch, 0, 0) == doctest::Approx(0.1));

  history.push_back(Image(8, 8, 0.2));
  history.push_back(Image(8, 8, 0.3));
  history.push_back(Image(8, 8, 0.4));
  history.push_back(Image(8, 8, 0.5));  // 5 frames: keep the last 4
  s = frame_stack(history, 4);
  CHECK(s.at(0, 3, 3) == doctest::Approx(0.2));  // oldest of the window first
  CHECK(s.at(1, 3, 3) == doctest::Approx(0.3));
  CHECK(s.at(2, 3, 3) == doctest::Approx(0.4));
  CHECK(s.at(3, 3, 3) == doctest::Approx(0.5));

  CHECK_THROWS_AS(frame_stack({}, 4), std::invalid_argument);
}

TEST_CASE("delay line delivers the frame rendered latency steps ago") {
  FrameDelayLine line(2);
  for (int t = 0; t < 6; ++t) {
    DepthFrame f;
    f.depth = Image(16, 16, static_cast<double>(t));
    f.mask.assign(256, 0);
    f.timestamp = t;
    line.push(std::move(f));
    const double expect = std::max(0, t - 2);
    CHECK(line.current().timestamp == doctest::Approx(expect));
  }
}

TEST_CASE("hole filling copies the nearest valid neighbour") {
  Image img(9, 9, 0.4);
  img.at(4, 4) = -1.0;  // hole marker
  img.at(4, 5) = 0.7;
  const Image out = fill_holes(img, -1.0);
  CHECK(out.at(4, 4) == doctest::Approx(0.7).epsilon(0.5));  // one of the ring values
  // No holes: identity.
  const Image clean = fill_holes(out, -1.0);
  for (size_t i = 0; i < out.pixels.size(); ++i) CHECK(clean.pixels[i] == out.pixels[i]);
}

TEST_CASE("frame dump round trip") {
  Rng rng(13);
  DepthFrame f;
  f.depth = Image(33, 17);
  f.mask.assign(static_cast<size_t>(33 * 17), 0);
  for (auto& d : f.depth.pixels) d = rng.uniform(0.0, 3.0);
  for (auto& m : f.mask) m = rng.bernoulli(0.3) ? 1 : 0;

  const std::string path = "/tmp/locoman_frame_test.bin";
  save_frame(path, f);
  const DepthFrame g = load_frame(path);
  CHECK(g.depth.width == 33);
  CHECK(g.depth.height == 17);
  for (size_t i = 0; i < f.depth.pixels.size(); ++i)
    CHECK(static_cast<float>(g.depth.pixels[i]) == static_cast<float>(f.depth.pixels[i]));
  for (size_t i = 0; i < f.mask.size(); ++i) CHECK(g.mask[i] == f.mask[i]);
}
