// SPDX-License-Identifier: Apache-2.0
#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <numbers>
#include <random>

#include "error.hpp"
#include "parallel.hpp"

namespace orient {
namespace {

// A von Mises-Fisher bump on the unit sphere; a texture is a signed sum of them.
struct Lobe {
  Vec3 direction;
  double concentration;
  double amplitude;
};

// Solid ellipsoid in the object frame.
struct Part {
  Vec3 center;
  Rotation frame;
  Vec3 semi_axes;
};

struct ObjectShape {
  std::vector<Part> parts;
  std::vector<Lobe> lobes;
};

// Independent, reproducible streams per purpose.
std::uint64_t mix(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum StreamTag : std::uint64_t { kShape = 1, kRefRotations = 100, kQueries = 10'000, kTrain = 20'000 };

ObjectShape object_shape(const SynthTask& task, std::size_t object) {
  std::mt19937_64 rng(mix(task.seed, kShape + object));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> kappa(task.lobe_concentration_min, task.lobe_concentration_max);
  std::uniform_real_distribution<double> amp(0.5, 1.0);
  ObjectShape shape;
  // Objects are spread evenly over the extent range so categories differ in footprint.
  const double spread = task.objects > 1 ? static_cast<double>(object) / static_cast<double>(task.objects - 1) : 0.5;
  const double extent = task.extent_min + (task.extent_max - task.extent_min) * spread;
  std::uniform_real_distribution<double> aspect(task.min_aspect, 1.0);
  auto random_frame = [&] { return from_sixd({{gauss(rng), gauss(rng), gauss(rng)}, {gauss(rng), gauss(rng), gauss(rng)}}); };
  // A body at the origin with smaller attached parts; the parts break the
  // mirror symmetries a single ellipsoid would have.
  shape.parts.push_back({{0.0, 0.0, 0.0}, random_frame(), {0.6 * extent, 0.6 * extent * aspect(rng), 0.6 * extent * aspect(rng)}});
  std::uniform_real_distribution<double> part_size(0.25, 0.45);
  for (std::size_t i = 1; i < task.parts_per_object; ++i) {
    Vec3 d{gauss(rng), gauss(rng), gauss(rng)};
    const double n = std::max(std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]), 1e-12);
    const double size = part_size(rng) * extent;
    const Vec3 center{0.5 * extent * d[0] / n, 0.5 * extent * d[1] / n, 0.5 * extent * d[2] / n};
    shape.parts.push_back({center, random_frame(), {size, size * aspect(rng), size * aspect(rng)}});
  }
  for (std::size_t i = 0; i < task.lobes_per_object; ++i) {
    Vec3 d{gauss(rng), gauss(rng), gauss(rng)};
    const double n = std::max(std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]), 1e-12);
    const double sign = i % 2 == 0 ? 1.0 : -1.0;
    const double k = kappa(rng);
    shape.lobes.push_back({{d[0] / n, d[1] / n, d[2] / n}, k, sign * amp(rng)});
  }
  return shape;
}

FeaturePyramid to_pyramid(const SynthTask& task, const GrayImage& img) {
  return extract(task.local_norm ? local_normalize(img, task.norm) : img, task.extractor);
}

Rotation perturb(const Rotation& r, double max_deg, std::mt19937_64& rng) {
  if (max_deg <= 0.0) return r;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, max_deg * std::numbers::pi / 180.0);
  Vec3 axis{normal(rng), normal(rng), normal(rng)};
  while (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2] < 1e-12) axis = {normal(rng), normal(rng), 1.0};
  return r * Rotation::about_axis(axis, angle(rng));
}

// Feature noise, then clutter overwriting exactly floor(f * H * W) locations
// per scale in a band along a randomly chosen image border. Clutter has
// gradients in every direction, so its histogram is spread over all channels.
void corrupt(const SynthTask& task, FeaturePyramid& pyr, std::mt19937_64& rng) {
  const double stddev = task.noise * task.max_feature_noise;
  if (stddev > 0.0) {
    std::normal_distribution<double> normal(0.0, stddev);
    for (std::size_t s = 0; s < pyr.num_scales(); ++s) {
      for (float& v : pyr.scale(s)) v = static_cast<float>(v + normal(rng));
    }
  }
  if (task.outlier_fraction <= 0.0) return;
  const std::uint32_t channels = pyr.channels();
  const auto side = std::uniform_int_distribution<int>(0, 3)(rng);
  std::uniform_real_distribution<double> clutter(0.5, 1.5);
  std::vector<double> v(channels);
  for (std::size_t s = 0; s < pyr.num_scales(); ++s) {
    const std::size_t h = pyr.dims()[s].height, w = pyr.dims()[s].width;
    const auto count = static_cast<std::size_t>(std::floor(task.outlier_fraction * static_cast<double>(h * w)));
    for (std::size_t i = 0; i < count; ++i) {
      // Cells are taken in order of distance from one image border, so the
      // clutter forms a band along that side.
      std::size_t row = 0, col = 0;
      switch (side) {
        case 0: row = i / w, col = i % w; break;
        case 1: row = h - 1 - i / w, col = i % w; break;
        case 2: col = i / h, row = i % h; break;
        default: col = w - 1 - i / h, row = i % h; break;
      }
      double norm = 0.0;
      for (auto& x : v) {
        x = clutter(rng);
        norm += x * x;
      }
      norm = std::sqrt(norm);
      auto cell = pyr.cell(s, row * w + col);
      for (std::uint32_t c = 0; c < channels; ++c) cell[c] = static_cast<float>(v[c] / norm);
    }
  }
}

struct DrawnSource {
  std::size_t object;
  std::size_t base_ref;
  Rotation rotation;
  std::shared_ptr<const FeaturePyramid> pyramid;
};

// Shared by queries and training sources. A noiseless, outlier-free draw is
// an exact copy of the reference.
DrawnSource draw_source(const SynthTask& task, const SynthData& data, std::uint64_t stream) {
  std::mt19937_64 rng(stream);
  DrawnSource d;
  d.object = std::uniform_int_distribution<std::size_t>(0, task.objects - 1)(rng);
  d.base_ref = std::uniform_int_distribution<std::size_t>(0, task.refs - 1)(rng);
  const auto& src = data.sources[d.object];
  if (task.noise <= 0.0 && task.outlier_fraction <= 0.0) {
    d.rotation = src.rotations[d.base_ref];
    d.pyramid = src.pyramids[d.base_ref];
    return d;
  }
  FeaturePyramid pyr;
  if (task.noise > 0.0) {
    d.rotation = perturb(src.rotations[d.base_ref], task.noise * task.max_rotation_noise_deg, rng);
    pyr = to_pyramid(task, render_object(task, d.object, d.rotation));
  } else {
    d.rotation = src.rotations[d.base_ref];
    pyr = *src.pyramids[d.base_ref];
  }
  corrupt(task, pyr, rng);
  d.pyramid = std::make_shared<const FeaturePyramid>(std::move(pyr));
  return d;
}

}  // namespace

void SynthTask::validate() const {
  if (objects == 0 || refs == 0 || queries == 0) throw Error(ErrorCode::InvalidArgument, "task sizes must be >= 1");
  if (!(noise >= 0.0 && noise <= 1.0)) throw Error(ErrorCode::InvalidArgument, "noise level must lie in [0, 1]");
  if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "outlier fraction must lie in [0, 1)");
  }
  if (anchors() > refs) throw Error(ErrorCode::InsufficientReferences, "k_ac exceeds refs per object");
  if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
  extractor.validate();
}

std::string object_label(std::size_t object) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "obj%02zu", object);
  return buf;
}

GrayImage render_object(const SynthTask& task, std::size_t object, const Rotation& rotation) {
  const ObjectShape shape = object_shape(task, object);
  // Each part as a quadric in the camera frame: (p - c)^T M (p - c) = 1.
  struct CameraPart {
    Vec3 center;
    double m[3][3];
  };
  std::vector<CameraPart> parts;
  for (const auto& part : shape.parts) {
    CameraPart cp;
    cp.center = rotation.apply(part.center);
    const Rotation axes = rotation * part.frame;
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        cp.m[i][j] = 0.0;
        for (std::size_t k = 0; k < 3; ++k) cp.m[i][j] += axes(i, k) * axes(j, k) / (part.semi_axes[k] * part.semi_axes[k]);
      }
    }
    parts.push_back(cp);
  }
  const Rotation inv = rotation.transposed();
  const Vec3 light{-0.4, 0.5, 0.768};
  const std::size_t n = kImageSize;
  GrayImage img(n, n);
  for (std::size_t y = 0; y < n; ++y) {
    const double py = -((static_cast<double>(y) + 0.5) / (n / 2.0) - 1.0);
    for (std::size_t x = 0; x < n; ++x) {
      const double px = (static_cast<double>(x) + 0.5) / (n / 2.0) - 1.0;
      // Front-most intersection of the viewing ray (px, py, z) over all parts.
      double best_z = -std::numeric_limits<double>::infinity();
      Vec3 normal{};
      for (const auto& cp : parts) {
        const double ux = px - cp.center[0], uy = py - cp.center[1];
        const double qa = cp.m[2][2];
        const double qb = 2.0 * (cp.m[0][2] * ux + cp.m[1][2] * uy);
        const double qc = cp.m[0][0] * ux * ux + 2.0 * cp.m[0][1] * ux * uy + cp.m[1][1] * uy * uy - 1.0;
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc <= 0.0) continue;
        const double w = (-qb + std::sqrt(disc)) / (2.0 * qa);
        if (cp.center[2] + w <= best_z) continue;
        best_z = cp.center[2] + w;
        for (std::size_t i = 0; i < 3; ++i) normal[i] = cp.m[i][0] * ux + cp.m[i][1] * uy + cp.m[i][2] * w;
      }
      if (!std::isfinite(best_z)) continue;
      const double nn = std::sqrt(normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2]);
      const double shade = 0.3 + 0.7 * std::max(0.0, (normal[0] * light[0] + normal[1] * light[1] + normal[2] * light[2]) / nn);
      // Texture lives on directions in the object frame.
      const Vec3 q = inv.apply(Vec3{px, py, best_z});
      const double qn = std::max(std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]), 1e-12);
      double v = 0.0;
      for (const auto& l : shape.lobes) {
        const double c = (l.direction[0] * q[0] + l.direction[1] * q[1] + l.direction[2] * q[2]) / qn;
        v += l.amplitude * std::exp(l.concentration * (c - 1.0));
      }
      img.at(y, x) = shade * (1.0 + task.texture_weight * std::tanh(task.texture_contrast * v));
    }
  }
  return img;
}

SynthData gen_task(const SynthTask& task) {
  task.validate();
  SynthData data;
  data.sources.resize(task.objects);
  for (std::size_t o = 0; o < task.objects; ++o) {
    auto& src = data.sources[o];
    src.category = object_label(o);
    src.rotations = sample_rotations(task.refs, mix(task.seed, kRefRotations + o));
    src.pyramids.resize(task.refs);
  }
  parallel_for(task.objects * task.refs, [&](std::size_t i) {
    const std::size_t o = i / task.refs, r = i % task.refs;
    auto& src = data.sources[o];
    src.pyramids[r] = std::make_shared<const FeaturePyramid>(to_pyramid(task, render_object(task, o, src.rotations[r])));
  });

  data.queries.resize(task.queries);
  parallel_for(task.queries, [&](std::size_t q) {
    auto d = draw_source(task, data, mix(task.seed, kQueries + q));
    auto& out = data.queries[q];
    out.id = q;
    out.object = d.object;
    out.category = data.sources[d.object].category;
    out.rotation = d.rotation;
    out.base_ref = d.base_ref;
    out.pyramid = std::move(d.pyramid);
  });
  return data;
}

std::vector<TrainSample> gen_train_set(const SynthTask& task, const SynthData& data) {
  constexpr std::size_t kNeighbourhood = 64;
  std::vector<TrainSample> out(task.train_samples);
  parallel_for(task.train_samples, [&](std::size_t t) {
    const std::uint64_t stream = mix(task.seed, kTrain + t);
    auto d = draw_source(task, data, stream);
    std::mt19937_64 rng(mix(stream, 7));
    const auto& src = data.sources[d.object];

    std::vector<std::pair<double, std::size_t>> near(src.rotations.size());
    for (std::size_t r = 0; r < near.size(); ++r) near[r] = {geodesic_distance(d.rotation, src.rotations[r]), r};
    const std::size_t keep = std::min(near.size(), kNeighbourhood + 1);
    std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(keep), near.end());

    TrainSample& sample = out[t];
    sample.source = d.pyramid;
    sample.rotation = d.rotation;
    sample.category = static_cast<std::uint32_t>(d.object);
    auto add = [&](std::size_t o, std::size_t r) {
      sample.candidates.push_back({data.sources[o].pyramids[r], data.sources[o].rotations[r],
                                   static_cast<std::uint32_t>(o)});
    };
    const std::size_t positive = near[0].second;
    add(d.object, positive);
    if (keep > 1) {
      std::uniform_int_distribution<std::size_t> pick_near(1, keep - 1);
      for (std::size_t i = 0; i < task.batch_size; ++i) add(d.object, near[pick_near(rng)].second);
    }
    std::uniform_int_distribution<std::size_t> pick_obj(0, task.objects - 1);
    std::uniform_int_distribution<std::size_t> pick_ref(0, task.refs - 1);
    while (sample.candidates.size() < 3 * task.batch_size) {
      const std::size_t o = pick_obj(rng), r = pick_ref(rng);
      if (o == d.object && r == positive) continue;
      add(o, r);
    }
  });
  return out;
}

std::vector<ObjectSource> truncate_sources(const std::vector<ObjectSource>& sources, std::size_t refs) {
  std::vector<ObjectSource> out;
  for (const auto& s : sources) {
    ObjectSource t;
    t.category = s.category;
    const std::size_t n = std::min(refs, s.rotations.size());
    t.rotations.assign(s.rotations.begin(), s.rotations.begin() + static_cast<std::ptrdiff_t>(n));
    t.pyramids.assign(s.pyramids.begin(), s.pyramids.begin() + static_cast<std::ptrdiff_t>(n));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace orient
