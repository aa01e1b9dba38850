#pragma once

#include <random>

#include "semap/geometry.hpp"

namespace semap::test {

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline RigidTransform random_transform(std::mt19937_64& rng, double max_translation = 2.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 3.0);
  RigidTransform g;
  g.rotation = Eigen::AngleAxisd(angle(rng), random_unit(rng)).toRotationMatrix();
  g.translation = max_translation * Vec3(u(rng), u(rng), u(rng));
  return g;
}

inline double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace semap::test
