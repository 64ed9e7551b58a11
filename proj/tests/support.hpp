#pragma once

#include "eyecontact/headpose.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("eyecontact_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double rad(double deg) { return deg * 3.14159265358979323846 / 180.0; }

inline double deg(double r) { return r * 180.0 / 3.14159265358979323846; }

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng, double max_deg) {
  std::uniform_real_distribution<double> u(-rad(max_deg), rad(max_deg));
  const double pitch = u(rng), yaw = u(rng), roll = u(rng);
  return eyecontact::euler_to_rotation(pitch, yaw, roll);
}

}  // namespace testing
