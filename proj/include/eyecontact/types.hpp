#pragma once

#include <compare>

namespace eyecontact {

/// Gaze or head direction as (pitch, yaw) in radians.
/// Pitch is positive when looking up, yaw positive when looking left as seen
/// from the camera. A direction pointing straight into the camera is (0, 0).
struct GazeAngles {
  double pitch = 0.0;
  double yaw = 0.0;

  bool operator==(const GazeAngles&) const = default;
};

/// Intersection of a gaze ray with the camera z = 0 plane, in millimetres.
struct GazePoint2D {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const GazePoint2D&) const = default;
};

enum class Label { EyeContact, NoEyeContact };

constexpr double kPi = 3.14159265358979323846;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace eyecontact
