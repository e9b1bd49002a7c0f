#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace lgsdf {

using Vec3 = Eigen::Vector3d;
using Vec3i = Eigen::Vector3i;
using Mat3 = Eigen::Matrix3d;
using Pose = Eigen::Isometry3d;

/// All randomness in the library flows through explicitly passed engines of
/// this type; nothing seeds from the clock.
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

/// Rotation block orthonormal with determinant +1.
inline bool is_rigid(const Pose& pose, double tol = 1e-6) {
    const Mat3 r = pose.linear();
    const Mat3 gram = r.transpose() * r;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    if (std::abs(r.determinant() - 1.0) > tol) return false;
    return pose.matrix().row(3).isApprox(Eigen::RowVector4d(0, 0, 0, 1), tol);
}

/// Uniform double in [0, 1) built from the top 53 bits of the engine output.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

inline double normal(Rng& rng, double mean, double stddev) {
    std::normal_distribution<double> dist(mean, stddev);
    return dist(rng);
}

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(rng);
}

}  // namespace lgsdf
