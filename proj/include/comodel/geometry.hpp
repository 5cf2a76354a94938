#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <string>

namespace comodel {

// Right-handed, Z-up scene coordinates (meters by convention).
template <class Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
using Vec3 = Vec3T<double>;

template <class Scalar>
using Points3T = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;
using Points3 = Points3T<double>;

using Box3 = Eigen::AlignedBox<double, 3>;

/// Object placement. Rotation is Euler XYZ in radians: X is applied first, then Y, then Z.
struct Transform {
    Vec3 translation = Vec3::Zero();
    Vec3 rotation_euler = Vec3::Zero();
    Vec3 scale = Vec3::Ones();

    bool operator==(const Transform& other) const {
        return translation == other.translation && rotation_euler == other.rotation_euler &&
               scale == other.scale;
    }
};

template <class Scalar = double>
Eigen::Transform<Scalar, 3, Eigen::Affine> to_affine(const Transform& t) {
    using Vec = Vec3T<Scalar>;
    Eigen::Transform<Scalar, 3, Eigen::Affine> out = Eigen::Transform<Scalar, 3, Eigen::Affine>::Identity();
    out.translate(t.translation.template cast<Scalar>());
    out.rotate(Eigen::AngleAxis<Scalar>(Scalar(t.rotation_euler.z()), Vec::UnitZ()));
    out.rotate(Eigen::AngleAxis<Scalar>(Scalar(t.rotation_euler.y()), Vec::UnitY()));
    out.rotate(Eigen::AngleAxis<Scalar>(Scalar(t.rotation_euler.x()), Vec::UnitX()));
    out.scale(t.scale.template cast<Scalar>());
    return out;
}

/// Applies `t` to every column of `local`.
template <class Derived>
Points3T<typename Derived::Scalar> transform_points(const Transform& t, const Eigen::MatrixBase<Derived>& local) {
    using Scalar = typename Derived::Scalar;
    const auto affine = to_affine<Scalar>(t);
    Points3T<Scalar> out = affine.linear() * local;
    out.colwise() += affine.translation();
    return out;
}

template <class Derived>
Box3 bounds_of(const Eigen::MatrixBase<Derived>& points) {
    Box3 box;
    if (points.cols() == 0) return box;
    box.extend(Vec3(points.rowwise().minCoeff()));
    box.extend(Vec3(points.rowwise().maxCoeff()));
    return box;
}

constexpr double kPi = 3.141592653589793238462643383279502884;

inline double degrees_to_radians(double degrees) { return degrees * (kPi / 180.0); }

/// Shortest decimal text that parses back to exactly `value`.
std::string format_real(double value);

}  // namespace comodel
