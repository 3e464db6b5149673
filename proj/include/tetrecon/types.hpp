#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tetrecon
{
    using Vec2 = Eigen::Vector2d;
    using Vec3 = Eigen::Vector3d;
    using Vec4 = Eigen::Vector4d;
    using Mat3 = Eigen::Matrix3d;
    using Mat4 = Eigen::Matrix4d;
    using VecXd = Eigen::VectorXd;

    using Index = std::int32_t;

    using Tet = std::array<Index, 4>;
    using Tri = std::array<Index, 3>;
    using Edge = std::array<Index, 2>; // k1 < k2

    /// Thrown when an input violates an operation's preconditions.
    struct validation_error : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    /// Thrown when a computation fails numerically (divergence, singular system, ...).
    struct numerical_error : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    /// Rigid transform x -> R x + t.
    struct RigidTransform
    {
        Mat3 rotation = Mat3::Identity();
        Vec3 translation = Vec3::Zero();

        Vec3 operator()(const Vec3 & x) const { return rotation * x + translation; }

        RigidTransform inverse() const
        {
            RigidTransform inv;
            inv.rotation = rotation.transpose();
            inv.translation = -(inv.rotation * translation);
            return inv;
        }

        static RigidTransform identity() { return RigidTransform {}; }
    };

    inline RigidTransform operator*(const RigidTransform & a, const RigidTransform & b)
    {
        RigidTransform c;
        c.rotation = a.rotation * b.rotation;
        c.translation = a.rotation * b.translation + a.translation;
        return c;
    }
}
