#include "tetrecon/camera.hpp"

#include <cmath>

namespace tetrecon
{
    void Camera::validate() const
    {
        if (!(0.0 < near_plane && near_plane < far_plane))
        {
            throw validation_error("Camera: requires 0 < near < far");
        }
        if (!(fov > 0.0 && fov < M_PI))
        {
            throw validation_error("Camera: fov must lie in (0, pi)");
        }
        if (width <= 0 || height <= 0)
        {
            throw validation_error("Camera: pixel dimensions must be positive");
        }
        if ((rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        {
            throw validation_error("Camera: rotation is not orthonormal");
        }
    }

    Camera Camera::look_at(const Vec3 & target, double radius, double azimuth, double elevation,
                           double fov, int width, int height, double near_plane, double far_plane)
    {
        const Vec3 dir(std::cos(elevation) * std::sin(azimuth),
                       std::sin(elevation),
                       std::cos(elevation) * std::cos(azimuth));
        const Vec3 eye = target + radius * dir;

        // Camera z points from the eye toward the target.
        const Vec3 fwd = (target - eye).normalized();
        Vec3 up(0.0, 1.0, 0.0);
        if (std::abs(fwd.dot(up)) > 0.999)
        {
            up = Vec3(1.0, 0.0, 0.0);
        }
        const Vec3 right = up.cross(fwd).normalized();
        up = fwd.cross(right).normalized();

        Camera cam;
        cam.rotation.row(0) = right.transpose();
        cam.rotation.row(1) = up.transpose();
        cam.rotation.row(2) = fwd.transpose();
        cam.translation = -(cam.rotation * eye);
        cam.fov = fov;
        cam.aspect = static_cast<double>(width) / height;
        cam.width = width;
        cam.height = height;
        cam.near_plane = near_plane;
        cam.far_plane = far_plane;
        return cam;
    }

    ScreenPoint project_to_screen(const Vec3 & v_cam, const Camera & cam)
    {
        const double zc = v_cam.z();
        if (!(zc > 0.0))
        {
            throw validation_error("project_to_screen: point behind the camera (z_c <= 0)");
        }
        ScreenPoint s;
        s.x = -cam.focal_x() * v_cam.x() / zc + cam.width / 2.0;
        s.y = -cam.focal_y() * v_cam.y() / zc + cam.height / 2.0;
        s.z_screen = cam.far_plane * (zc - cam.near_plane) / ((cam.far_plane - cam.near_plane) * zc);
        s.z_cam = zc;
        return s;
    }

    double depth_from_screen_z(double z_screen, const Camera & cam)
    {
        const double n = cam.near_plane;
        const double f = cam.far_plane;
        return f * n / (f - z_screen * (f - n));
    }
}
