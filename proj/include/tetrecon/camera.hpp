#pragma once

#include "tetrecon/types.hpp"

namespace tetrecon
{
    /**
     * Perspective camera. World points map to camera space via
     * v_c = R v_g + T (camera looks down +z, right-handed), then to screen
     * space with the origin at the top-left pixel corner, +x right, +y down,
     * and depth z' in [0, 1] between the near and far planes.
     */
    struct Camera
    {
        Mat3 rotation = Mat3::Identity();
        Vec3 translation = Vec3::Zero();
        double near_plane = 0.1;  // meters
        double far_plane = 10.0;  // meters
        double fov = 1.0;         // vertical field of view, radians
        double aspect = 1.0;      // W / H
        int width = 256;          // pixels
        int height = 256;

        /// Focal length in pixels along x (horizontal).
        double focal_x() const { return width / (2.0 * aspect * std::tan(fov / 2.0)); }
        /// Focal length in pixels along y (vertical).
        double focal_y() const { return height / (2.0 * std::tan(fov / 2.0)); }

        Vec3 to_camera(const Vec3 & v_world) const { return rotation * v_world + translation; }
        /// Camera aperture position in world space.
        Vec3 center() const { return -(rotation.transpose() * translation); }

        /// Throws validation_error when the parameters are inconsistent.
        void validate() const;

        /// Orbit helper: camera at distance `radius` from `target`, azimuth /
        /// elevation in radians, looking at the target with +y world as up.
        static Camera look_at(const Vec3 & target, double radius, double azimuth, double elevation,
                              double fov, int width, int height, double near_plane, double far_plane);
    };

    /// Projected point: screen coordinates (x', y'), depth z' in [0,1], and camera depth z_c.
    struct ScreenPoint
    {
        double x = 0.0;
        double y = 0.0;
        double z_screen = 0.0;
        double z_cam = 0.0;
    };

    /**
     * Projects a camera-space point to screen space:
     *   x' = -fx * x_c / z_c + W/2
     *   y' = -fy * y_c / z_c + H/2
     *   z' = f (z_c - n) / ((f - n) z_c)
     * Throws validation_error for z_c <= 0 (behind the camera).
     */
    ScreenPoint project_to_screen(const Vec3 & v_cam, const Camera & cam);

    /// Inverts the depth mapping: camera-space depth (meters) from z' in [0,1].
    double depth_from_screen_z(double z_screen, const Camera & cam);
}
