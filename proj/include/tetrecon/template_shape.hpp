#pragma once

#include "tetrecon/types.hpp"

namespace tetrecon
{
    /// Axis-aligned bounding box.
    struct Aabb
    {
        Vec3 min = Vec3::Constant(std::numeric_limits<double>::max());
        Vec3 max = Vec3::Constant(std::numeric_limits<double>::lowest());

        void expand(const Vec3 & p)
        {
            min = min.cwiseMin(p);
            max = max.cwiseMax(p);
        }
    };

    /// A capsule (line-segment swept sphere); p0 == p1 degenerates to a sphere.
    struct Capsule
    {
        Vec3 p0 = Vec3::Zero();
        Vec3 p1 = Vec3::Zero();
        double radius = 1.0;
    };

    /**
     * Analytic template geometry with an exact signed distance function
     * (negative inside). Unions of capsules cover all the template shapes
     * the pipeline needs; |grad sdf| = 1 holds almost everywhere.
     */
    class TemplateShape
    {
    public:
        static TemplateShape sphere(const Vec3 & center, double radius);
        static TemplateShape capsule(const Vec3 & p0, const Vec3 & p1, double radius);
        static TemplateShape capsule_union(std::vector<Capsule> capsules);

        /// Signed distance (meters) from `p` to the shape surface; negative inside.
        double sdf(const Vec3 & p) const;

        /// Bounding box of the surface (not inflated).
        Aabb bounds() const;

        const std::vector<Capsule> & primitives() const { return capsules_; }

    private:
        explicit TemplateShape(std::vector<Capsule> capsules);

        std::vector<Capsule> capsules_;
    };
}
