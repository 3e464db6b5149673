#include "tetrecon/template_shape.hpp"

#include <limits>

namespace tetrecon
{
    namespace
    {
        double capsule_sdf(const Capsule & c, const Vec3 & p)
        {
            const Vec3 axis = c.p1 - c.p0;
            const double len2 = axis.squaredNorm();
            double t = 0.0;
            if (len2 > 0.0)
            {
                t = std::clamp((p - c.p0).dot(axis) / len2, 0.0, 1.0);
            }
            return (p - (c.p0 + t * axis)).norm() - c.radius;
        }
    }

    TemplateShape::TemplateShape(std::vector<Capsule> capsules) : capsules_(std::move(capsules))
    {
        if (capsules_.empty())
        {
            throw validation_error("TemplateShape: no primitives");
        }
        for (const auto & c : capsules_)
        {
            if (!(c.radius > 0.0))
            {
                throw validation_error("TemplateShape: primitive radius must be positive");
            }
        }
    }

    TemplateShape TemplateShape::sphere(const Vec3 & center, double radius)
    {
        return TemplateShape({ Capsule { center, center, radius } });
    }

    TemplateShape TemplateShape::capsule(const Vec3 & p0, const Vec3 & p1, double radius)
    {
        return TemplateShape({ Capsule { p0, p1, radius } });
    }

    TemplateShape TemplateShape::capsule_union(std::vector<Capsule> capsules)
    {
        return TemplateShape(std::move(capsules));
    }

    double TemplateShape::sdf(const Vec3 & p) const
    {
        double d = std::numeric_limits<double>::max();
        for (const auto & c : capsules_)
        {
            d = std::min(d, capsule_sdf(c, p));
        }
        return d;
    }

    Aabb TemplateShape::bounds() const
    {
        Aabb box;
        for (const auto & c : capsules_)
        {
            box.expand(c.p0 - Vec3::Constant(c.radius));
            box.expand(c.p0 + Vec3::Constant(c.radius));
            box.expand(c.p1 - Vec3::Constant(c.radius));
            box.expand(c.p1 + Vec3::Constant(c.radius));
        }
        return box;
    }
}
