#include "tetrecon/io.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

namespace tetrecon
{
    namespace
    {
        constexpr char kMeshMagic[8] = { 'T', 'E', 'T', 'M', 'S', 'H', '0', '1' };
        constexpr char kFieldMagic[8] = { 'P', 'H', 'I', 'F', 'L', 'D', '0', '1' };

        template <typename T>
        void write_raw(std::ofstream & out, const T & v)
        {
            out.write(reinterpret_cast<const char *>(&v), sizeof(T));
        }

        template <typename T>
        T read_raw(std::ifstream & in)
        {
            T v {};
            in.read(reinterpret_cast<char *>(&v), sizeof(T));
            if (!in)
            {
                throw validation_error("binary read: truncated file");
            }
            return v;
        }

        std::ofstream open_out(const std::string & path)
        {
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out)
            {
                throw validation_error("cannot open for writing: " + path);
            }
            return out;
        }

        std::ifstream open_in(const std::string & path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
            {
                throw validation_error("cannot open for reading: " + path);
            }
            return in;
        }

        nlohmann::json quat_json(const Mat3 & r)
        {
            const Eigen::Quaterniond q(r);
            return { q.w(), q.x(), q.y(), q.z() };
        }

        Mat3 quat_from_json(const nlohmann::json & j)
        {
            if (!j.is_array() || j.size() != 4)
            {
                throw validation_error("JSON quaternion must be [w, x, y, z]");
            }
            Eigen::Quaterniond q(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                                 j[3].get<double>());
            return q.normalized().toRotationMatrix();
        }

        Vec3 vec3_from_json(const nlohmann::json & j)
        {
            if (!j.is_array() || j.size() != 3)
            {
                throw validation_error("JSON vector must have 3 entries");
            }
            return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
        }

        nlohmann::json load_json_file(const std::string & path)
        {
            std::ifstream in(path);
            if (!in)
            {
                throw validation_error("cannot open for reading: " + path);
            }
            try
            {
                return nlohmann::json::parse(in);
            }
            catch (const nlohmann::json::parse_error & e)
            {
                throw validation_error("JSON parse error in " + path + ": " + e.what());
            }
        }

        void write_json_file(const nlohmann::json & j, const std::string & path)
        {
            std::ofstream out(path, std::ios::trunc);
            if (!out)
            {
                throw validation_error("cannot open for writing: " + path);
            }
            out << j.dump(2) << "\n";
        }
    }

    void save_tetmesh(const TetMesh & mesh, const std::string & path)
    {
        auto out = open_out(path);
        out.write(kMeshMagic, 8);
        write_raw<std::uint64_t>(out, mesh.vertices.size());
        write_raw<std::uint64_t>(out, mesh.tets.size());
        for (const Vec3 & v : mesh.vertices)
        {
            write_raw<double>(out, v.x());
            write_raw<double>(out, v.y());
            write_raw<double>(out, v.z());
        }
        for (const Tet & t : mesh.tets)
        {
            for (Index k : t)
            {
                write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(k));
            }
        }
        if (!out)
        {
            throw validation_error("write failed: " + path);
        }
    }

    TetMesh load_tetmesh(const std::string & path)
    {
        auto in = open_in(path);
        char magic[8];
        in.read(magic, 8);
        if (!in || std::memcmp(magic, kMeshMagic, 8) != 0)
        {
            throw validation_error("not a tet mesh file: " + path);
        }
        const auto nv = read_raw<std::uint64_t>(in);
        const auto nt = read_raw<std::uint64_t>(in);
        TetMesh mesh;
        mesh.vertices.resize(nv);
        for (auto & v : mesh.vertices)
        {
            const double x = read_raw<double>(in);
            const double y = read_raw<double>(in);
            const double z = read_raw<double>(in);
            v = Vec3(x, y, z);
        }
        mesh.tets.resize(nt);
        for (auto & t : mesh.tets)
        {
            for (int i = 0; i < 4; ++i)
            {
                t[static_cast<size_t>(i)] = static_cast<Index>(read_raw<std::uint32_t>(in));
            }
        }
        mesh.build_edge_tables();
        return mesh;
    }

    void save_field(const ScalarField & field, const std::string & path)
    {
        auto out = open_out(path);
        out.write(kFieldMagic, 8);
        write_raw<std::uint64_t>(out, field.values.size());
        for (double v : field.values)
        {
            write_raw<double>(out, v);
        }
        if (!out)
        {
            throw validation_error("write failed: " + path);
        }
    }

    ScalarField load_field(const std::string & path)
    {
        auto in = open_in(path);
        char magic[8];
        in.read(magic, 8);
        if (!in || std::memcmp(magic, kFieldMagic, 8) != 0)
        {
            throw validation_error("not a scalar field file: " + path);
        }
        const auto n = read_raw<std::uint64_t>(in);
        ScalarField field;
        field.values.resize(n);
        for (double & v : field.values)
        {
            v = read_raw<double>(in);
        }
        return field;
    }

    void save_obj(const TriMesh & tri, const std::string & path)
    {
        std::ofstream out(path, std::ios::trunc);
        if (!out)
        {
            throw validation_error("cannot open for writing: " + path);
        }
        out.precision(17);
        for (const Vec3 & v : tri.vertices)
        {
            out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
        }
        for (const Tri & f : tri.triangles)
        {
            out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
        }
    }

    TriMesh load_obj(const std::string & path)
    {
        std::ifstream in(path);
        if (!in)
        {
            throw validation_error("cannot open for reading: " + path);
        }
        TriMesh tri;
        std::string line;
        while (std::getline(in, line))
        {
            if (line.rfind("v ", 0) == 0)
            {
                Vec3 v;
                if (std::sscanf(line.c_str(), "v %lf %lf %lf", &v.x(), &v.y(), &v.z()) != 3)
                {
                    throw validation_error("malformed OBJ vertex in " + path);
                }
                tri.vertices.push_back(v);
            }
            else if (line.rfind("f ", 0) == 0)
            {
                long a = 0, b = 0, c = 0;
                if (std::sscanf(line.c_str(), "f %ld %ld %ld", &a, &b, &c) != 3)
                {
                    throw validation_error("malformed OBJ face in " + path + " (triangles only)");
                }
                tri.triangles.push_back({ static_cast<Index>(a - 1), static_cast<Index>(b - 1),
                                          static_cast<Index>(c - 1) });
                tri.source_tet.push_back(-1);
            }
        }
        return tri;
    }

    void save_provenance(const TriMesh & tri, const std::string & path)
    {
        std::ofstream out(path, std::ios::trunc);
        if (!out)
        {
            throw validation_error("cannot open for writing: " + path);
        }
        out.precision(17);
        out << "# vertex edge k1 k2 weight\n";
        for (size_t i = 0; i < tri.provenance.size(); ++i)
        {
            const VertexProvenance & p = tri.provenance[i];
            out << i << " " << p.edge << " " << p.k1 << " " << p.k2 << " " << p.weight << "\n";
        }
    }

    void save_camera_json(const Camera & cam, const std::string & path)
    {
        nlohmann::json j;
        j["rotation"] = quat_json(cam.rotation);
        j["translation"] = { cam.translation.x(), cam.translation.y(), cam.translation.z() };
        j["near"] = cam.near_plane;
        j["far"] = cam.far_plane;
        j["fov"] = cam.fov;
        j["aspect"] = cam.aspect;
        j["width"] = cam.width;
        j["height"] = cam.height;
        write_json_file(j, path);
    }

    Camera load_camera_json(const std::string & path)
    {
        const nlohmann::json j = load_json_file(path);
        Camera cam;
        try
        {
            cam.rotation = quat_from_json(j.at("rotation"));
            cam.translation = vec3_from_json(j.at("translation"));
            cam.near_plane = j.at("near").get<double>();
            cam.far_plane = j.at("far").get<double>();
            cam.fov = j.at("fov").get<double>();
            cam.aspect = j.at("aspect").get<double>();
            cam.width = j.at("width").get<int>();
            cam.height = j.at("height").get<int>();
        }
        catch (const nlohmann::json::exception & e)
        {
            throw validation_error("camera JSON " + path + ": " + e.what());
        }
        cam.validate();
        return cam;
    }

    void save_skeleton_json(const Skeleton & skel, const std::string & path)
    {
        nlohmann::json joints = nlohmann::json::array();
        for (const auto & joint : skel.joints)
        {
            nlohmann::json j;
            j["name"] = joint.name;
            j["rotation"] = quat_json(joint.rest_rotation);
            j["translation"] = { joint.rest_translation.x(), joint.rest_translation.y(),
                                 joint.rest_translation.z() };
            j["parent"] = joint.parent;
            if (joint.has_tip)
            {
                j["tip"] = { joint.tip.x(), joint.tip.y(), joint.tip.z() };
            }
            joints.push_back(j);
        }
        write_json_file(nlohmann::json { { "joints", joints } }, path);
    }

    Skeleton load_skeleton_json(const std::string & path)
    {
        const nlohmann::json j = load_json_file(path);
        Skeleton skel;
        try
        {
            for (const auto & joint_json : j.at("joints"))
            {
                Skeleton::Joint joint;
                joint.name = joint_json.at("name").get<std::string>();
                joint.rest_rotation = quat_from_json(joint_json.at("rotation"));
                joint.rest_translation = vec3_from_json(joint_json.at("translation"));
                joint.parent = joint_json.value("parent", -1);
                if (joint_json.contains("tip"))
                {
                    joint.tip = vec3_from_json(joint_json.at("tip"));
                    joint.has_tip = true;
                }
                skel.joints.push_back(joint);
            }
        }
        catch (const nlohmann::json::exception & e)
        {
            throw validation_error("skeleton JSON " + path + ": " + e.what());
        }
        skel.validate();
        return skel;
    }

    void save_pose_json(const Pose & pose, const std::string & path)
    {
        nlohmann::json joints = nlohmann::json::array();
        for (const auto & t : pose.joint_transforms)
        {
            nlohmann::json j;
            j["rotation"] = quat_json(t.rotation);
            j["translation"] = { t.translation.x(), t.translation.y(), t.translation.z() };
            joints.push_back(j);
        }
        write_json_file(nlohmann::json { { "joints", joints } }, path);
    }

    Pose load_pose_json(const std::string & path, const Skeleton & skel)
    {
        const nlohmann::json j = load_json_file(path);
        Pose pose;
        try
        {
            for (const auto & joint_json : j.at("joints"))
            {
                RigidTransform t;
                t.rotation = quat_from_json(joint_json.at("rotation"));
                t.translation = vec3_from_json(joint_json.at("translation"));
                pose.joint_transforms.push_back(t);
            }
        }
        catch (const nlohmann::json::exception & e)
        {
            throw validation_error("pose JSON " + path + ": " + e.what());
        }
        pose.validate(skel);
        return pose;
    }
}
