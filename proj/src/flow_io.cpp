#include "lamina/flow_io.hpp"

#include <fstream>
#include <set>

namespace lamina {

namespace {

Json flat(const std::vector<std::vector<Vec3>>& rows) {
    Json a = Json::array();
    for (const auto& row : rows) {
        for (const auto& v : row) {
            a.push_back(v.x());
            a.push_back(v.y());
            a.push_back(v.z());
        }
    }
    return a;
}

std::vector<std::vector<Vec3>> unflat(const Json& a, std::size_t rows, std::size_t n, const char* name) {
    if (!a.is_array() || a.size() != rows * n * 3) {
        throw ConfigError(std::string("checkpoint field '") + name + "' has the wrong length");
    }
    std::vector<std::vector<Vec3>> out(rows, std::vector<Vec3>(n));
    std::size_t j = 0;
    for (auto& row : out) {
        for (auto& v : row) {
            v = Vec3(a[j].get<double>(), a[j + 1].get<double>(), a[j + 2].get<double>());
            j += 3;
        }
    }
    return out;
}

Json mesh_to_json(const TriMesh& m) {
    Json faces = Json::array();
    for (const auto& f : m.faces) {
        faces.push_back(f[0]);
        faces.push_back(f[1]);
        faces.push_back(f[2]);
    }
    return Json{{"vertices", flat({m.vertices})}, {"faces", faces}};
}

std::vector<Face> faces_from_json(const Json& a) {
    if (!a.is_array() || a.size() % 3 != 0) throw ConfigError("faces must be a flat array of index triples");
    std::vector<Face> faces(a.size() / 3);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        faces[f] = {a[3 * f].get<int>(), a[3 * f + 1].get<int>(), a[3 * f + 2].get<int>()};
    }
    return faces;
}

TriMesh mesh_from_json(const Json& j) {
    TriMesh m;
    const std::size_t n = j.at("vertices").size() / 3;
    m.vertices = unflat(j.at("vertices"), 1, n, "vertices").front();
    m.faces = faces_from_json(j.at("faces"));
    validate(m);
    return m;
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + " must be a JSON object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + context);
    }
}

Json to_json(const RegistrationConfig& c) {
    Json kernel = Json::array();
    for (const auto& comp : c.kernel.components) kernel.push_back({{"width", comp.width}, {"weight", comp.weight}});
    return Json{
        {"kernel", kernel},
        {"varifold_width", c.varifold.width},
        {"varifold_normalize", c.varifold.normalize},
        {"hybrid_weight", c.hybrid_weight},
        {"attachment_weight", c.attachment_weight},
        {"auto_scale_attachment", c.auto_scale_attachment},
        {"n_steps", c.n_steps},
        {"constraint", to_string(c.constraint)},
        {"nonsmooth_epsilon", c.nonsmooth_epsilon},
        {"initial_penalty", c.schedule.initial_penalty},
        {"penalty_growth", c.schedule.penalty_growth},
        {"residual_decrease_ratio", c.schedule.residual_decrease_ratio},
        {"max_outer_iterations", c.schedule.max_outer_iterations},
        {"lbfgs_memory", c.inner.memory},
        {"max_inner_iterations", c.inner.max_iterations},
        {"tol_constraint", c.tol_constraint},
        {"tol_gradient", c.tol_gradient},
        {"min_face_area", c.min_face_area},
    };
}

RegistrationConfig registration_config_from_json(const Json& j) {
    reject_unknown_keys(j,
                        {"kernel", "kernel_width", "varifold_width", "varifold_normalize", "hybrid_weight",
                         "attachment_weight", "auto_scale_attachment", "n_steps", "constraint", "nonsmooth_epsilon",
                         "initial_penalty", "penalty_growth", "residual_decrease_ratio", "max_outer_iterations",
                         "lbfgs_memory", "max_inner_iterations", "tol_constraint", "tol_gradient", "min_face_area"},
                        "registration config");
    RegistrationConfig c;
    try {
        if (j.contains("kernel")) {
            for (const auto& comp : j.at("kernel")) {
                reject_unknown_keys(comp, {"width", "weight"}, "kernel component");
                c.kernel.components.push_back({comp.at("width").get<double>(), comp.value("weight", 1.0)});
            }
        } else if (j.contains("kernel_width")) {
            c.kernel = KernelSpec::gaussian(j.at("kernel_width").get<double>());
        } else {
            throw ConfigError("registration config requires 'kernel_width' or 'kernel'");
        }
        if (!j.contains("varifold_width")) throw ConfigError("registration config requires 'varifold_width'");
        c.varifold.width = j.at("varifold_width").get<double>();
        read_opt(j, "varifold_normalize", c.varifold.normalize);
        read_opt(j, "hybrid_weight", c.hybrid_weight);
        read_opt(j, "attachment_weight", c.attachment_weight);
        read_opt(j, "auto_scale_attachment", c.auto_scale_attachment);
        read_opt(j, "n_steps", c.n_steps);
        if (j.contains("constraint")) c.constraint = constraint_form_from_string(j.at("constraint").get<std::string>());
        read_opt(j, "nonsmooth_epsilon", c.nonsmooth_epsilon);
        read_opt(j, "initial_penalty", c.schedule.initial_penalty);
        read_opt(j, "penalty_growth", c.schedule.penalty_growth);
        read_opt(j, "residual_decrease_ratio", c.schedule.residual_decrease_ratio);
        read_opt(j, "max_outer_iterations", c.schedule.max_outer_iterations);
        read_opt(j, "lbfgs_memory", c.inner.memory);
        read_opt(j, "max_inner_iterations", c.inner.max_iterations);
        read_opt(j, "tol_constraint", c.tol_constraint);
        read_opt(j, "tol_gradient", c.tol_gradient);
        read_opt(j, "min_face_area", c.min_face_area);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("registration config: ") + e.what());
    }
    c.validate();
    return c;
}

Json to_json(const FlowState& s) {
    Json faces = Json::array();
    for (const auto& f : s.faces) {
        faces.push_back(f[0]);
        faces.push_back(f[1]);
        faces.push_back(f[2]);
    }
    Json mult = Json::array();
    for (const auto& row : s.multipliers) {
        for (double v : row) mult.push_back(v);
    }
    return Json{{"n_steps", s.n_steps},     {"n_vertices", s.num_vertices()}, {"faces", faces},
                {"q", flat(s.q)},           {"alpha", flat(s.alpha)},         {"multipliers", mult},
                {"penalty", s.penalty}};
}

FlowState flow_state_from_json(const Json& j) {
    FlowState s;
    try {
        s.n_steps = j.at("n_steps").get<int>();
        const std::size_t n = j.at("n_vertices").get<std::size_t>();
        if (s.n_steps < 1) throw ConfigError("checkpoint n_steps must be >= 1");
        s.faces = faces_from_json(j.at("faces"));
        s.q = unflat(j.at("q"), s.n_steps + 1, n, "q");
        s.alpha = unflat(j.at("alpha"), s.n_steps, n, "alpha");
        const auto& mult = j.at("multipliers");
        if (mult.size() != static_cast<std::size_t>(s.n_steps) * n) throw ConfigError("checkpoint multipliers have the wrong length");
        s.multipliers.assign(s.n_steps, std::vector<double>(n));
        for (int i = 0; i < s.n_steps; ++i) {
            for (std::size_t k = 0; k < n; ++k) s.multipliers[i][k] = mult[i * n + k].get<double>();
        }
        s.penalty = j.at("penalty").get<double>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("flow state: ") + e.what());
    }
    return s;
}

Json to_json(const ConvergenceReport& r) {
    Json outer = Json::array();
    for (const auto& o : r.outer) {
        outer.push_back({{"objective", o.objective},
                         {"kinetic", o.kinetic},
                         {"attachment", o.attachment},
                         {"max_residual", o.max_residual},
                         {"backward_fraction", o.backward_fraction},
                         {"penalty", o.penalty},
                         {"inner_iterations", o.inner_iterations},
                         {"inner_status", to_string(o.inner_status)},
                         {"inner_gradient_norm", o.inner_gradient_norm},
                         {"inner_monotone", o.inner_monotone}});
    }
    return Json{{"converged", r.converged},
                {"outer_iterations", outer},
                {"vertices", r.vertices},
                {"faces", r.faces},
                {"total_inner_iterations", r.total_inner_iterations},
                {"total_evaluations", r.total_evaluations},
                {"wall_seconds", r.wall_seconds},
                {"attachment_scale", r.attachment_scale},
                {"initial_attachment", r.initial_attachment},
                {"min_face_area", r.min_face_area},
                {"max_step_displacement", r.max_step_displacement},
                {"mean_edge_length", r.mean_edge_length},
                {"step_size_violation", r.step_size_violation}};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    Json j{{"format", "lamina-flow"}, {"version", 1}, {"config", to_json(c.config)}, {"state", to_json(c.state)}};
    if (c.target) j["target"] = mesh_to_json(*c.target);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << j.dump();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError("checkpoint " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "lamina-flow") throw ConfigError(path.string() + " is not a flow checkpoint");
    Checkpoint c;
    c.config = registration_config_from_json(j.at("config"));
    c.state = flow_state_from_json(j.at("state"));
    if (j.contains("target")) c.target = mesh_from_json(j.at("target"));
    return c;
}

}  // namespace lamina
