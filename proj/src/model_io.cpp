#include "bffg/model_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "bffg/errors.hpp"
#include "bffg/random_stream.hpp"

namespace bffg {

namespace {

using nlohmann::json;

constexpr const char* kModelVersion = "bffg-model-v1";
constexpr const char* kResultVersion = "bffg-result-v1";

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) known = true;
        if (!known) throw ModelError(ctx + ": unknown key '" + it.key() + "'");
    }
}

const json& require_key(const json& obj, const char* key, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ModelError(ctx + ": missing key '" + key + "'");
    return *it;
}

const json& as_object(const json& j, const std::string& ctx) {
    if (!j.is_object()) throw ModelError(ctx + ": expected an object");
    return j;
}

const json& as_array(const json& j, const std::string& ctx) {
    if (!j.is_array()) throw ModelError(ctx + ": expected an array");
    return j;
}

std::string as_string(const json& j, const std::string& ctx) {
    if (!j.is_string()) throw ModelError(ctx + ": expected a string");
    return j.get<std::string>();
}

std::int64_t as_integer(const json& j, const std::string& ctx) {
    if (!j.is_number_integer()) throw ModelError(ctx + ": expected an integer");
    return j.get<std::int64_t>();
}

double as_number(const json& j, const std::string& ctx) {
    if (!j.is_number()) throw ModelError(ctx + ": expected a number");
    return j.get<double>();
}

Eigen::VectorXd as_vector(const json& j, const std::string& ctx) {
    as_array(j, ctx);
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = as_number(j[i], ctx);
    return v;
}

Eigen::MatrixXd as_matrix(const json& j, const std::string& ctx) {
    as_array(j, ctx);
    if (j.empty()) throw ModelError(ctx + ": matrix must be non-empty");
    const std::size_t cols = as_array(j[0], ctx).size();
    Eigen::MatrixXd m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        const json& row = as_array(j[r], ctx);
        if (row.size() != cols) throw ModelError(ctx + ": matrix rows have unequal lengths");
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = as_number(row[c], ctx);
    }
    return m;
}

Space parse_space(const json& j, const std::string& ctx) {
    as_object(j, ctx);
    check_keys(j, {"finite", "euclidean"}, ctx);
    if (j.size() != 1) throw ModelError(ctx + ": space must be exactly one of finite/euclidean");
    if (j.contains("finite")) {
        std::int64_t n = as_integer(j["finite"], ctx + ".finite");
        if (n < 1) throw ModelError(ctx + ": finite cardinality must be positive");
        return Space::finite(n);
    }
    std::int64_t d = as_integer(j["euclidean"], ctx + ".euclidean");
    if (d < 1) throw ModelError(ctx + ": euclidean dimension must be positive");
    return Space::euclidean(static_cast<int>(d));
}

TreeNode::Role parse_role(const json& j, const std::string& ctx) {
    std::string role = as_string(j, ctx);
    if (role == "root") return TreeNode::Role::Root;
    if (role == "latent") return TreeNode::Role::Latent;
    if (role == "leaf") return TreeNode::Role::Leaf;
    throw ModelError(ctx + ": role must be root, latent, or leaf");
}

Point parse_point(const json& j, const Space& s, const std::string& ctx) {
    if (s.kind() == Space::Kind::Finite) {
        std::int64_t v = as_integer(j, ctx);
        if (v < 0 || v >= s.cardinality())
            throw ModelError(ctx + ": state index out of range");
        return Point::index(v);
    }
    if (s.kind() == Space::Kind::Euclidean) {
        Eigen::VectorXd v = as_vector(j, ctx);
        if (v.size() != s.dimension()) throw ModelError(ctx + ": vector dimension mismatch");
        return Point::vector(std::move(v));
    }
    throw ModelError(ctx + ": values on product spaces are not representable in this format");
}

Kernel parse_kernel(const json& j, const Space& source, const Space& target,
                    const std::string& ctx) {
    as_object(j, ctx);
    std::string type = as_string(require_key(j, "type", ctx), ctx + ".type");
    if (type == "discrete") {
        check_keys(j, {"type", "matrix"}, ctx);
        if (source.kind() != Space::Kind::Finite || target.kind() != Space::Kind::Finite)
            throw ModelError(ctx + ": a discrete kernel needs finite endpoint spaces");
        Eigen::MatrixXd m = as_matrix(require_key(j, "matrix", ctx), ctx + ".matrix");
        if (m.rows() != source.cardinality() || m.cols() != target.cardinality())
            throw ModelError(ctx + ": matrix shape does not match the endpoint spaces");
        return Kernel::discrete_on(source, target, std::move(m));
    }
    if (type == "linear_gaussian") {
        check_keys(j, {"type", "B", "beta", "Q"}, ctx);
        if (source.kind() != Space::Kind::Euclidean || target.kind() != Space::Kind::Euclidean)
            throw ModelError(ctx + ": a linear_gaussian kernel needs euclidean endpoint spaces");
        Eigen::MatrixXd b = as_matrix(require_key(j, "B", ctx), ctx + ".B");
        Eigen::VectorXd beta = as_vector(require_key(j, "beta", ctx), ctx + ".beta");
        Eigen::MatrixXd q = as_matrix(require_key(j, "Q", ctx), ctx + ".Q");
        if (b.rows() != target.dimension() || b.cols() != source.dimension())
            throw ModelError(ctx + ": B shape does not match the endpoint spaces");
        if (beta.size() != target.dimension()) throw ModelError(ctx + ": beta dimension mismatch");
        if (q.rows() != target.dimension() || q.cols() != target.dimension())
            throw ModelError(ctx + ": Q shape does not match the target space");
        return Kernel::linear_gaussian_on(source, target, std::move(b), std::move(beta),
                                          std::move(q));
    }
    if (type == "identity") {
        check_keys(j, {"type"}, ctx);
        if (!(source == target))
            throw ModelError(ctx + ": an identity kernel needs equal endpoint spaces");
        return Kernel::identity(source);
    }
    if (type == "duplicate") {
        check_keys(j, {"type"}, ctx);
        if (!(target == Space::pair(source, source)))
            throw ModelError(ctx + ": a duplicate kernel needs target = source x source");
        return Kernel::duplication(source);
    }
    throw ModelError(ctx + ": unknown kernel type '" + type + "'");
}

} // namespace

TreeModel parse_model_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ModelError(std::string("model: invalid JSON: ") + e.what());
    }
    as_object(doc, "model");
    check_keys(doc, {"version", "nodes", "edges", "root_value", "observations"}, "model");
    if (as_string(require_key(doc, "version", "model"), "model.version") != kModelVersion)
        throw ModelError(std::string("model: version must be \"") + kModelVersion + "\"");

    std::vector<TreeNode> nodes;
    std::map<std::string, Space> spaces;
    for (const json& jn : as_array(require_key(doc, "nodes", "model"), "model.nodes")) {
        as_object(jn, "node");
        check_keys(jn, {"id", "space", "role"}, "node");
        std::string id = as_string(require_key(jn, "id", "node"), "node.id");
        Space s = parse_space(require_key(jn, "space", "node"), "node '" + id + "' space");
        TreeNode::Role role = parse_role(require_key(jn, "role", "node"), "node '" + id + "' role");
        spaces.emplace(id, s);
        nodes.push_back({std::move(id), std::move(s), role});
    }

    auto space_of = [&](const std::string& id, const std::string& ctx) -> const Space& {
        auto it = spaces.find(id);
        if (it == spaces.end()) throw ModelError(ctx + ": unknown node '" + id + "'");
        return it->second;
    };

    std::vector<TreeEdge> edges;
    for (const json& je : as_array(require_key(doc, "edges", "model"), "model.edges")) {
        as_object(je, "edge");
        check_keys(je, {"from", "to", "kernel", "backward"}, "edge");
        std::string from = as_string(require_key(je, "from", "edge"), "edge.from");
        std::string to = as_string(require_key(je, "to", "edge"), "edge.to");
        std::string ctx = "edge '" + from + "' -> '" + to + "'";
        const Space& src = space_of(from, ctx);
        const Space& dst = space_of(to, ctx);
        Kernel forward = parse_kernel(require_key(je, "kernel", ctx), src, dst, ctx + " kernel");
        std::optional<Kernel> backward;
        if (je.contains("backward") && !(je["backward"].is_string())) {
            backward = parse_kernel(je["backward"], src, dst, ctx + " backward");
        } else if (je.contains("backward")) {
            if (as_string(je["backward"], ctx + " backward") != "same")
                throw ModelError(ctx + ": backward must be a kernel object or \"same\"");
        }
        edges.push_back({std::move(from), std::move(to), std::move(forward), std::move(backward)});
    }

    std::string root_id;
    for (const TreeNode& n : nodes)
        if (n.role == TreeNode::Role::Root) root_id = n.id;
    if (root_id.empty()) throw ModelError("model: no root node");
    Point root_value = parse_point(require_key(doc, "root_value", "model"),
                                   space_of(root_id, "model"), "model.root_value");

    std::vector<Observation> observations;
    for (const json& jo :
         as_array(require_key(doc, "observations", "model"), "model.observations")) {
        as_object(jo, "observation");
        check_keys(jo, {"leaf", "value"}, "observation");
        std::string leaf = as_string(require_key(jo, "leaf", "observation"), "observation.leaf");
        Point value = parse_point(require_key(jo, "value", "observation"),
                                  space_of(leaf, "observation"), "observation for '" + leaf + "'");
        observations.push_back({std::move(leaf), std::move(value)});
    }

    return TreeModel(std::move(nodes), std::move(edges), std::move(root_value),
                     std::move(observations));
}

TreeModel parse_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("model: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model_json(buf.str());
}

namespace {

json space_to_json(const Space& s) {
    if (s.kind() == Space::Kind::Finite) return json{{"finite", s.cardinality()}};
    if (s.kind() == Space::Kind::Euclidean) return json{{"euclidean", s.dimension()}};
    throw ModelError("model: product node spaces are not representable in this format");
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

json point_to_json(const Point& p) {
    if (p.kind() == Point::Kind::Index) return json(p.index_value());
    if (p.kind() == Point::Kind::Vector) return vector_to_json(p.vector_value());
    throw ModelError("model: tuple values are not representable in this format");
}

json kernel_to_json(const Kernel& k) {
    switch (k.kind()) {
    case Kernel::Kind::Discrete:
        return json{{"type", "discrete"}, {"matrix", matrix_to_json(k.matrix())}};
    case Kernel::Kind::LinearGaussian:
        return json{{"type", "linear_gaussian"},
                    {"B", matrix_to_json(k.transition())},
                    {"beta", vector_to_json(k.shift())},
                    {"Q", matrix_to_json(k.noise_cov())}};
    case Kernel::Kind::Identity:
        return json{{"type", "identity"}};
    case Kernel::Kind::Duplication:
        return json{{"type", "duplicate"}};
    default:
        throw ModelError("model: composite kernels are not representable in this format");
    }
}

} // namespace

std::string model_to_json(const TreeModel& t) {
    nlohmann::ordered_json doc;
    doc["version"] = kModelVersion;
    doc["nodes"] = json::array();
    for (const TreeNode& n : t.nodes()) {
        nlohmann::ordered_json jn;
        jn["id"] = n.id;
        jn["space"] = space_to_json(n.space);
        jn["role"] = n.role == TreeNode::Role::Root     ? "root"
                     : n.role == TreeNode::Role::Latent ? "latent"
                                                        : "leaf";
        doc["nodes"].push_back(std::move(jn));
    }
    doc["edges"] = json::array();
    for (const TreeEdge& e : t.edges()) {
        nlohmann::ordered_json je;
        je["from"] = e.from;
        je["to"] = e.to;
        je["kernel"] = kernel_to_json(e.forward);
        if (e.backward) je["backward"] = kernel_to_json(*e.backward);
        doc["edges"].push_back(std::move(je));
    }
    doc["root_value"] = point_to_json(t.root_value());
    doc["observations"] = json::array();
    for (const Observation& ob : t.observations()) {
        nlohmann::ordered_json jo;
        jo["leaf"] = ob.leaf;
        jo["value"] = point_to_json(ob.value);
        doc["observations"].push_back(std::move(jo));
    }
    return doc.dump(2) + "\n";
}

namespace {

void append_escaped(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\u%04x", c);
                out += buf;
            } else {
                out += c;
            }
        }
    }
    out += '"';
}

void append_real(std::string& out, double v) {
    if (std::isnan(v)) {
        out += "\"nan\"";
        return;
    }
    if (std::isinf(v)) {
        out += v > 0 ? "\"inf\"" : "\"-inf\"";
        return;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

void append_real_vector(std::string& out, const Eigen::VectorXd& v) {
    out += '[';
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        append_real(out, v[i]);
    }
    out += ']';
}

void append_real_matrix(std::string& out, const Eigen::MatrixXd& m) {
    out += '[';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (r) out += ", ";
        out += '[';
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out += ", ";
            append_real(out, m(r, c));
        }
        out += ']';
    }
    out += ']';
}

void append_point(std::string& out, const Point& p) {
    if (p.kind() == Point::Kind::Index) {
        out += std::to_string(p.index_value());
        return;
    }
    if (p.kind() == Point::Kind::Vector) {
        append_real_vector(out, p.vector_value());
        return;
    }
    throw ModelError("result: tuple-valued points are not representable in this format");
}

void append_measure(std::string& out, const FiniteMeasure& m) {
    switch (m.kind()) {
    case FiniteMeasure::Kind::Discrete:
        out += "{\"type\": \"discrete\", \"weights\": ";
        append_real_vector(out, m.weights());
        out += '}';
        return;
    case FiniteMeasure::Kind::Gaussian:
        out += "{\"type\": \"gaussian\", \"mass\": ";
        append_real(out, m.mass());
        out += ", \"mean\": ";
        append_real_vector(out, m.mean());
        out += ", \"cov\": ";
        append_real_matrix(out, m.cov());
        out += '}';
        return;
    case FiniteMeasure::Kind::Dirac:
        out += "{\"type\": \"dirac\", \"mass\": ";
        append_real(out, m.mass());
        out += ", \"value\": ";
        append_point(out, m.point());
        out += '}';
        return;
    case FiniteMeasure::Kind::Product:
        throw ModelError("result: product-space marginals are not representable in this format");
    }
    throw ModelError("result: unknown measure kind");
}

} // namespace

std::string result_to_json(const SmoothingResult& r, double wall_clock_ms) {
    std::string out;
    out += "{\n";
    out += "  \"version\": \"";
    out += kResultVersion;
    out += "\",\n  \"mode\": \"" + r.mode + "\",\n";
    out += "  \"stream_algorithm\": \"";
    out += RandomStream::algorithm_id;
    out += "\",\n  \"wall_clock_ms\": ";
    append_real(out, wall_clock_ms);
    out += ",\n  \"evidence\": ";
    append_real(out, r.evidence);
    out += ",\n  \"log_evidence\": ";
    append_real(out, r.log_evidence);

    if (r.mode == "exact") {
        out += ",\n  \"marginals\": {";
        bool first = true;
        for (const auto& [id, measure] : r.marginals) {
            out += first ? "\n    " : ",\n    ";
            first = false;
            append_escaped(out, id);
            out += ": ";
            append_measure(out, measure);
        }
        out += first ? "}" : "\n  }";
        out += "\n}\n";
        return out;
    }

    out += ",\n  \"seed\": " + std::to_string(r.seed);
    out += ",\n  \"replicates\": " + std::to_string(r.replicates);
    out += ",\n  \"node_estimates\": {";
    bool first = true;
    for (const auto& [id, est] : r.node_estimates) {
        out += first ? "\n    " : ",\n    ";
        first = false;
        append_escaped(out, id);
        out += ": ";
        append_real_vector(out, est);
    }
    out += first ? "}" : "\n  }";
    out += ",\n  \"trajectories\": [";
    first = true;
    for (const Trajectory& tr : r.trajectories) {
        out += first ? "\n    " : ",\n    ";
        first = false;
        out += "{\"weight\": ";
        append_real(out, tr.weight);
        out += ", \"log_weight\": ";
        append_real(out, tr.log_weight);
        out += ", \"points\": {";
        bool first_point = true;
        for (const auto& [id, point] : tr.points) {
            if (!first_point) out += ", ";
            first_point = false;
            append_escaped(out, id);
            out += ": ";
            append_point(out, point);
        }
        out += "}}";
    }
    out += first ? "]" : "\n  ]";
    out += "\n}\n";
    return out;
}

void write_result_file(const std::string& path, const SmoothingResult& r, double wall_clock_ms) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw ModelError("result: cannot open '" + path + "' for writing");
    outf << result_to_json(r, wall_clock_ms);
    if (!outf) throw ModelError("result: failed to write '" + path + "'");
}

namespace {

double real_from(const json& j, const std::string& ctx) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw ModelError(ctx + ": expected a real number");
}

Point point_from(const json& j, const std::string& ctx) {
    if (j.is_number_integer()) return Point::index(j.get<std::int64_t>());
    if (j.is_array()) {
        Eigen::VectorXd v(j.size());
        for (std::size_t i = 0; i < j.size(); ++i)
            v[static_cast<Eigen::Index>(i)] = real_from(j[i], ctx);
        return Point::vector(std::move(v));
    }
    throw ModelError(ctx + ": expected a state index or a coordinate array");
}

FiniteMeasure measure_from(const json& j, const std::string& ctx) {
    as_object(j, ctx);
    std::string type = as_string(require_key(j, "type", ctx), ctx + ".type");
    if (type == "discrete") {
        check_keys(j, {"type", "weights"}, ctx);
        return FiniteMeasure::discrete(as_vector(require_key(j, "weights", ctx), ctx));
    }
    if (type == "gaussian") {
        check_keys(j, {"type", "mass", "mean", "cov"}, ctx);
        return FiniteMeasure::weighted_gaussian(as_number(require_key(j, "mass", ctx), ctx),
                                                as_vector(require_key(j, "mean", ctx), ctx),
                                                as_matrix(require_key(j, "cov", ctx), ctx));
    }
    if (type == "dirac") {
        check_keys(j, {"type", "mass", "value"}, ctx);
        return FiniteMeasure::dirac(point_from(require_key(j, "value", ctx), ctx),
                                    as_number(require_key(j, "mass", ctx), ctx));
    }
    throw ModelError(ctx + ": unknown measure type '" + type + "'");
}

} // namespace

ParsedResult parse_result_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ModelError(std::string("result: invalid JSON: ") + e.what());
    }
    as_object(doc, "result");
    if (as_string(require_key(doc, "version", "result"), "result.version") != kResultVersion)
        throw ModelError(std::string("result: version must be \"") + kResultVersion + "\"");

    ParsedResult out;
    out.result.mode = as_string(require_key(doc, "mode", "result"), "result.mode");
    out.stream_algorithm =
        as_string(require_key(doc, "stream_algorithm", "result"), "result.stream_algorithm");
    out.wall_clock_ms = real_from(require_key(doc, "wall_clock_ms", "result"), "result.wall_clock_ms");
    out.result.evidence = real_from(require_key(doc, "evidence", "result"), "result.evidence");
    out.result.log_evidence =
        real_from(require_key(doc, "log_evidence", "result"), "result.log_evidence");

    if (out.result.mode == "exact") {
        check_keys(doc,
                   {"version", "mode", "stream_algorithm", "wall_clock_ms", "evidence",
                    "log_evidence", "marginals"},
                   "result");
        const json& marg = as_object(require_key(doc, "marginals", "result"), "result.marginals");
        for (auto it = marg.begin(); it != marg.end(); ++it)
            out.result.marginals.emplace(it.key(),
                                         measure_from(it.value(), "marginal '" + it.key() + "'"));
        return out;
    }
    if (out.result.mode != "sampling")
        throw ModelError("result: mode must be exact or sampling");
    check_keys(doc,
               {"version", "mode", "stream_algorithm", "wall_clock_ms", "evidence",
                "log_evidence", "seed", "replicates", "node_estimates", "trajectories"},
               "result");
    out.result.seed =
        require_key(doc, "seed", "result").get<std::uint64_t>();
    out.result.replicates = as_integer(require_key(doc, "replicates", "result"), "result.replicates");
    const json& est = as_object(require_key(doc, "node_estimates", "result"), "result.node_estimates");
    for (auto it = est.begin(); it != est.end(); ++it)
        out.result.node_estimates.emplace(it.key(), as_vector(it.value(), "estimate"));
    for (const json& jt :
         as_array(require_key(doc, "trajectories", "result"), "result.trajectories")) {
        as_object(jt, "trajectory");
        check_keys(jt, {"weight", "log_weight", "points"}, "trajectory");
        Trajectory tr{real_from(require_key(jt, "weight", "trajectory"), "trajectory.weight"),
                      real_from(require_key(jt, "log_weight", "trajectory"), "trajectory.log_weight"),
                      {}};
        const json& pts = as_object(require_key(jt, "points", "trajectory"), "trajectory.points");
        for (auto it = pts.begin(); it != pts.end(); ++it)
            tr.points.emplace(it.key(), point_from(it.value(), "trajectory point"));
        out.result.trajectories.push_back(std::move(tr));
    }
    return out;
}

ParsedResult parse_result_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("result: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_result_json(buf.str());
}

} // namespace bffg
