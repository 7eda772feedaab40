#include "bsei/config.hpp"

#include "bsei/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <vector>

namespace bsei {

using nlohmann::json;

namespace {

/// Walks a JSON document while remembering the dotted field path and the
/// source text, so every diagnostic names the field and its line.
class Field {
public:
    Field(const json& node, std::string path, const std::string& text, std::size_t pos)
        : node_(node), path_(std::move(path)), text_(text), pos_(pos) {}

    [[noreturn]] void fail(const std::string& message) const {
        std::string where = "config field '" + (path_.empty() ? std::string("<root>") : path_) + "'";
        if (const auto line = line_number(); line > 0) where += " (line " + std::to_string(line) + ")";
        throw InputError(where + ": " + message);
    }

    void only(std::initializer_list<const char*> allowed) const {
        if (!node_.is_object()) fail("expected an object");
        for (const auto& [key, _] : node_.items()) {
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
                child_unchecked(key).fail("unknown key");
            }
        }
    }

    bool has(const char* key) const { return node_.is_object() && node_.contains(key); }

    Field operator[](const char* key) const {
        if (!node_.is_object()) fail("expected an object");
        if (!node_.contains(key)) child_unchecked(key).fail("missing required key");
        return child_unchecked(key);
    }

    Field at(std::size_t i) const {
        return Field(node_.at(i), path_ + "[" + std::to_string(i) + "]", text_, pos_);
    }

    const json& node() const { return node_; }

    double number() const {
        if (!node_.is_number()) fail("expected a number");
        const double v = node_.get<double>();
        if (!std::isfinite(v)) fail("expected a finite number");
        return v;
    }

    double number_in(double lo, double hi, bool lo_open, bool hi_open, const std::string& range) const {
        const double v = number();
        const bool ok = (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
        if (!ok) fail("value " + format(v) + " outside " + range);
        return v;
    }

    std::uint64_t integer(std::uint64_t lo, std::uint64_t hi) const {
        if (!node_.is_number_integer() && !(node_.is_number_float() && is_integral(node_.get<double>()))) {
            fail("expected an integer");
        }
        if (node_.is_number_integer() && node_.get<long long>() < 0) fail("expected a nonnegative integer");
        const double v = node_.get<double>();
        if (v < static_cast<double>(lo) || v > static_cast<double>(hi)) {
            fail("value " + format(v) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
        return node_.is_number_unsigned() ? node_.get<std::uint64_t>() : static_cast<std::uint64_t>(v);
    }

    bool boolean() const {
        if (!node_.is_boolean()) fail("expected true or false");
        return node_.get<bool>();
    }

    std::string string() const {
        if (!node_.is_string()) fail("expected a string");
        return node_.get<std::string>();
    }

    std::size_t array_size() const {
        if (!node_.is_array()) fail("expected an array");
        return node_.size();
    }

    StateVector vector(std::size_t dim) const {
        if (array_size() != dim) fail("expected " + std::to_string(dim) + " entries");
        StateVector v(static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i) v[static_cast<Eigen::Index>(i)] = at(i).number();
        return v;
    }

    Eigen::MatrixXd matrix(std::size_t rows, std::size_t cols) const {
        if (array_size() != rows) fail("expected " + std::to_string(rows) + " rows");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < rows; ++i) m.row(static_cast<Eigen::Index>(i)) = at(i).vector(cols).transpose();
        return m;
    }

private:
    static bool is_integral(double v) { return std::isfinite(v) && std::floor(v) == v; }

    static std::string format(double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    }

    Field child_unchecked(const std::string& key) const {
        static const json null_node;
        const json& child = node_.contains(key) ? node_.at(key) : null_node;
        std::size_t pos = pos_;
        const std::string quoted = "\"" + key + "\"";
        if (const auto found = text_.find(quoted, pos_); found != std::string::npos) pos = found;
        return Field(child, path_.empty() ? key : path_ + "." + key, text_, pos);
    }

    std::size_t line_number() const {
        if (pos_ == 0 || pos_ > text_.size()) return 0;
        return 1 + static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + static_cast<long>(pos_), '\n'));
    }

    const json& node_;
    std::string path_;
    const std::string& text_;
    std::size_t pos_;
};

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
        const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
        throw InputError("config: JSON syntax error at line " + std::to_string(line) + ": " + e.what());
    }
}

void check_schema(const Field& root) {
    const Field schema = root["schema"];
    if (schema.integer(0, 1000) != static_cast<std::uint64_t>(kConfigSchema)) {
        schema.fail("unsupported schema version (expected " + std::to_string(kConfigSchema) + ")");
    }
}

TerminalSpec parse_terminal(const Field& f, std::size_t dim) {
    f.only({"kind", "c"});
    TerminalSpec t;
    const Field kind = f["kind"];
    const std::string k = kind.string();
    if (k == "constant") {
        t.kind = TerminalSpec::Kind::constant;
    } else if (k == "linear") {
        t.kind = TerminalSpec::Kind::linear;
    } else if (k == "quadratic") {
        t.kind = TerminalSpec::Kind::quadratic;
    } else {
        kind.fail("expected one of constant, linear, quadratic");
    }
    t.c = f["c"].vector(dim);
    return t;
}

SetValuedSpec parse_generator(const Field& f, std::size_t dim, double lipschitz) {
    f.only({"shape", "radius", "vertices", "offset", "a_y", "a_z"});
    const std::string shape_name = f["shape"].string();
    GeneratorShape shape = SingletonShape{};
    if (shape_name == "singleton") {
        if (f.has("radius")) f["radius"].fail("only allowed for shape ball");
        if (f.has("vertices")) f["vertices"].fail("only allowed for shape polytope");
    } else if (shape_name == "ball") {
        if (f.has("vertices")) f["vertices"].fail("only allowed for shape polytope");
        shape = BallShape{f["radius"].number_in(0.0, 1e300, false, false, "[0, inf)")};
    } else if (shape_name == "polytope") {
        if (f.has("radius")) f["radius"].fail("only allowed for shape ball");
        const Field v = f["vertices"];
        const std::size_t n = v.array_size();
        if (n == 0) v.fail("at least one vertex is required");
        Eigen::MatrixXd offsets(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
        for (std::size_t j = 0; j < n; ++j) offsets.col(static_cast<Eigen::Index>(j)) = v.at(j).vector(dim);
        shape = PolytopeShape{offsets};
    } else {
        f["shape"].fail("expected one of singleton, ball, polytope");
    }
    const StateVector offset = f.has("offset") ? f["offset"].vector(dim) : StateVector::Zero(static_cast<Eigen::Index>(dim));
    const Eigen::MatrixXd a_y = f.has("a_y") ? f["a_y"].matrix(dim, dim) : Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    const Eigen::MatrixXd a_z = f.has("a_z") ? f["a_z"].matrix(dim, dim) : Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    try {
        return SetValuedSpec({offset}, a_y, a_z, shape, lipschitz);
    } catch (const InputError& e) {
        f.fail(e.what());
    }
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

RunConfig parse_run_config(const std::string& text) {
    const json doc = parse_json(text);
    const Field root(doc, "", text, 0);
    root.only({"schema", "problem", "numerics", "thresholds", "outputs"});
    check_schema(root);

    const Field pf = root["problem"];
    pf.only({"T", "p", "dim", "A", "terminal", "generator", "K"});
    const double horizon = pf["T"].number_in(0.0, 1e6, true, false, "(0, 1e6]");
    const double p = pf["p"].number_in(1.0, 8.0, true, false, "(1, 8]");
    const auto dim = static_cast<std::size_t>(pf["dim"].integer(1, 64));
    const double k = pf["K"].number_in(0.0, 1e12, false, false, "[0, 1e12]");
    const Eigen::MatrixXd a = pf["A"].matrix(dim, dim);
    TerminalSpec terminal = parse_terminal(pf["terminal"], dim);
    SetValuedSpec gspec = parse_generator(pf["generator"], dim, k);

    RunConfig cfg{BSEIProblem(horizon, p, Generator(a), std::move(terminal), std::move(gspec)), {}, {}, {}};

    const Field nf = root["numerics"];
    nf.only({"steps_per_window", "paths", "seed", "basis_degree", "c_pE", "tol", "n_max"});
    cfg.numerics.steps_per_window = static_cast<std::size_t>(nf["steps_per_window"].integer(4, 10'000));
    cfg.numerics.paths = static_cast<std::size_t>(nf["paths"].integer(100, 10'000'000));
    cfg.numerics.seed = nf["seed"].integer(0, ~std::uint64_t{0});
    if (nf.has("basis_degree")) cfg.numerics.basis_degree = static_cast<std::size_t>(nf["basis_degree"].integer(1, 8));
    if (nf.has("c_pE")) cfg.numerics.c_pe = nf["c_pE"].number_in(0.0, 1e6, true, false, "(0, 1e6]");
    if (nf.has("tol")) cfg.numerics.tol = nf["tol"].number_in(0.0, 1e6, true, false, "(0, 1e6]");
    if (nf.has("n_max")) cfg.numerics.n_max = static_cast<std::size_t>(nf["n_max"].integer(1, 10'000));
    const std::size_t design = 2 * (cfg.numerics.basis_degree + 1);
    if (cfg.numerics.paths < kPathsPerBasisFunction * design) {
        nf["paths"].fail("need at least " + std::to_string(kPathsPerBasisFunction * design) +
                         " paths for basis_degree " + std::to_string(cfg.numerics.basis_degree));
    }

    if (root.has("thresholds")) {
        const Field tf = root["thresholds"];
        tf.only({"inclusion", "equation"});
        if (tf.has("inclusion")) cfg.thresholds.inclusion = tf["inclusion"].number_in(0.0, 1e300, true, false, "(0, inf)");
        if (tf.has("equation")) cfg.thresholds.equation = tf["equation"].number_in(0.0, 1e300, true, false, "(0, inf)");
    }

    const Field of = root["outputs"];
    of.only({"report_path", "convergence_csv_path", "emit_plot_data", "plot_data_path"});
    cfg.outputs.report_path = of["report_path"].string();
    cfg.outputs.convergence_csv_path = of["convergence_csv_path"].string();
    if (of.has("emit_plot_data")) cfg.outputs.emit_plot_data = of["emit_plot_data"].boolean();
    if (of.has("plot_data_path")) cfg.outputs.plot_data_path = of["plot_data_path"].string();
    return cfg;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_text_file(path)); }

GammaNormRequest parse_gamma_request(const std::string& text) {
    const json doc = parse_json(text);
    const Field root(doc, "", text, 0);
    root.only({"schema", "s", "t", "nodes", "dim", "terms", "n_gauss", "seed"});
    check_schema(root);
    const double s = root["s"].number_in(0.0, 1e6, false, false, "[0, 1e6]");
    const double t = root["t"].number_in(0.0, 1e6, true, false, "(0, 1e6]");
    if (!(s < t)) root["t"].fail("must exceed s");
    const auto nodes = static_cast<std::size_t>(root["nodes"].integer(1, 10'000'000));
    const auto dim = static_cast<std::size_t>(root["dim"].integer(1, 4096));
    const Field terms = root["terms"];
    const std::size_t n_terms = terms.array_size();
    if (n_terms == 0) terms.fail("at least one term is required");

    const Eigen::VectorXd grid = FiniteRankOperator::uniform_nodes(s, t, nodes);
    const double h = (t - s) / static_cast<double>(nodes);
    std::vector<RankOneTerm> list;
    for (std::size_t j = 0; j < n_terms; ++j) {
        const Field term = terms.at(j);
        term.only({"h", "indicator", "e"});
        RankOneTerm rt;
        rt.e = term["e"].vector(dim);
        if (term.has("h") == term.has("indicator")) term.fail("give exactly one of 'h' and 'indicator'");
        if (term.has("h")) {
            rt.h = term["h"].vector(nodes);
        } else {
            const Field ind = term["indicator"];
            rt.h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nodes));
            for (std::size_t i = 0; i < ind.array_size(); ++i) {
                const Field iv = ind.at(i);
                const StateVector ab = iv.vector(2);
                if (!(ab[0] >= s && ab[0] <= ab[1] && ab[1] <= t)) iv.fail("interval must satisfy s <= a <= b <= t");
                for (Eigen::Index c = 0; c < grid.size(); ++c) {
                    const double mid = grid[c] + 0.5 * h;
                    if (mid > ab[0] && mid < ab[1]) rt.h[c] = 1.0;
                }
            }
        }
        list.push_back(std::move(rt));
    }
    GammaNormRequest req{FiniteRankOperator::on_uniform_grid(s, t, nodes, std::move(list)), 100'000, 1};
    if (root.has("n_gauss")) req.n_gauss = static_cast<std::size_t>(root["n_gauss"].integer(1, 100'000'000));
    if (root.has("seed")) req.seed = root["seed"].integer(0, ~std::uint64_t{0});
    return req;
}

GammaNormRequest load_gamma_request(const std::string& path) { return parse_gamma_request(read_text_file(path)); }

}  // namespace bsei
