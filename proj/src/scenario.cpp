#include "etcons/scenario.hpp"

#include "etcons/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace etcons {

using nlohmann::json;

namespace {

// JSON cursor that remembers its pointer path for error messages.
class Node {
  public:
    Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    const json& raw() const { return *j_; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(path_.empty() ? "/" : path_, msg);
    }

    Node at(const std::string& key) const {
        require_object();
        auto it = j_->find(key);
        if (it == j_->end()) {
            fail("missing field '" + key + "'");
        }
        return {*it, path_ + "/" + key};
    }

    std::optional<Node> find(const std::string& key) const {
        require_object();
        auto it = j_->find(key);
        if (it == j_->end() || it->is_null()) {
            return std::nullopt;
        }
        return Node{*it, path_ + "/" + key};
    }

    void allow_keys(std::initializer_list<const char*> keys) const {
        require_object();
        const std::set<std::string> ok(keys.begin(), keys.end());
        for (auto it = j_->begin(); it != j_->end(); ++it) {
            if (!ok.count(it.key())) {
                Node{it.value(), path_ + "/" + it.key()}.fail("unknown field");
            }
        }
    }

    std::size_t size() const {
        require_array();
        return j_->size();
    }

    Node operator[](std::size_t i) const {
        require_array();
        return {(*j_)[i], path_ + "/" + std::to_string(i)};
    }

    bool is_array() const { return j_->is_array(); }
    bool is_object() const { return j_->is_object(); }

    double number() const {
        if (!j_->is_number()) {
            fail("expected a number");
        }
        const double v = j_->get<double>();
        if (!std::isfinite(v)) {
            fail("expected a finite number");
        }
        return v;
    }

    std::size_t count() const {
        if (!j_->is_number_integer() || j_->get<long long>() < 0) {
            fail("expected a non-negative integer");
        }
        return j_->get<std::size_t>();
    }

    std::string string() const {
        if (!j_->is_string()) {
            fail("expected a string");
        }
        return j_->get<std::string>();
    }

    bool boolean() const {
        if (!j_->is_boolean()) {
            fail("expected true or false");
        }
        return j_->get<bool>();
    }

    Vec vector() const {
        require_array();
        Vec v(static_cast<Eigen::Index>(j_->size()));
        for (std::size_t i = 0; i < j_->size(); ++i) {
            v(static_cast<Eigen::Index>(i)) = (*this)[i].number();
        }
        return v;
    }

    /// Row-major nested list; [] is a 0 x 0 matrix.
    Mat matrix() const {
        require_array();
        const std::size_t rows = j_->size();
        if (rows == 0) {
            return Mat(0, 0);
        }
        const std::size_t cols = (*this)[0].size();
        Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t r = 0; r < rows; ++r) {
            const Node row = (*this)[r];
            if (row.size() != cols) {
                row.fail("row has " + std::to_string(row.size()) + " entries, expected " +
                         std::to_string(cols));
            }
            for (std::size_t c = 0; c < cols; ++c) {
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].number();
            }
        }
        return m;
    }

  private:
    void require_object() const {
        if (!j_->is_object()) {
            fail("expected an object");
        }
    }
    void require_array() const {
        if (!j_->is_array()) {
            fail("expected a list");
        }
    }

    const json* j_;
    std::string path_;
};

std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

std::size_t one_based(const Node& n, std::size_t lo, std::size_t hi, const char* what) {
    const std::size_t v = n.count();
    if (v < lo || v > hi) {
        n.fail(std::string(what) + " " + std::to_string(v) + " outside " + std::to_string(lo) +
               ".." + std::to_string(hi));
    }
    return v;
}

LeaderGraph parse_graph(const Node& g, std::size_t nodes, bool leader_allowed) {
    g.allow_keys({"edges", "leader", "name"});
    UGraph ug(nodes);
    if (auto edges = g.find("edges")) {
        for (std::size_t e = 0; e < edges->size(); ++e) {
            const Node edge = (*edges)[e];
            if (edge.size() != 2) {
                edge.fail("an edge is a pair [i, j]");
            }
            const std::size_t i = one_based(edge[0], 1, nodes, "node");
            const std::size_t j = one_based(edge[1], 1, nodes, "node");
            if (i == j) {
                edge.fail("self-loops are not allowed");
            }
            ug.connect(i - 1, j - 1);
        }
    }
    std::vector<std::uint8_t> links(nodes, 0);
    if (auto leader = g.find("leader")) {
        if (!leader_allowed) {
            leader->fail("leader links are only meaningful in heterogeneous scenarios");
        }
        for (std::size_t k = 0; k < leader->size(); ++k) {
            links[one_based((*leader)[k], 1, nodes, "follower") - 1] = 1;
        }
    }
    return LeaderGraph(std::move(ug), std::move(links));
}

void parse_network(const Node& net, Scenario& sc, bool leader_allowed) {
    net.allow_keys({"nodes", "graphs", "schedule"});
    if (auto nodes = net.find("nodes")) {
        const std::size_t n = nodes->count();
        if (sc.nodes != 0 && n != sc.nodes) {
            nodes->fail("node count " + std::to_string(n) + " does not match " +
                        std::to_string(sc.nodes) + " followers");
        }
        sc.nodes = n;
    }
    if (sc.nodes == 0) {
        net.fail("network needs 'nodes' (number of agents)");
    }
    const Node graphs = net.at("graphs");
    if (graphs.size() == 0) {
        graphs.fail("at least one graph is required");
    }
    for (std::size_t g = 0; g < graphs.size(); ++g) {
        sc.graphs.push_back(parse_graph(graphs[g], sc.nodes, leader_allowed));
    }

    const Node sched = net.at("schedule");
    sched.allow_keys({"dwell", "period_bound", "intervals", "repeat"});
    sc.dwell = sched.at("dwell").number();
    if (auto pb = sched.find("period_bound")) {
        sc.period_bound = pb->number();
    }
    if (auto rep = sched.find("repeat")) {
        sc.repeat = rep->count();
    }
    const Node intervals = sched.at("intervals");
    for (std::size_t k = 0; k < intervals.size(); ++k) {
        const Node iv = intervals[k];
        std::vector<SwitchStep> steps;
        for (std::size_t s = 0; s < iv.size(); ++s) {
            const Node entry = iv[s];
            SwitchStep step;
            step.duration = sc.dwell;
            if (entry.is_object()) {
                entry.allow_keys({"graph", "duration"});
                step.graph = one_based(entry.at("graph"), 1, sc.graphs.size(), "graph") - 1;
                if (auto d = entry.find("duration")) {
                    step.duration = d->number();
                }
            } else {
                step.graph = one_based(entry, 1, sc.graphs.size(), "graph") - 1;
            }
            steps.push_back(step);
        }
        sc.pattern.push_back(std::move(steps));
    }
}

std::vector<Vec> parse_vectors(const Node& n) {
    std::vector<Vec> out;
    for (std::size_t i = 0; i < n.size(); ++i) {
        out.push_back(n[i].vector());
    }
    return out;
}

void parse_simulation(const Node& sim, Scenario& sc) {
    sim.allow_keys({"horizon", "step", "seed", "record_stride", "initial", "topology_only",
                    "broadcast_every_step"});
    auto& cfg = sc.sim;
    cfg.horizon = sim.at("horizon").number();
    cfg.step = sim.at("step").number();
    if (auto s = sim.find("seed")) {
        cfg.seed = s->count();
    }
    if (auto r = sim.find("record_stride")) {
        cfg.record_stride = r->count();
    }
    if (auto t = sim.find("topology_only")) {
        cfg.topology_only = t->boolean();
    }
    if (auto b = sim.find("broadcast_every_step")) {
        cfg.broadcast_every_step = b->boolean();
    }
    if (auto init = sim.find("initial")) {
        init->allow_keys({"box", "states", "observers"});
        if (auto box = init->find("box")) {
            const Vec b = box->vector();
            if (b.size() != 2) {
                box->fail("box is [low, high]");
            }
            cfg.initial.box_low = b(0);
            cfg.initial.box_high = b(1);
        }
        if (auto st = init->find("states")) {
            cfg.initial.states = parse_vectors(*st);
        }
        if (auto ob = init->find("observers")) {
            cfg.initial.observers = parse_vectors(*ob);
        }
    }
}

Scenario parse_document(const Node& root) {
    Scenario sc;
    root.allow_keys({"mode", "system", "exosystem", "followers", "protocol", "network",
                     "simulation", "description"});
    const std::string mode = root.at("mode").string();
    if (mode == "homogeneous") {
        sc.mode = Mode::Homogeneous;
    } else if (mode == "heterogeneous") {
        sc.mode = Mode::Heterogeneous;
    } else {
        root.at("mode").fail("mode must be 'homogeneous' or 'heterogeneous'");
    }

    const Node proto = root.at("protocol");
    if (sc.mode == Mode::Homogeneous) {
        const Node sys = root.at("system");
        sys.allow_keys({"A", "B"});
        sc.A = sys.at("A").matrix();
        sc.B = sys.at("B").matrix();
        proto.allow_keys({"c", "delta", "mu", "nu", "G"});
        sc.delta = proto.at("delta").number();
        if (auto g = proto.find("G")) {
            sc.G = g->matrix();
        }
    } else {
        const Node exo = root.at("exosystem");
        exo.allow_keys({"S", "w0"});
        sc.S = exo.at("S").matrix();
        sc.w0 = exo.at("w0").vector();
        const Node fl = root.at("followers");
        for (std::size_t i = 0; i < fl.size(); ++i) {
            const Node f = fl[i];
            f.allow_keys({"A", "B", "C", "E", "F", "K1"});
            FollowerSpec spec;
            spec.system = {f.at("A").matrix(), f.at("B").matrix(), f.at("C").matrix(),
                           f.at("E").matrix(), f.at("F").matrix()};
            if (auto k1 = f.find("K1")) {
                spec.K1 = k1->matrix();
            }
            sc.followers.push_back(std::move(spec));
        }
        if (sc.followers.empty()) {
            fl.fail("at least one follower is required");
        }
        sc.nodes = sc.followers.size();
        proto.allow_keys({"c", "mu", "nu", "degree_mode", "output_map", "feedback_margin"});
        if (auto dm = proto.find("degree_mode")) {
            try {
                sc.degree_mode = parse_degree_mode(dm->string());
            } catch (const ValidationError& e) {
                dm->fail(e.what());
            }
        }
        if (auto r = proto.find("output_map")) {
            sc.output_map = r->matrix();
        }
        if (auto m = proto.find("feedback_margin")) {
            sc.feedback_margin = m->number();
        }
    }
    sc.c = proto.at("c").number();
    sc.mu = proto.at("mu").number();
    sc.nu = proto.at("nu").number();

    parse_network(root.at("network"), sc, sc.mode == Mode::Heterogeneous);
    parse_simulation(root.at("simulation"), sc);
    return sc;
}

void append_number(std::string& out, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

json matrix_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json optional_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string describe(const std::complex<double>& z) {
    std::ostringstream os;
    os.precision(6);
    os << z.real() << (z.imag() < 0 ? " - " : " + ") << std::abs(z.imag()) << "i";
    return os.str();
}

} // namespace

SwitchingSchedule Scenario::schedule() const {
    return {graphs, pattern, dwell, period_bound, repeat, mode == Mode::Heterogeneous};
}

Scenario parse_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(line_col(text, e.byte), "malformed JSON");
    }
    try {
        return parse_document(Node(doc, ""));
    } catch (const ValidationError& e) {
        throw ParseError("/network", e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path.string(), "cannot open scenario file");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

bool ValidationReport::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string ValidationReport::to_text() const {
    std::ostringstream os;
    for (const auto& c : checks) {
        os << (c.passed ? "[pass] " : "[FAIL] ") << c.name;
        if (!c.detail.empty()) {
            os << ": " << c.detail;
        }
        os << '\n';
    }
    os << (ok() ? "scenario valid" : "scenario INVALID") << '\n';
    return os.str();
}

namespace {

template <class F>
CheckResult check(std::string name, F&& body) {
    CheckResult r{std::move(name), true, {}};
    try {
        r.detail = body();
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = e.what();
    }
    return r;
}

void check_schedule(const Scenario& sc, ValidationReport& rep) {
    std::optional<SwitchingSchedule> sched;
    rep.checks.push_back(check("schedule structure (dwell, period bound)", [&] {
        sched.emplace(sc.schedule());
        std::ostringstream os;
        os << "dwell " << sched->dwell() << " s, period bound " << sched->period_bound() << " s, "
           << sched->pattern_size() << " interval(s) per cycle";
        return os.str();
    }));
    if (!sched) {
        return;
    }
    const char* name = sc.mode == Mode::Homogeneous
                           ? "Assumption 2: union graph connected on every interval"
                           : "Assumption 7: leader reaches every follower in every union graph";
    rep.checks.push_back(check(name, [&] {
        const auto report = sched->joint_connectivity();
        std::ostringstream os;
        for (std::size_t k = 0; k < report.per_interval.size(); ++k) {
            os << (k ? ", " : "") << "interval " << k + 1 << ": "
               << (report.per_interval[k] ? "ok" : "fails");
        }
        if (!report.connected) {
            throw ValidationError(os.str());
        }
        return os.str();
    }));
    rep.checks.push_back(check("simulation step and horizon", [&] {
        validate_config(sc.sim, *sched);
        std::ostringstream os;
        os << "h = " << sc.sim.step << " s, horizon " << sc.sim.horizon << " s";
        return os.str();
    }));
}

} // namespace

ValidationReport validate_scenario(const Scenario& sc) {
    ValidationReport rep;
    if (sc.mode == Mode::Homogeneous) {
        rep.checks.push_back(check("system shapes", [&]() -> std::string {
            if (sc.A.rows() == 0 || sc.A.rows() != sc.A.cols() || sc.B.rows() != sc.A.rows()) {
                throw DimensionError("need A n x n and B n x p");
            }
            if (sc.G && (sc.G->rows() != sc.B.cols() || sc.G->cols() != sc.A.rows())) {
                throw DimensionError("G must be p x n");
            }
            return "n = " + std::to_string(sc.A.rows()) + ", p = " + std::to_string(sc.B.cols());
        }));
        rep.checks.push_back(check("Assumption 1: A neutrally stable", [&] {
            const auto d = neutral_stable_decompose(sc.A);
            return std::to_string(d.n1) + " imaginary-axis eigenvalue(s)";
        }));
        rep.checks.push_back(check("Assumption 1: (A, B) stabilizable", [&]() -> std::string {
            if (!is_stabilizable(sc.A, sc.B)) {
                throw ValidationError("PBH rank test fails");
            }
            return "";
        }));
        rep.checks.push_back(check("protocol parameters", [&]() -> std::string {
            HomoParams p(sc.c, sc.delta, sc.mu, sc.nu, Mat::Zero(1, 1));
            return "c > 0, 0 < delta < 1, mu > 0, nu > 0";
        }));
        if (sc.nodes < 2) {
            rep.checks.push_back({"agent count", false, "consensus needs at least two agents"});
        }
    } else {
        for (std::size_t i = 0; i < sc.followers.size(); ++i) {
            const auto& f = sc.followers[i].system;
            const std::string tag = "follower " + std::to_string(i + 1);
            rep.checks.push_back(check("Assumption 3: (A, B) stabilizable, " + tag,
                                       [&]() -> std::string {
                                           if (!is_stabilizable(f.A, f.B)) {
                                               throw ValidationError("PBH rank test fails");
                                           }
                                           return "";
                                       }));
        }
        rep.checks.push_back(check("Assumption 4: S has no eigenvalue in the open right half-plane",
                                   [&]() -> std::string {
                                       if (sc.S.rows() != sc.S.cols() || sc.S.rows() == 0) {
                                           throw DimensionError("S must be square");
                                       }
                                       const double tol = imaginary_axis_tolerance(sc.S);
                                       for (const auto& z : eigenvalues(sc.S)) {
                                           if (z.real() > tol) {
                                               throw ValidationError("eigenvalue " + describe(z));
                                           }
                                       }
                                       if (sc.w0.size() != sc.S.rows()) {
                                           throw DimensionError("w0 length does not match S");
                                       }
                                       return "";
                                   }));
        for (std::size_t i = 0; i < sc.followers.size(); ++i) {
            const auto& f = sc.followers[i].system;
            rep.checks.push_back(check(
                "Assumption 5: transmission-zero rank, follower " + std::to_string(i + 1),
                [&]() -> std::string {
                    std::string seen;
                    for (const auto& z : eigenvalues(sc.S)) {
                        if (!transmission_rank_ok(f, z)) {
                            throw ValidationError("rank deficient at lambda = " + describe(z));
                        }
                        seen += (seen.empty() ? "" : ", ") + describe(z);
                    }
                    return "full rank at " + seen;
                }));
        }
        rep.checks.push_back(check("Assumption 6: regulator equations solvable",
                                   [&]() -> std::string {
                                       const auto g = design_heterogeneous_gains(sc);
                                       std::ostringstream os;
                                       os << "residual " << g.regulator.residual
                                          << (g.regulator.unique
                                                  ? ""
                                                  : " (output map not unique; minimum-norm "
                                                    "solution chosen)");
                                       return os.str();
                                   }));
        rep.checks.push_back(check("observer parameters", [&]() -> std::string {
            if (!(sc.c > 0.0) || !(sc.mu > 0.0) || !(sc.nu > 0.0)) {
                throw ValidationError("c, mu, nu must be positive");
            }
            return "degree mode " + std::string(to_string(sc.degree_mode));
        }));
    }
    check_schedule(sc, rep);
    return rep;
}

HomogeneousGains design_homogeneous_gains(const Scenario& sc) {
    HomogeneousGains g;
    g.decomposition = neutral_stable_decompose(sc.A);
    if (sc.G) {
        g.G = *sc.G;
        g.designed = false;
    } else {
        g.G = -(g.decomposition.E * sc.B).transpose() * g.decomposition.E;
    }
    return g;
}

HeterogeneousGains design_heterogeneous_gains(const Scenario& sc) {
    std::vector<RegulatorAgent> data;
    for (const auto& f : sc.followers) {
        data.push_back(f.system);
    }
    HeterogeneousGains g;
    g.regulator = solve_regulator(data, sc.S, sc.output_map);
    for (std::size_t i = 0; i < sc.followers.size(); ++i) {
        const auto& f = sc.followers[i];
        Mat k1;
        if (f.K1) {
            k1 = *f.K1;
            if (feedback_margin(f.system.A, f.system.B, k1) <= 0.0) {
                throw ValidationError("follower " + std::to_string(i + 1) +
                                      ": A + B K1 is not Hurwitz");
            }
        } else {
            k1 = stabilizing_feedback(f.system.A, f.system.B, sc.feedback_margin);
        }
        g.K2.push_back(compute_K2(k1, g.regulator, i));
        g.K1.push_back(std::move(k1));
    }
    return g;
}

HomoParams homogeneous_params(const Scenario& sc, const Mat& gain) {
    return {sc.c, sc.delta, sc.mu, sc.nu, gain};
}

RunResult run_scenario(const Scenario& sc) {
    RunResult out;
    const SwitchingSchedule sched = sc.schedule();
    if (sc.mode == Mode::Homogeneous) {
        out.homogeneous = design_homogeneous_gains(sc);
        const HomoParams params = homogeneous_params(sc, out.homogeneous->G);
        out.trace = run_homogeneous({sc.A, sc.B}, params, sched, sc.sim);
        out.zeno = zeno_report(out.trace, params, sc.A);
    } else {
        out.heterogeneous = design_heterogeneous_gains(sc);
        std::vector<HeteroAgent> agents;
        for (std::size_t i = 0; i < sc.followers.size(); ++i) {
            const auto& f = sc.followers[i].system;
            agents.push_back({f.A, f.B, f.C, f.E, f.F, out.heterogeneous->K1[i],
                              out.heterogeneous->K2[i], Vec()});
        }
        const Exosystem exo(sc.S, sc.w0);
        out.trace = run_heterogeneous(agents, exo, {sc.c, sc.mu, sc.nu, sc.degree_mode}, sched,
                                      sc.sim);
    }
    return out;
}

std::string states_csv(const SimulationTrace& trace) {
    std::string out = "t";
    if (!trace.states.empty()) {
        const auto& first = trace.states.front();
        for (std::size_t i = 0; i < first.size(); ++i) {
            for (Eigen::Index d = 0; d < first[i].size(); ++d) {
                out += ",agent_" + std::to_string(i + 1) + "_x" + std::to_string(d + 1);
            }
        }
    }
    out += '\n';
    for (std::size_t r = 0; r < trace.times.size(); ++r) {
        append_number(out, trace.times[r]);
        for (const auto& x : trace.states[r]) {
            for (Eigen::Index d = 0; d < x.size(); ++d) {
                out += ',';
                append_number(out, x(d));
            }
        }
        out += '\n';
    }
    return out;
}

std::string events_csv(const SimulationTrace& trace) {
    std::string out = "agent,time,reason\n";
    for (const auto& e : trace.events) {
        out += std::to_string(e.agent + 1);
        out += ',';
        append_number(out, e.time);
        out += ',';
        out += to_string(e.reason);
        out += '\n';
    }
    return out;
}

json metrics_json(const RunResult& result) {
    const auto& tr = result.trace;
    const auto& m = tr.metrics;
    json j;
    j["mode"] = result.homogeneous ? "homogeneous" : "heterogeneous";
    j["steps"] = tr.steps;
    j["step"] = tr.step;
    j["record_times"] = tr.times;
    j["consensus_error_norm"] = m.consensus_error_norm;
    j["observer_error"] = m.observer_error;
    j["final_consensus_error"] =
        m.consensus_error_norm.empty() ? json(nullptr) : json(m.consensus_error_norm.back());
    if (!m.observer_error.empty()) {
        j["final_observer_error"] = m.observer_error.back();
    }
    j["event_count"] = m.event_count;
    json gaps = json::array();
    for (double g : m.min_interevent_gap) {
        gaps.push_back(optional_number(g));
    }
    j["min_interevent_gap"] = gaps;
    j["communication_ratio"] = m.communication_ratio;

    json rows = json::array();
    std::size_t asserted = 0;
    std::size_t violations = 0;
    for (const auto& r : m.bound_check) {
        json row;
        row["agent"] = r.window.agent + 1;
        row["start"] = r.window.start;
        row["end"] = r.window.end;
        row["gap"] = r.gap;
        row["start_reason"] = to_string(r.window.start_reason);
        row["end_reason"] = to_string(r.window.end_reason);
        row["case"] = r.case_label;
        row["sigma"] = r.window.sigma;
        row["degree"] = r.window.degree;
        row["bound"] = r.bound ? json(*r.bound) : json(nullptr);
        row["asserted"] = r.asserted;
        row["passed"] = r.passed;
        asserted += r.asserted ? 1 : 0;
        violations += r.passed ? 0 : 1;
        rows.push_back(std::move(row));
    }
    j["bound_check"] = {{"asserted", asserted}, {"violations", violations}, {"rows", rows}};
    return j;
}

json gains_json(const RunResult& result) {
    json j;
    if (result.homogeneous) {
        const auto& g = *result.homogeneous;
        j["G"] = matrix_json(g.G);
        j["G_source"] = g.designed ? "designed" : "given";
        j["n1"] = g.decomposition.n1;
        j["E"] = matrix_json(g.decomposition.E);
        j["ETE"] = matrix_json(g.decomposition.E.transpose() * g.decomposition.E);
        j["X"] = matrix_json(g.decomposition.X);
        j["Y"] = matrix_json(g.decomposition.Y);
    }
    if (result.heterogeneous) {
        const auto& g = *result.heterogeneous;
        json pi = json::array();
        json u = json::array();
        json k1 = json::array();
        json k2 = json::array();
        double k2_residual = 0.0;
        for (std::size_t i = 0; i < g.K1.size(); ++i) {
            pi.push_back(matrix_json(g.regulator.Pi[i]));
            u.push_back(matrix_json(g.regulator.U[i]));
            k1.push_back(matrix_json(g.K1[i]));
            k2.push_back(matrix_json(g.K2[i]));
            k2_residual = std::max(
                k2_residual, (g.K2[i] - (g.regulator.U[i] - g.K1[i] * g.regulator.Pi[i])).norm());
        }
        j["Pi"] = pi;
        j["U"] = u;
        j["R"] = matrix_json(g.regulator.R);
        j["K1"] = k1;
        j["K2"] = k2;
        j["regulator_residual"] = g.regulator.residual;
        j["regulator_unique"] = g.regulator.unique;
        j["K2_residual"] = k2_residual;
    }
    return j;
}

void write_outputs(const RunResult& result, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    auto write = [&](const char* name, const std::string& body) {
        const auto path = dir / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw Error("cannot write " + path.string());
        }
        out << body;
        if (!out) {
            throw Error("write failed for " + path.string());
        }
    };
    write("states.csv", states_csv(result.trace));
    write("events.csv", events_csv(result.trace));
    write("metrics.json", metrics_json(result).dump(2) + "\n");
    write("gains.json", gains_json(result).dump(2) + "\n");
}

} // namespace etcons
