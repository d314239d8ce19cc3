#include "voxlab/serialize.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace voxlab {

namespace {

Json vec_json(const Eigen::Ref<const Vec>& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Vec json_vec(const Json& j, const char* what) {
    if (!j.is_array()) throw Error(std::string(what) + ": expected an array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw Error(std::string(what) + ": expected numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Json matrix_rows(const Mat& m) {
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vec_json(m.row(r).transpose()));
    return out;
}

Mat rows_matrix(const Json& j, Eigen::Index cols, const char* what) {
    if (!j.is_array()) throw Error(std::string(what) + ": expected an array of rows");
    Mat m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        Vec row = json_vec(j[r], what);
        if (row.size() != cols) throw Error(std::string(what) + ": row has the wrong length");
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

const Json& field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw Error(std::string("missing field \"") + key + "\"");
    return j.at(key);
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const char* what) {
    if (!j.is_object()) throw Error(std::string(what) + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw Error(std::string(what) + ": unknown field \"" + k + "\"");
}

template <class T>
void read_opt(const Json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(std::string("field \"") + key + "\" has the wrong type");
    }
}

void forbid_in_paper_mode(const Json& j, std::initializer_list<const char*> keys) {
    for (const char* k : keys)
        if (j.contains(k)) throw Error(std::string("field \"") + k + "\" is derived in paper mode");
}

ScheduleMode read_mode(const Json& j) {
    std::string m = "direct";
    read_opt(j, "mode", m);
    if (m == "direct") return ScheduleMode::direct;
    if (m == "paper") return ScheduleMode::paper;
    throw Error("mode must be \"direct\" or \"paper\"");
}

const char* mode_name(ScheduleMode m) { return m == ScheduleMode::paper ? "paper" : "direct"; }

}  // namespace

Json env_to_json(const LowRankMdp& env) {
    const int H = env.horizon(), A = env.num_actions();
    Json j;
    j["H"] = H;
    j["A"] = A;
    j["d"] = env.rank();
    Json layers = Json::array();
    for (int h = 1; h <= H; ++h) layers.push_back(env.state_ids(h));
    j["layers"] = std::move(layers);
    Json phi = Json::array();
    for (int h = 1; h < H; ++h) {
        Json layer = Json::array();
        for (int x = 0; x < env.num_states(h); ++x) {
            Json row = Json::array();
            for (int a = 0; a < A; ++a) row.push_back(vec_json(env.phi().at(h, x, a).transpose()));
            layer.push_back(std::move(row));
        }
        phi.push_back(std::move(layer));
    }
    j["phi"] = std::move(phi);
    Json mu = Json::array();
    for (int h = 2; h <= H; ++h) mu.push_back(matrix_rows(env.mu(h)));
    j["mu"] = std::move(mu);
    j["rho"] = vec_json(env.rho());
    return j;
}

LowRankMdp env_from_json(const Json& j) {
    try {
        check_keys(j, {"H", "A", "d", "layers", "phi", "mu", "rho"}, "environment");
        const int H = field(j, "H").get<int>(), A = field(j, "A").get<int>(), d = field(j, "d").get<int>();
        if (H < 1 || A < 1 || d < 1) throw Error("H, A and d must be positive");
        const Json& layers = field(j, "layers");
        if (!layers.is_array() || static_cast<int>(layers.size()) != H) throw Error("\"layers\" must have H entries");
        std::vector<std::vector<long>> ids;
        for (const auto& l : layers) ids.push_back(l.get<std::vector<long>>());
        const Json& phi = field(j, "phi");
        if (!phi.is_array() || static_cast<int>(phi.size()) != H - 1) throw Error("\"phi\" must have H-1 layers");
        std::vector<Mat> tables;
        for (int h = 1; h < H; ++h) {
            const Json& layer = phi[static_cast<std::size_t>(h - 1)];
            const std::size_t nx = ids[static_cast<std::size_t>(h - 1)].size();
            if (!layer.is_array() || layer.size() != nx) throw Error("\"phi\" layer " + std::to_string(h) + " has the wrong size");
            Mat t(static_cast<Eigen::Index>(nx) * A, d);
            for (std::size_t x = 0; x < nx; ++x) {
                if (!layer[x].is_array() || static_cast<int>(layer[x].size()) != A)
                    throw Error("\"phi\" needs A vectors per state");
                for (int a = 0; a < A; ++a) {
                    Vec v = json_vec(layer[x][static_cast<std::size_t>(a)], "phi");
                    if (v.size() != d) throw Error("\"phi\" vectors must have length d");
                    t.row(static_cast<Eigen::Index>(x) * A + a) = v.transpose();
                }
            }
            tables.push_back(std::move(t));
        }
        const Json& mu = field(j, "mu");
        if (!mu.is_array() || static_cast<int>(mu.size()) != H - 1) throw Error("\"mu\" must have H-1 layers");
        std::vector<Mat> mus;
        for (const auto& m : mu) mus.push_back(rows_matrix(m, d, "mu"));
        Vec rho = json_vec(field(j, "rho"), "rho");
        return LowRankMdp(A, std::move(ids), FeatureMap(A, std::move(tables)), std::move(mus), std::move(rho));
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("environment: ") + e.what());
    }
}

Json policy_to_json(const Policy& pi) {
    Json j;
    j["first"] = pi.first_layer();
    Json tables = Json::array();
    for (const auto& t : pi.tables()) tables.push_back(matrix_rows(t));
    j["tables"] = std::move(tables);
    return j;
}

Policy policy_from_json(const Json& j) {
    try {
        check_keys(j, {"first", "tables"}, "policy");
        const Json& tables = field(j, "tables");
        if (!tables.is_array()) throw Error("policy: \"tables\" must be an array");
        std::vector<Mat> out;
        for (const auto& t : tables) {
            if (!t.is_array() || t.empty() || !t[0].is_array()) throw Error("policy: empty table");
            out.push_back(rows_matrix(t, static_cast<Eigen::Index>(t[0].size()), "policy"));
        }
        return Policy(field(j, "first").get<int>(), std::move(out));
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("policy: ") + e.what());
    }
}

Json distribution_to_json(const PolicyDistribution& P) {
    Json out = Json::array();
    for (const auto& e : P.entries()) {
        Json item;
        item["weight"] = e.weight;
        item["policy"] = policy_to_json(*e.policy);
        out.push_back(std::move(item));
    }
    return out;
}

PolicyDistribution distribution_from_json(const Json& j) {
    if (!j.is_array()) throw Error("policy distribution: expected an array");
    std::vector<PolicyDistribution::Entry> entries;
    for (const auto& item : j) {
        check_keys(item, {"weight", "policy"}, "policy distribution entry");
        const Json& w = field(item, "weight");
        if (!w.is_number()) throw Error("policy distribution: weight must be a number");
        entries.push_back({make_policy_ref(policy_from_json(field(item, "policy"))), w.get<double>()});
    }
    return PolicyDistribution(std::move(entries));
}

Json replearn_config_to_json(const RepLearnConfig& cfg) {
    Json j;
    j["c_stat"] = cfg.c_stat;
    j["delta"] = cfg.delta;
    j["r_big"] = cfg.r_big;
    j["r_small"] = cfg.r_small;
    j["restarts"] = cfg.restarts;
    j["steps"] = cfg.steps;
    j["step_size"] = cfg.step_size;
    j["max_iters"] = cfg.max_iters;
    j["initial_index"] = cfg.initial_index;
    return j;
}

RepLearnConfig replearn_config_from_json(const Json& j) {
    check_keys(j, {"c_stat", "delta", "r_big", "r_small", "restarts", "steps", "step_size", "max_iters", "initial_index"},
               "replearn");
    RepLearnConfig cfg;
    read_opt(j, "c_stat", cfg.c_stat);
    read_opt(j, "delta", cfg.delta);
    read_opt(j, "r_big", cfg.r_big);
    read_opt(j, "r_small", cfg.r_small);
    read_opt(j, "restarts", cfg.restarts);
    read_opt(j, "steps", cfg.steps);
    read_opt(j, "step_size", cfg.step_size);
    read_opt(j, "max_iters", cfg.max_iters);
    read_opt(j, "initial_index", cfg.initial_index);
    return cfg;
}

VoxSchedule vox_schedule_from_json(const Json& j, const ProblemShape& shape) {
    check_keys(j,
               {"mode", "K", "gamma", "n_replearn", "n_estmat", "n_psdp", "c", "eta", "delta", "C", "fw_step",
                "fw_max_iters", "replearn"},
               "vox config");
    VoxSchedule s;
    s.mode = read_mode(j);
    read_opt(j, "c", s.c);
    read_opt(j, "eta", s.eta);
    read_opt(j, "delta", s.delta);
    if (s.mode == ScheduleMode::paper) {
        forbid_in_paper_mode(j, {"K", "gamma", "n_replearn", "n_estmat", "n_psdp"});
        if (!(s.eta > 0.0 && s.c > 0.0 && s.delta > 0.0 && s.delta < 1.0))
            throw Error("vox config: paper mode needs eta > 0, c > 0 and delta in (0, 1)");
        VoxSchedule p = VoxSchedule::paper(s.eta, shape.d, shape.A, shape.H, shape.num_features, s.c, s.delta);
        s.K = p.K;
        s.gamma = p.gamma;
        s.n_replearn = p.n_replearn;
        s.n_estmat = p.n_estmat;
        s.n_psdp = p.n_psdp;
    } else {
        read_opt(j, "K", s.K);
        read_opt(j, "gamma", s.gamma);
        read_opt(j, "n_replearn", s.n_replearn);
        read_opt(j, "n_estmat", s.n_estmat);
        read_opt(j, "n_psdp", s.n_psdp);
    }
    read_opt(j, "C", s.C);
    std::string step = "line_search";
    read_opt(j, "fw_step", step);
    if (step == "line_search")
        s.fw_step = StepRule::line_search;
    else if (step == "paper")
        s.fw_step = StepRule::paper;
    else
        throw Error("vox config: fw_step must be \"line_search\" or \"paper\"");
    read_opt(j, "fw_max_iters", s.fw_max_iters);
    if (j.contains("replearn")) s.replearn = replearn_config_from_json(j.at("replearn"));
    s.validate();
    return s;
}

Json vox_schedule_to_json(const VoxSchedule& s) {
    Json j;
    j["mode"] = mode_name(s.mode);
    j["K"] = s.K;
    j["gamma"] = s.gamma;
    j["n_replearn"] = s.n_replearn;
    j["n_estmat"] = s.n_estmat;
    j["n_psdp"] = s.n_psdp;
    j["c"] = s.c;
    j["eta"] = s.eta;
    j["delta"] = s.delta;
    j["C"] = s.C;
    j["fw_step"] = s.fw_step == StepRule::paper ? "paper" : "line_search";
    j["fw_max_iters"] = s.fw_max_iters;
    j["replearn"] = replearn_config_to_json(s.replearn);
    return j;
}

SpanRlSchedule spanrl_schedule_from_json(const Json& j, const ProblemShape& shape) {
    check_keys(j, {"mode", "eps", "eta", "n_replearn", "n_estvec", "n_psdp", "c", "delta", "C", "replearn"},
               "spanrl config");
    SpanRlSchedule s;
    s.mode = read_mode(j);
    read_opt(j, "c", s.c);
    read_opt(j, "delta", s.delta);
    if (s.mode == ScheduleMode::paper) {
        forbid_in_paper_mode(j, {"eps", "n_replearn", "n_estvec", "n_psdp"});
        double eta = 0.0;
        if (!j.contains("eta")) throw Error("spanrl config: paper mode needs eta");
        read_opt(j, "eta", eta);
        if (!(eta > 0.0 && s.c > 0.0 && s.delta > 0.0 && s.delta < 1.0))
            throw Error("spanrl config: paper mode needs eta > 0, c > 0 and delta in (0, 1)");
        SpanRlSchedule p = SpanRlSchedule::paper(SpanRlSchedule::paper_eps(eta, shape.d), shape.d, shape.A, shape.H,
                                                 shape.num_features, s.c, s.delta);
        s.eps = p.eps;
        s.n_replearn = p.n_replearn;
        s.n_estvec = p.n_estvec;
        s.n_psdp = p.n_psdp;
    } else {
        if (j.contains("eta")) throw Error("spanrl config: eta is only used in paper mode; set eps");
        read_opt(j, "eps", s.eps);
        read_opt(j, "n_replearn", s.n_replearn);
        read_opt(j, "n_estvec", s.n_estvec);
        read_opt(j, "n_psdp", s.n_psdp);
    }
    read_opt(j, "C", s.C);
    if (j.contains("replearn")) s.replearn = replearn_config_from_json(j.at("replearn"));
    s.validate();
    return s;
}

Json spanrl_schedule_to_json(const SpanRlSchedule& s) {
    Json j;
    j["mode"] = mode_name(s.mode);
    j["eps"] = s.eps;
    j["n_replearn"] = s.n_replearn;
    j["n_estvec"] = s.n_estvec;
    j["n_psdp"] = s.n_psdp;
    j["c"] = s.c;
    j["delta"] = s.delta;
    j["C"] = s.C;
    j["replearn"] = replearn_config_to_json(s.replearn);
    return j;
}

Json stage_to_json(const StageRecord& st) {
    Json j;
    j["h"] = st.h;
    if (st.k > 0) j["k"] = st.k;
    j["feature_index"] = st.feature_index;
    j["replearn_iterations"] = st.replearn_iterations;
    j["replearn_capped"] = st.replearn_capped;
    j["iterations"] = st.iterations;
    if (st.k > 0) j["certificate"] = st.certificate;
    j["support"] = st.support;
    j["lin_opt_calls"] = st.lin_opt_calls;
    j["lin_est_calls"] = st.lin_est_calls;
    return j;
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("failed writing " + path);
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace voxlab
