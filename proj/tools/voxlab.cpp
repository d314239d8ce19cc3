// voxlab command-line front end.
//
// Exit codes: 0 success, 1 verification or run failure, 2 usage or input error.

#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "voxlab/drivers.hpp"
#include "voxlab/evalcover.hpp"
#include "voxlab/serialize.hpp"
#include "voxlab/simenv.hpp"

using namespace voxlab;

namespace {

/// Bad flags, files or configs.
struct UsageError : Error {
    using Error::Error;
};

template <class F>
auto as_usage(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const UsageError&) {
        throw;
    } catch (const Error& e) {
        throw UsageError(e.what());
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(e.what());
    }
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty())
        std::cout << text;
    else
        write_text_file(out, text);
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

LowRankMdp load_env(const std::string& path) {
    return as_usage([&] {
        LowRankMdp env = env_from_json(read_json_file(path));
        ValidationReport rep = validate_mdp(env);
        if (!rep.violations.empty())
            throw Error(path + ": invalid environment: " + rep.violations.front().message);
        return env;
    });
}

Json load_config(const std::string& path) {
    if (path.empty()) return Json::object();
    return as_usage([&] {
        Json j = read_json_file(path);
        if (!j.is_object()) throw Error(path + ": config must be a JSON object");
        return j;
    });
}

int take_decoys(Json& cfg) {
    int n = 0;
    if (cfg.contains("num_decoys")) {
        if (!cfg["num_decoys"].is_number_integer() || cfg["num_decoys"].get<int>() < 0)
            throw UsageError("num_decoys must be a nonnegative integer");
        n = cfg["num_decoys"].get<int>();
        cfg.erase("num_decoys");
    }
    return n;
}

Json feature_json(const FeatureClass& cls, int decoys) {
    Json j;
    j["size"] = cls.size();
    j["num_decoys"] = decoys;
    j["true_index"] = cls.true_index ? Json(*cls.true_index) : Json(nullptr);
    return j;
}

Json alpha_json(const LowRankMdp& env, const CoverSet& cover, CoverKind kind) {
    Json out = Json::array();
    for (int h = 1; h <= env.horizon(); ++h) {
        Json item;
        item["h"] = h;
        try {
            CoverReport rep = check_policy_cover(env, cover.covers[static_cast<std::size_t>(h - 1)], h, 0.0, 0.0, kind);
            item["measured"] = finite_or_null(rep.measured_alpha);
            item["qualifying"] = rep.qualifying;
        } catch (const Error&) {
            item["measured"] = nullptr;
        }
        out.push_back(std::move(item));
    }
    return out;
}

Json covers_json(const CoverSet& cover) {
    Json out = Json::array();
    for (std::size_t i = 0; i < cover.covers.size(); ++i) {
        Json item;
        item["h"] = i + 1;
        item["policies"] = distribution_to_json(cover.covers[i]);
        out.push_back(std::move(item));
    }
    return out;
}

struct RunOptions {
    std::string env, config, out, csv;
    std::uint64_t seed = 0;
    bool schedule_only = false;
};

int run_vox_cmd(const RunOptions& o) {
    LowRankMdp env = load_env(o.env);
    Json cfg = load_config(o.config);
    const int decoys = take_decoys(cfg);
    Rng master(o.seed);
    Rng feature_rng = master.fork();
    Rng run_rng = master.fork();
    FeatureClass cls = make_feature_class(env, decoys, feature_rng);
    VoxSchedule sch = as_usage([&] {
        return vox_schedule_from_json(cfg, {env.rank(), env.num_actions(), env.horizon(), cls.size()});
    });
    Json res;
    res["algorithm"] = "vox";
    res["seed"] = o.seed;
    res["features"] = feature_json(cls, decoys);
    res["schedule"] = vox_schedule_to_json(sch);
    if (o.schedule_only) {
        emit(o.out, dump_json(res));
        return 0;
    }
    RunResult r = run_vox(env, cls, sch, run_rng);
    res["episode_count"] = r.episodes;
    res["covers"] = covers_json(r.cover);
    Json certs = Json::array(), stages = Json::array();
    for (const auto& st : r.cover.stages) {
        certs.push_back(st.certificate);
        stages.push_back(stage_to_json(st));
    }
    res["certificates"] = std::move(certs);
    res["stages"] = std::move(stages);
    res["alpha"] = alpha_json(env, r.cover, CoverKind::randomized);
    emit(o.out, dump_json(res));
    if (!o.csv.empty()) write_text_file(o.csv, fw_csv(r.fw));
    return 0;
}

int run_spanrl_cmd(const RunOptions& o) {
    LowRankMdp env = load_env(o.env);
    Json cfg = load_config(o.config);
    const int decoys = take_decoys(cfg);
    Rng master(o.seed);
    Rng feature_rng = master.fork();
    Rng run_rng = master.fork();
    FeatureClass cls = make_feature_class(env, decoys, feature_rng);
    SpanRlSchedule sch = as_usage([&] {
        return spanrl_schedule_from_json(cfg, {env.rank(), env.num_actions(), env.horizon(), cls.size()});
    });
    Json res;
    res["algorithm"] = "spanrl";
    res["seed"] = o.seed;
    res["features"] = feature_json(cls, decoys);
    res["schedule"] = spanrl_schedule_to_json(sch);
    if (o.schedule_only) {
        emit(o.out, dump_json(res));
        return 0;
    }
    RunResult r = run_spanrl(env, cls, sch, run_rng);
    res["episode_count"] = r.episodes;
    res["covers"] = covers_json(r.cover);
    Json psi = Json::array();
    for (std::size_t i = 0; i < r.cover.psi.size(); ++i) {
        Json item;
        item["h"] = i + 1;
        Json pols = Json::array();
        for (const auto& pi : r.cover.psi[i]) pols.push_back(policy_to_json(*pi));
        item["policies"] = std::move(pols);
        psi.push_back(std::move(item));
    }
    res["psi"] = std::move(psi);
    Json stages = Json::array();
    for (const auto& st : r.cover.stages) stages.push_back(stage_to_json(st));
    res["stages"] = std::move(stages);
    res["alpha"] = alpha_json(env, r.cover, CoverKind::set);
    emit(o.out, dump_json(res));
    return 0;
}

CoverSet load_covers(const Json& result, int H) {
    return as_usage([&] {
        if (!result.is_object() || !result.contains("covers")) throw Error("result file has no \"covers\"");
        CoverSet cs;
        for (const auto& item : result.at("covers")) cs.covers.push_back(distribution_from_json(item.at("policies")));
        if (static_cast<int>(cs.covers.size()) != H) throw Error("result covers do not match the environment horizon");
        return cs;
    });
}

int optimize_cmd(const RunOptions& o, const std::string& covers_path) {
    LowRankMdp env = load_env(o.env);
    Json cfg = load_config(o.config);
    const int decoys = take_decoys(cfg);
    std::vector<Vec> theta;
    std::uint64_t n = 20000;
    as_usage([&] {
        for (const auto& [k, v] : cfg.items())
            if (k != "theta" && k != "n") throw Error("optimize config: unknown field \"" + k + "\"");
        if (!cfg.contains("theta")) throw Error("optimize config: missing \"theta\"");
        for (const auto& row : cfg["theta"]) {
            auto vals = row.get<std::vector<double>>();
            theta.push_back(Eigen::Map<const Vec>(vals.data(), static_cast<Eigen::Index>(vals.size())));
        }
        if (cfg.contains("n")) n = cfg["n"].get<std::uint64_t>();
        return 0;
    });
    CoverSet covers = load_covers(as_usage([&] { return read_json_file(covers_path); }), env.horizon());
    Rng master(o.seed);
    Rng feature_rng = master.fork();
    Rng run_rng = master.fork();
    FeatureClass cls = make_feature_class(env, decoys, feature_rng);
    OptimizeResult r = as_usage([&] { return optimize_reward(env, cls, covers, theta, n, run_rng); });

    RewardTables tables;
    for (int t = 1; t < env.horizon(); ++t) {
        Mat rt(env.num_states(t), env.num_actions());
        for (int x = 0; x < rt.rows(); ++x)
            for (int a = 0; a < rt.cols(); ++a)
                rt(x, a) = env.phi().at(t, x, a).dot(theta[static_cast<std::size_t>(t - 1)]);
        tables.push_back(std::move(rt));
    }
    const double optimum = solve_dp(env, tables, env.horizon() - 1).value;
    Json res;
    res["seed"] = o.seed;
    res["features"] = feature_json(cls, decoys);
    res["n"] = n;
    res["episode_count"] = r.episodes;
    res["value"] = r.value;
    res["optimum"] = optimum;
    res["gap"] = optimum - r.value;
    res["policy"] = policy_to_json(r.policy);
    emit(o.out, dump_json(res));
    return 0;
}

struct VerifyOptions {
    std::string env, result, out, kind;
    std::optional<double> alpha;
    double eps = 0.0;
};

int verify_cmd(const VerifyOptions& o) {
    LowRankMdp env = load_env(o.env);
    Json result = as_usage([&] { return read_json_file(o.result); });
    CoverSet covers = load_covers(result, env.horizon());
    const std::string algo = result.value("algorithm", std::string("vox"));
    std::string kind_name = o.kind.empty() ? (algo == "spanrl" ? "set" : "randomized") : o.kind;
    CoverKind kind = kind_name == "set" ? CoverKind::set : CoverKind::randomized;
    const double alpha =
        o.alpha ? *o.alpha : (algo == "spanrl" ? 1.0 / (4.0 * env.num_actions() * env.rank()) : 0.01);

    Json rep;
    rep["algorithm"] = algo;
    rep["kind"] = kind_name;
    rep["alpha"] = alpha;
    rep["eps"] = o.eps;
    bool pass = true;
    Json layers = Json::array();
    for (int h = 1; h <= env.horizon(); ++h) {
        CoverReport cr = check_policy_cover(env, covers.covers[static_cast<std::size_t>(h - 1)], h, alpha, o.eps, kind);
        Json L;
        L["h"] = h;
        L["pass"] = cr.pass;
        L["measured_alpha"] = finite_or_null(cr.measured_alpha);
        L["qualifying"] = cr.qualifying;
        Json w = Json::array();
        for (const auto& wit : cr.witnesses) {
            Json item;
            item["state"] = wit.state;
            item["achieved"] = wit.achieved;
            item["best"] = wit.best;
            w.push_back(std::move(item));
        }
        L["witnesses"] = std::move(w);
        layers.push_back(std::move(L));
        pass = pass && cr.pass;
        std::cerr << "layer " << h << ": " << (cr.pass ? "pass" : "FAIL") << " measured alpha "
                  << (std::isfinite(cr.measured_alpha) ? std::to_string(cr.measured_alpha) : std::string("n/a"));
        if (!cr.witnesses.empty())
            std::cerr << " witness x=" << cr.witnesses.front().state << " (" << cr.witnesses.front().achieved << " < "
                      << alpha << " * " << cr.witnesses.front().best << ")";
        std::cerr << "\n";
    }
    rep["pass"] = pass;
    rep["layers"] = std::move(layers);
    emit(o.out, dump_json(rep));
    return pass ? 0 : 1;
}

struct GenerateOptions {
    std::string out;
    std::uint64_t seed = 0;
    int H = 4, A = 2, d = 2;
    std::vector<int> states;
    double boost_eta = 0.0;
    double concentration = 0.5;
    bool rotate = false;
    bool tabular = false;
};

int generate_cmd(const GenerateOptions& o) {
    std::vector<int> states = o.states.empty() ? std::vector<int>(static_cast<std::size_t>(o.H), 4) : o.states;
    LowRankMdp env = as_usage([&] {
        if (static_cast<int>(states.size()) != o.H) throw Error("--states needs H entries");
        if (o.tabular) {
            Rng rng(o.seed);
            return generate_tabular_mdp(o.H, o.A, states, rng, o.concentration);
        }
        EnvSpec spec;
        spec.H = o.H;
        spec.A = o.A;
        spec.d_latent = o.d;
        spec.states = states;
        spec.seed = o.seed;
        spec.boost_eta = o.boost_eta;
        spec.rotate = o.rotate;
        spec.concentration = o.concentration;
        check_env_spec(spec);
        return generate_low_rank_mdp(spec);
    });
    emit(o.out, dump_json(env_to_json(env)));
    return 0;
}

// Trivial cases with known answers.
int selftest_cmd() {
    int failures = 0;
    auto report = [&](const char* name, bool ok) {
        std::cout << (ok ? "ok    " : "FAIL  ") << name << "\n";
        if (!ok) ++failures;
    };
    auto guarded = [&](const char* name, const std::function<bool()>& f) {
        bool ok = false;
        try {
            ok = f();
        } catch (const std::exception& e) {
            std::cout << "      " << e.what() << "\n";
        }
        report(name, ok);
    };

    EnvSpec spec;
    spec.H = 3;
    spec.A = 2;
    spec.d_latent = 2;
    spec.states = {2, 3, 3};
    spec.seed = 1;
    const LowRankMdp env = generate_low_rank_mdp(spec);

    guarded("generated environment validates", [&] { return validate_mdp(env).violations.empty(); });
    guarded("environment JSON round trip", [&] {
        LowRankMdp back = env_from_json(Json::parse(env_to_json(env).dump()));
        return dump_json(env_to_json(back)) == dump_json(env_to_json(env));
    });
    guarded("H = 2 run needs no episodes", [&] {
        EnvSpec s2 = spec;
        s2.H = 2;
        s2.states = {2, 3};
        LowRankMdp e2 = generate_low_rank_mdp(s2);
        FeatureClass cls{{e2.phi()}, 0};
        Rng rng(0);
        return run_vox(e2, cls, VoxSchedule{}, rng).episodes == 0;
    });
    guarded("uniform over deterministic policies is a 1/N cover", [&] {
        PolicyDistribution P = uniform_over_deterministic(env, 2);
        return check_policy_cover(env, P, 3, 1.0 / static_cast<double>(P.support_size()), 0.0).pass;
    });
    guarded("vacuous cover check at eps = 1 with a zero threshold", [&] {
        PolicyDistribution P = PolicyDistribution::point_mass(Policy::uniform(env, 1, 2));
        CoverReport r = check_policy_cover(env, P, 3, 1.0, 1e9);
        return r.pass && r.qualifying == 0;
    });
    guarded("performance difference with pi = pi_star is zero", [&] {
        Rng rng(2);
        Policy pi = random_policy(env, 1, 3, rng);
        RewardTables r;
        for (int t = 1; t <= 3; ++t) r.push_back(Mat::Constant(env.num_states(t), 2, 0.5));
        return pdl_check(env, pi, pi, r, 3) == 0.0;
    });
    guarded("single-matrix design terminates at once", [&] {
        DesignOracles<int> o;
        o.dim = 2;
        o.lin_opt = [](const Mat&) { return 0; };
        o.lin_est = [](const Design<int>&) { return Mat(Mat::Identity(2, 2) * 0.5); };
        FwOptions opt;
        opt.gamma = 0.1;
        auto res = fw_optdesign(o, opt);
        return res.iterations == 1 && res.log.back().certificate <= 3.0 * 2;
    });
    guarded("spanner of the standard basis", [&] {
        SpannerOracles<int> o;
        o.dim = 3;
        o.lin_opt = [](const Vec& th) {
            int i = 0;
            th.cwiseAbs().maxCoeff(&i);
            return th(i) >= 0 ? i : -(i + 1);
        };
        o.lin_est = [](const int& z) {
            Vec v = Vec::Zero(3);
            if (z >= 0)
                v(z) = 1.0;
            else
                v(-z - 1) = -1.0;
            return v;
        };
        SpannerOptions opt;
        return robust_spanner(o, opt).indices.size() == 3;
    });
    guarded("paper schedule at eta = 0.1, d = 2, A = 2 has K = 6400", [&] {
        return VoxSchedule::paper(0.1, 2, 2, 4, 4).K == 6400;
    });
    std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << "\n";
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reward-free exploration in layered low-rank MDPs"};
    app.require_subcommand(1);

    GenerateOptions gen;
    auto* g = app.add_subcommand("generate-env", "Write a random environment as JSON");
    g->add_option("--seed", gen.seed, "Random seed");
    g->add_option("--H", gen.H, "Horizon")->check(CLI::Range(1, 1000));
    g->add_option("--A", gen.A, "Number of actions")->check(CLI::Range(1, 1000));
    g->add_option("--d", gen.d, "Latent dimension")->check(CLI::Range(1, 1000));
    g->add_option("--states", gen.states, "States per layer (H values)")->delimiter(',');
    g->add_option("--boost-eta", gen.boost_eta, "Reachability floor");
    g->add_option("--concentration", gen.concentration, "Dirichlet concentration");
    g->add_flag("--rotate", gen.rotate, "Random rotation of the factorization");
    g->add_flag("--tabular", gen.tabular, "Tabular MDP in low-rank form");
    g->add_option("--out", gen.out, "Output file (default stdout)");

    RunOptions vox, span, opt;
    auto add_run = [&](CLI::App* c, RunOptions& o) {
        c->add_option("--env", o.env, "Environment JSON")->required();
        c->add_option("--config", o.config, "Config JSON");
        c->add_option("--seed", o.seed, "Random seed");
        c->add_option("--out", o.out, "Result JSON (default stdout)");
    };
    auto* rv = app.add_subcommand("run-vox", "Run VoX and write the covers");
    add_run(rv, vox);
    rv->add_option("--csv", vox.csv, "Frank-Wolfe trace CSV");
    rv->add_flag("--schedule-only", vox.schedule_only, "Resolve the schedule without running");
    auto* rs = app.add_subcommand("run-spanrl", "Run SpanRL and write the covers");
    add_run(rs, span);
    rs->add_flag("--schedule-only", span.schedule_only, "Resolve the schedule without running");
    std::string covers_path;
    auto* ro = app.add_subcommand("optimize-reward", "Optimize a linear reward with PSDP over run covers");
    add_run(ro, opt);
    ro->add_option("--covers", covers_path, "Result JSON of run-vox or run-spanrl")->required();

    VerifyOptions ver;
    double alpha = 0.0;
    auto* vc = app.add_subcommand("verify-cover", "Check a run's covers against exact occupancies");
    vc->add_option("--env", ver.env, "Environment JSON")->required();
    vc->add_option("--result", ver.result, "Result JSON")->required();
    auto* alpha_opt = vc->add_option("--alpha", alpha, "Cover constant (default by algorithm)");
    vc->add_option("--eps", ver.eps, "Reachability threshold");
    vc->add_option("--kind", ver.kind, "randomized or set")->check(CLI::IsMember({"randomized", "set"}));
    vc->add_option("--out", ver.out, "Report JSON (default stdout)");

    auto* st = app.add_subcommand("selftest", "Run the trivial-case checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    if (*alpha_opt) ver.alpha = alpha;

    try {
        if (*g) return generate_cmd(gen);
        if (*rv) return run_vox_cmd(vox);
        if (*rs) return run_spanrl_cmd(span);
        if (*ro) return optimize_cmd(opt, covers_path);
        if (*vc) return verify_cmd(ver);
        if (*st) return selftest_cmd();
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
