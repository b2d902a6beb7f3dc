#include "fedsim/harness/experiment.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "fedsim/error.hpp"
#include "fedsim/privacy.hpp"
#include "fedsim/vfl/checkpoint.hpp"

namespace fedsim::harness {

using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw InputError("cannot format number");
    return std::string(buf, p);
}

std::string PrivacyConfig::label() const {
    if (tau_mid) return "tau=mid";
    if (tau) return "tau=" + format_double(*tau);
    if (sigma) return "sigma=" + format_double(*sigma);
    return "none";
}

void ExperimentConfig::validate() const {
    const auto algo = vfl::parse_algorithm(algorithm);
    if (k == 0) throw ConfigError("K must be at least 1");
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    if (std::abs(split[0] + split[1] + split[2] - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    if (fit.batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (fit.epochs == 0) throw ConfigError("epochs must be at least 1");
    if (fit.patience == 0) throw ConfigError("patience must be at least 1");
    fit.optimizer.validate();
    if (int(privacy.tau.has_value()) + int(privacy.sigma.has_value()) + int(privacy.tau_mid) > 1) {
        throw ConfigError("give at most one of privacy.tau and privacy.sigma");
    }
    if (privacy.sigma && !(*privacy.sigma > 0.0)) throw ConfigError("privacy.sigma must be positive");
    if (dataset.source != "synthetic" && dataset.source != "csv") {
        throw ConfigError("dataset.source must be 'synthetic' or 'csv'");
    }
    if (dataset.source == "csv" && algo == vfl::Algorithm::combine) {
        throw ConfigError("combine needs the synthetic global dataset");
    }
    if (dataset.source == "synthetic") dataset.synthetic.validate();
}

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

PrivacyConfig parse_privacy_value(const json& j, const char* axis) {
    PrivacyConfig p;
    if (j.is_null()) return p;
    if (std::string(axis) == "sigma") {
        p.sigma = j.get<double>();
    } else if (j.is_string()) {
        if (j.get<std::string>() != "mid") throw ConfigError("tau must be a number or \"mid\"");
        p.tau_mid = true;
    } else {
        p.tau = j.get<double>();
    }
    return p;
}

vfl::SortKey parse_sort_key(const std::string& s) {
    if (s == "none") return vfl::SortKey::none;
    if (s == "similarity") return vfl::SortKey::similarity;
    if (s == "weight") return vfl::SortKey::weight;
    throw ConfigError("unknown sort key '" + s + "'");
}

}  // namespace

ExperimentConfig parse_experiment(const json& j) {
    try {
        reject_unknown(j,
                       {"algorithm", "dataset", "linkage", "K", "privacy", "split", "optimizer", "batch_size", "epochs",
                        "patience", "seeds", "model", "mlp_hidden", "audit_trials", "output_dir", "save_checkpoints",
                        "log_messages", "sweep"},
                       "config");
        ExperimentConfig c;
        read_opt(j, "algorithm", c.algorithm);
        read_opt(j, "K", c.k);
        read_opt(j, "split", c.split);
        read_opt(j, "batch_size", c.fit.batch_size);
        read_opt(j, "epochs", c.fit.epochs);
        read_opt(j, "patience", c.fit.patience);
        read_opt(j, "seeds", c.seeds);
        read_opt(j, "mlp_hidden", c.mlp_hidden);
        read_opt(j, "audit_trials", c.audit_trials);
        read_opt(j, "save_checkpoints", c.save_checkpoints);
        read_opt(j, "log_messages", c.log_messages);
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();

        if (j.contains("dataset")) {
            const json& d = j.at("dataset");
            reject_unknown(d,
                           {"name", "source", "task", "n_samples", "n_features", "n_informative", "n_redundant",
                            "n_common", "classes", "class_sep", "flip_y", "noise", "sigma_cf", "seed", "noise_both",
                            "party_a", "party_b"},
                           "dataset");
            DatasetConfig& ds = c.dataset;
            SyntheticSpec& s = ds.synthetic;
            read_opt(d, "name", ds.name);
            read_opt(d, "source", ds.source);
            if (d.contains("task")) s.task = ds.task = vfl::parse_task(d.at("task").get<std::string>());
            read_opt(d, "n_samples", s.n_samples);
            read_opt(d, "n_features", s.n_features);
            read_opt(d, "n_informative", s.n_informative);
            read_opt(d, "n_redundant", s.n_redundant);
            read_opt(d, "n_common", s.n_common);
            read_opt(d, "classes", s.classes);
            ds.classes = s.classes;
            read_opt(d, "class_sep", s.class_sep);
            read_opt(d, "flip_y", s.flip_y);
            read_opt(d, "noise", s.noise);
            read_opt(d, "sigma_cf", s.sigma_cf);
            read_opt(d, "seed", s.seed);
            read_opt(d, "noise_both", ds.noise_both);
            if (d.contains("party_a")) ds.party_a = d.at("party_a").get<std::string>();
            if (d.contains("party_b")) ds.party_b = d.at("party_b").get<std::string>();
        }
        if (j.contains("linkage")) {
            const json& l = j.at("linkage");
            reject_unknown(l, {"metric", "bits_per_dim", "threshold", "range", "seed", "q", "string_width", "num_hashes"},
                           "linkage");
            if (l.contains("metric")) c.linkage.metric = linkage::parse_metric(l.at("metric").get<std::string>());
            read_opt(l, "bits_per_dim", c.linkage.bits_per_dim);
            read_opt(l, "threshold", c.linkage.bloom_threshold);
            if (l.contains("range")) {
                auto r = l.at("range").get<std::array<double, 2>>();
                c.linkage.bloom_lo = r[0];
                c.linkage.bloom_hi = r[1];
            }
            read_opt(l, "seed", c.linkage.bloom_seed);
            c.linkage.strings.seed = c.linkage.bloom_seed;
            read_opt(l, "q", c.linkage.strings.q);
            read_opt(l, "string_width", c.linkage.strings.width);
            read_opt(l, "num_hashes", c.linkage.strings.num_hashes);
        }
        if (j.contains("privacy")) {
            const json& p = j.at("privacy");
            reject_unknown(p, {"tau", "sigma"}, "privacy");
            if (p.contains("tau")) c.privacy = parse_privacy_value(p.at("tau"), "tau");
            if (p.contains("sigma")) {
                if (c.privacy.enabled()) throw ConfigError("give at most one of privacy.tau and privacy.sigma");
                c.privacy = parse_privacy_value(p.at("sigma"), "sigma");
            }
        }
        if (j.contains("optimizer")) {
            const json& o = j.at("optimizer");
            reject_unknown(o, {"kind", "lr", "weight_decay", "beta1", "beta2", "epsilon", "trust_min", "trust_max"},
                           "optimizer");
            nn::OptimizerConfig& oc = c.fit.optimizer;
            if (o.contains("kind")) oc.kind = nn::parse_optimizer_kind(o.at("kind").get<std::string>());
            read_opt(o, "lr", oc.learning_rate);
            read_opt(o, "weight_decay", oc.weight_decay);
            read_opt(o, "beta1", oc.beta1);
            read_opt(o, "beta2", oc.beta2);
            read_opt(o, "epsilon", oc.epsilon);
            read_opt(o, "trust_min", oc.trust_min);
            read_opt(o, "trust_max", oc.trust_max);
        }
        if (j.contains("model")) {
            const json& m = j.at("model");
            reject_unknown(m,
                           {"local_hidden", "cut_width", "embed_width", "agg_hidden", "l_m", "weight_gate",
                            "sim_hidden", "sort_key", "merge", "k_conv", "channels", "merge_hidden", "dropout"},
                           "model");
            vfl::ModelConfig& mc = c.model;
            read_opt(m, "local_hidden", mc.local_hidden);
            read_opt(m, "cut_width", mc.cut_width);
            read_opt(m, "embed_width", mc.embed_width);
            read_opt(m, "agg_hidden", mc.agg_hidden);
            read_opt(m, "l_m", mc.l_m);
            read_opt(m, "weight_gate", mc.weight_gate);
            read_opt(m, "sim_hidden", mc.sim_hidden);
            if (m.contains("sort_key")) mc.sort_key = parse_sort_key(m.at("sort_key").get<std::string>());
            if (m.contains("merge")) mc.merge = vfl::parse_merge_mode(m.at("merge").get<std::string>());
            read_opt(m, "k_conv", mc.k_conv);
            read_opt(m, "channels", mc.channels);
            read_opt(m, "merge_hidden", mc.merge_hidden);
            read_opt(m, "dropout", mc.dropout);
        }
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
}

SweepConfig parse_sweep(const json& j) {
    SweepConfig s;
    if (!j.contains("sweep")) return s;
    try {
        const json& w = j.at("sweep");
        reject_unknown(w, {"algorithms", "K", "sigma_cf", "tau", "sigma", "workers"}, "sweep");
        read_opt(w, "algorithms", s.algorithms);
        read_opt(w, "K", s.ks);
        read_opt(w, "sigma_cf", s.sigma_cfs);
        read_opt(w, "workers", s.workers);
        if (w.contains("tau"))
            for (const auto& v : w.at("tau")) s.privacies.push_back(parse_privacy_value(v, "tau"));
        if (w.contains("sigma"))
            for (const auto& v : w.at("sigma")) s.privacies.push_back(parse_privacy_value(v, "sigma"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed sweep: ") + e.what());
    }
    return s;
}

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& configured, const std::string& default_name) {
    if (!configured.empty()) return configured;
    if (const char* root = std::getenv("FEDSIM_OUTPUT_ROOT"); root && *root) {
        return std::filesystem::path(root) / default_name;
    }
    return std::filesystem::path("fedsim_out") / default_name;
}

std::vector<MetricsReport::Aggregate> MetricsReport::aggregate() const {
    std::vector<Aggregate> out;
    if (seeds.empty()) return out;
    for (std::size_t m = 0; m < seeds.front().test.size(); ++m) {
        Aggregate a;
        a.metric = seeds.front().test[m].first;
        for (const auto& s : seeds) a.mean += s.test.at(m).second;
        a.mean /= static_cast<double>(seeds.size());
        if (seeds.size() > 1) {
            double ss = 0.0;
            for (const auto& s : seeds) ss += (s.test.at(m).second - a.mean) * (s.test.at(m).second - a.mean);
            a.std = std::sqrt(ss / static_cast<double>(seeds.size() - 1));
        }
        out.push_back(a);
    }
    return out;
}

nlohmann::ordered_json MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["algorithm"] = algorithm;
    j["dataset"] = dataset;
    j["K"] = k;
    j["sigma_cf"] = sigma_cf;
    j["tau"] = tau ? nlohmann::ordered_json(*tau) : nlohmann::ordered_json(nullptr);
    j["sigma"] = sigma;
    j["mu0"] = mu0;
    j["sigma0"] = sigma0;
    auto& runs = j["seeds"] = nlohmann::ordered_json::array();
    for (const auto& s : seeds) {
        nlohmann::ordered_json r;
        r["seed"] = s.seed;
        for (const auto& [name, v] : s.test) r["test"][name] = v;
        for (const auto& [name, v] : s.linkage) r["linkage"][name] = v;
        r["train_loss"] = s.train_loss;
        r["val_score"] = s.val_score;
        r["best_epoch"] = s.best_epoch;
        if (s.audit) {
            r["attack_audit"] = {{"tau", s.audit->tau},
                                 {"sigma", s.audit->sigma},
                                 {"sigma0", s.audit->sigma0},
                                 {"expected_disclosures", s.audit->expected_disclosures},
                                 {"per_pair_success", s.audit->empirical_rate},
                                 {"ci99_low", s.audit->ci_low},
                                 {"ci99_high", s.audit->ci_high},
                                 {"trials", s.audit->trials}};
        }
        runs.push_back(std::move(r));
    }
    for (const auto& a : aggregate()) j["aggregate"][a.metric] = {{"mean", a.mean}, {"std", a.std}};
    return j;
}

namespace {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e.what());
    }
}

IdentifierColumn encode_identifiers(const IdentifierColumn& ids, const LinkageConfig& cfg) {
    if (ids.kind() == IdentifierKind::string) {
        std::vector<pprl::BloomFilter> out;
        for (const auto& s : ids.string_values()) out.push_back(pprl::encode_string(s, cfg.strings));
        return IdentifierColumn::blooms(std::move(out));
    }
    if (ids.kind() == IdentifierKind::bloom) return ids;
    const nn::Tensor& v = ids.numeric_values();
    std::vector<pprl::FederalNumericParams> dims;
    for (std::size_t c = 0; c < v.cols(); ++c) {
        dims.push_back(pprl::FederalNumericParams::random(cfg.bits_per_dim, cfg.bloom_lo, cfg.bloom_hi,
                                                          cfg.bloom_threshold, stream_seed(cfg.bloom_seed, c)));
    }
    std::vector<pprl::BloomFilter> out;
    out.reserve(v.rows());
    for (std::size_t r = 0; r < v.rows(); ++r) out.push_back(pprl::encode_numeric_vector(v.row(r), dims));
    return IdentifierColumn::blooms(std::move(out));
}

/// Everything derived from the config before the per-seed loop.
struct Prepared {
    vfl::Algorithm algorithm = vfl::Algorithm::fedsim;
    vfl::Task task = vfl::Task::binary;
    std::size_t classes = 2;
    std::optional<VerticalData> synthetic;
    PartyAView csv_a;
    PartyBView csv_b;
    std::optional<linkage::NeighborTable> table;
    std::vector<std::size_t> matched;
    bool similarities_degenerate = false;
    double sigma = 0.0;
    std::optional<double> tau;

    const PartyAView& a() const { return synthetic ? synthetic->a : csv_a; }
    const PartyBView& b() const { return synthetic ? synthetic->b : csv_b; }
};

Prepared prepare(const ExperimentConfig& cfg) {
    Prepared p;
    p.algorithm = vfl::parse_algorithm(cfg.algorithm);
    if (cfg.dataset.source == "synthetic") {
        const SyntheticSpec& spec = cfg.dataset.synthetic;
        auto global = stage("generate", [&] { return generate_synthetic(spec); });
        p.synthetic = stage("vertical_split", [&] {
            return vertical_split(global, spec.n_common, spec.sigma_cf, cfg.dataset.noise_both,
                                  stream_seed(spec.seed, 101));
        });
        p.task = global.task;
        p.classes = global.classes;
    } else {
        p.csv_a = stage("ingest", [&] { return read_party_a_csv(cfg.dataset.party_a); });
        p.csv_b = stage("ingest", [&] { return read_party_b_csv(cfg.dataset.party_b); });
        p.task = cfg.dataset.task;
        p.classes = cfg.dataset.classes;
    }
    if (!vfl::is_split(p.algorithm)) return p;

    if (p.algorithm == vfl::Algorithm::exact) {
        p.table = stage("link", [&] { return vfl::exact_table(p.a().identifiers(), p.b().identifiers(), p.matched); });
        return p;
    }
    const std::size_t k = vfl::config_for(p.algorithm, cfg.model, cfg.k).k;
    IdentifierColumn ida = p.a().identifiers(), idb = p.b().identifiers();
    if (cfg.linkage.metric == linkage::Metric::hamming) {
        stage("encode", [&] {
            ida = encode_identifiers(ida, cfg.linkage);
            idb = encode_identifiers(idb, cfg.linkage);
            return 0;
        });
    }
    p.table = stage("link", [&] { return linkage::top_k_neighbors(ida, idb, cfg.linkage.metric, k); });
    linkage::NeighborTable& t = *p.table;
    const bool uses_similarities = p.algorithm == vfl::Algorithm::fedsim || p.algorithm == vfl::Algorithm::featuresim;
    try {
        linkage::normalize_similarities(t);
    } catch (const DegenerateLinkageError& e) {
        // Gate-free split models never read similarities, so identical
        // distances (e.g. noiseless top-1 links) are harmless for them.
        if (uses_similarities || cfg.privacy.enabled()) throw StageError("normalize", e.what());
        t.similarities.assign(t.distances.size(), 0.0);
        t.mu0 = t.distances.empty() ? 0.0 : -t.distances.front();
        t.sigma0 = 0.0;
        p.similarities_degenerate = true;
    }
    stage("calibrate", [&] {
        if (cfg.privacy.tau_mid) {
            p.tau = std::sqrt(privacy::tau_floor(t.sigma0));
            p.sigma = privacy::sigma_from_tau(*p.tau, t.sigma0);
        } else if (cfg.privacy.tau) {
            p.tau = *cfg.privacy.tau;
            p.sigma = privacy::sigma_from_tau(*p.tau, t.sigma0);
        } else if (cfg.privacy.sigma) {
            p.sigma = *cfg.privacy.sigma;
            p.tau = privacy::tau_from_sigma(p.sigma, t.sigma0);
        }
        return 0;
    });
    return p;
}

metrics::Scores linkage_scores(const Prepared& p) {
    metrics::Scores out;
    if (!p.synthetic || !p.table || p.algorithm == vfl::Algorithm::exact) return out;
    const auto& truth = p.synthetic->a_to_b;
    const auto& t = *p.table;
    std::size_t top1 = 0, in_k = 0;
    for (std::size_t i = 0; i < t.a_rows; ++i) {
        top1 += t.neighbor(i, 0) == truth[i] ? 1 : 0;
        for (std::size_t r = 0; r < t.k; ++r)
            if (t.neighbor(i, r) == truth[i]) {
                ++in_k;
                break;
            }
    }
    const double n = static_cast<double>(t.a_rows);
    out.emplace_back("link_top1", static_cast<double>(top1) / n);
    out.emplace_back("link_recall_k", static_cast<double>(in_k) / n);
    return out;
}

std::string artifact_stem(const ExperimentConfig& cfg, std::uint64_t seed) {
    return cfg.algorithm + "_K" + std::to_string(cfg.k) + "_cf" + format_double(cfg.dataset.synthetic.sigma_cf) + "_" +
           cfg.privacy.label() + "_seed" + std::to_string(seed);
}

SeedResult run_seed(const ExperimentConfig& cfg, const Prepared& p, std::uint64_t seed) {
    SeedResult r;
    r.seed = seed;
    r.sigma = p.sigma;
    r.tau = p.tau;
    const PartyAView& a = p.a();

    Splits splits = stage("split", [&] { return split_train_val_test(a.rows(), cfg.split, stream_seed(seed, 2)); });
    if (p.algorithm == vfl::Algorithm::exact) {
        const std::set<std::size_t> keep(p.matched.begin(), p.matched.end());
        auto filter = [&](std::vector<std::size_t>& v) { std::erase_if(v, [&](std::size_t i) { return !keep.count(i); }); };
        filter(splits.train);
        filter(splits.val);
        filter(splits.test);
        if (splits.train.empty() || splits.val.empty() || splits.test.empty()) {
            throw StageError("split", "exact linkage leaves an empty train, validation or test set");
        }
    }

    std::optional<linkage::NeighborTable> table;
    vfl::MessageLog log;
    if (p.table) {
        table = *p.table;
        stage("perturb", [&] {
            if (!p.similarities_degenerate) {
                std::mt19937_64 rng(stream_seed(seed, 1));
                linkage::perturb_similarities(*table, p.sigma, rng);
            } else {
                table->perturbed = table->similarities;
            }
            const auto view = linkage::party_a_view(*table);
            log.send(0, vfl::PerturbedSimilarity(nn::Tensor::column(view.values)));
            return 0;
        });
    }

    std::filesystem::path out_dir;
    if (cfg.save_checkpoints || cfg.log_messages) {
        out_dir = resolve_output_dir(cfg.output_dir, "run");
        std::filesystem::create_directories(out_dir);
    }

    std::unique_ptr<vfl::Learner> learner;
    stage("train", [&] {
        if (vfl::is_split(p.algorithm)) {
            vfl::ModelConfig mc = vfl::config_for(p.algorithm, cfg.model, table->k);
            mc.task = p.task;
            mc.classes = p.classes;
            learner = std::make_unique<vfl::SplitLearner>(a, p.b(), *table, mc, stream_seed(seed, 3), cfg.fit, &log);
        } else {
            nn::Tensor x = p.algorithm == vfl::Algorithm::solo ? a.features() : combined_features(*p.synthetic);
            learner = std::make_unique<vfl::MlpLearner>(std::move(x), a.labels(), p.task, p.classes, cfg.mlp_hidden,
                                                        stream_seed(seed, 3), cfg.fit);
        }
        std::mt19937_64 rng(stream_seed(seed, 4));
        auto h = vfl::fit(*learner, cfg.fit, p.task, a.labels(), splits.train, splits.val, rng);
        r.train_loss = std::move(h.train_loss);
        r.val_score = std::move(h.val_score);
        r.best_epoch = h.best_epoch;
        return 0;
    });
    stage("evaluate", [&] {
        r.test = metrics::task_metrics(p.task, learner->predict(splits.test), vfl::gather_rows(a.labels(), splits.test));
        r.linkage = linkage_scores(p);
        return 0;
    });
    stage("persist", [&] {
        if (cfg.save_checkpoints) vfl::write_checkpoint(out_dir / (artifact_stem(cfg, seed) + ".ckpt"), learner->params());
        if (cfg.log_messages) log.write_jsonl(out_dir / (artifact_stem(cfg, seed) + ".messages.jsonl"));
        return 0;
    });
    if (cfg.privacy.enabled() && p.table && p.sigma > 0.0 && cfg.audit_trials > 0) {
        stage("audit", [&] {
            const double sigma0 = p.table->sigma0;
            auto est = privacy::per_pair_distance_success(cfg.audit_trials, p.sigma, sigma0, stream_seed(seed, 5));
            AuditSummary s;
            s.tau = *p.tau;
            s.sigma = p.sigma;
            s.sigma0 = sigma0;
            s.expected_disclosures = privacy::expected_disclosures(*p.tau, a.rows());
            s.empirical_rate = est.rate;
            s.ci_low = est.ci_low;
            s.ci_high = est.ci_high;
            s.trials = est.trials;
            r.audit = s;
            return 0;
        });
    }
    return r;
}

}  // namespace

MetricsReport run_experiment(const ExperimentConfig& config) {
    stage("config", [&] {
        config.validate();
        return 0;
    });
    Prepared p = prepare(config);
    MetricsReport report;
    report.algorithm = config.algorithm;
    report.dataset = config.dataset.name;
    report.k = p.table ? p.table->k : config.k;
    report.sigma_cf = config.dataset.source == "synthetic" ? config.dataset.synthetic.sigma_cf : 0.0;
    report.tau = p.tau;
    report.sigma = p.sigma;
    if (p.table) {
        report.mu0 = p.table->mu0;
        report.sigma0 = p.table->sigma0;
    }
    for (std::uint64_t seed : config.seeds) report.seeds.push_back(run_seed(config, p, seed));
    return report;
}

linkage::NeighborTable build_neighbor_table(const ExperimentConfig& config, std::uint64_t seed) {
    stage("config", [&] {
        config.validate();
        return 0;
    });
    if (!vfl::is_split(vfl::parse_algorithm(config.algorithm))) {
        throw StageError("link", config.algorithm + " does not link records");
    }
    Prepared p = prepare(config);
    linkage::NeighborTable t = *p.table;
    if (!p.similarities_degenerate) {
        std::mt19937_64 rng(stream_seed(seed, 1));
        linkage::perturb_similarities(t, p.sigma, rng);
    } else {
        t.perturbed = t.similarities;
    }
    return t;
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& base, const SweepConfig& sweep) {
    const std::vector<std::string> algos = sweep.algorithms.empty() ? std::vector{base.algorithm} : sweep.algorithms;
    const std::vector<std::size_t> ks = sweep.ks.empty() ? std::vector{base.k} : sweep.ks;
    const std::vector<double> cfs =
        sweep.sigma_cfs.empty() ? std::vector{base.dataset.synthetic.sigma_cf} : sweep.sigma_cfs;
    const std::vector<PrivacyConfig> privs = sweep.privacies.empty() ? std::vector{base.privacy} : sweep.privacies;
    std::vector<ExperimentConfig> out;
    for (const auto& algo : algos)
        for (double cf : cfs)
            for (const auto& priv : privs)
                for (std::size_t k : ks) {
                    ExperimentConfig c = base;
                    c.algorithm = algo;
                    c.dataset.synthetic.sigma_cf = cf;
                    c.privacy = priv;
                    c.k = k;
                    out.push_back(std::move(c));
                }
    return out;
}

std::vector<MetricsReport> run_sweep(const ExperimentConfig& base, const SweepConfig& sweep) {
    const auto configs = expand_sweep(base, sweep);
    std::vector<MetricsReport> reports(configs.size());
    std::vector<std::exception_ptr> errors(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                reports[i] = run_experiment(configs[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_workers = std::max<std::size_t>(1, std::min(sweep.workers, configs.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return reports;
}

void write_report_csv(std::ostream& out, const std::vector<MetricsReport>& reports) {
    out << "algorithm,dataset,K,sigma_cf,tau,sigma,seed,metric_name,metric_value\n";
    for (const auto& rep : reports) {
        for (const auto& s : rep.seeds) {
            const std::string prefix = rep.algorithm + "," + rep.dataset + "," + std::to_string(rep.k) + "," +
                                       format_double(rep.sigma_cf) + "," + (s.tau ? format_double(*s.tau) : "") +
                                       "," + format_double(s.sigma) + "," + std::to_string(s.seed) + ",";
            for (const auto& [name, v] : s.test) out << prefix << name << "," << format_double(v) << "\n";
            for (const auto& [name, v] : s.linkage) out << prefix << name << "," << format_double(v) << "\n";
        }
    }
}

void write_report_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write report " + path.string());
    write_report_csv(out, reports);
}

void write_report_json(const std::filesystem::path& path, const std::vector<MetricsReport>& reports) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write report " + path.string());
    auto j = nlohmann::ordered_json::array();
    for (const auto& r : reports) j.push_back(r.to_json());
    out << j.dump(2) << '\n';
}

std::vector<ReportRow> read_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read report " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "algorithm,dataset,K,sigma_cf,tau,sigma,seed,metric_name,metric_value") {
        throw InputError(path.string() + " is not a report CSV");
    }
    std::vector<ReportRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (cells.size() != 9) throw InputError("malformed report row: " + line);
        try {
            ReportRow r;
            r.algorithm = cells[0];
            r.dataset = cells[1];
            r.k = std::stoul(cells[2]);
            r.sigma_cf = std::stod(cells[3]);
            if (!cells[4].empty()) r.tau = std::stod(cells[4]);
            r.sigma = std::stod(cells[5]);
            r.seed = std::stoull(cells[6]);
            r.metric = cells[7];
            r.value = std::stod(cells[8]);
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw InputError("malformed report row: " + line);
        }
    }
    return rows;
}

}  // namespace fedsim::harness
