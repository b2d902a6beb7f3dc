// Acceptance checks: one PASS/FAIL line per criterion.
//
//   fedsim_acceptance [--only 1,3,...] [--expect-fail 6,...] [--config-dir DIR]
//
// The exit status is nonzero when a criterion outside --expect-fail fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsim/error.hpp"
#include "fedsim/harness/experiment.hpp"
#include "fedsim/linkage.hpp"
#include "fedsim/nn/gradcheck.hpp"
#include "fedsim/pprl.hpp"
#include "fedsim/privacy.hpp"
#include "fedsim/vfl/messages.hpp"
#include "fedsim/vfl/model.hpp"

using namespace fedsim;
namespace fs = std::filesystem;
using nn::Tensor;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

fs::path g_config_dir = FEDSIM_CONFIG_DIR;
fs::path g_scratch;

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Tensor t({r, c});
    for (double& v : t.data()) v = g(rng);
    return t;
}

// 1: per-pair erf factor over a sigma x sigma0 grid, plus the reference tau.
Outcome criterion1() {
    const std::size_t trials = 100000;
    std::size_t ok = 0, total = 0;
    std::ostringstream worst;
    double worst_z = 0.0;
    std::uint64_t seed = 100;
    for (double sigma : {0.1, 0.4, 1.0})
        for (double sigma0 : {2.0, 10.0, 100.0}) {
            const auto est = privacy::per_pair_distance_success(trials, sigma, sigma0, seed++);
            const double tau = privacy::tau_from_sigma(sigma, sigma0);
            const double se = privacy::SuccessEstimate::standard_error(tau, trials);
            const double z = se > 0.0 ? std::abs(est.rate - tau) / se : 0.0;
            ++total;
            if (std::abs(est.rate - tau) <= privacy::kZ99 * se) ++ok;
            if (z >= worst_z) {
                worst_z = z;
                worst.str("");
                worst << "sigma=" << sigma << " sigma0=" << sigma0 << " rate=" << est.rate << " erf=" << tau;
            }
        }
    const double tau_ref = privacy::tau_from_sigma(0.4, 21178.86);
    const double rel = std::abs(tau_ref - 5.1e-5) / 5.1e-5;
    std::ostringstream d;
    d << ok << "/" << total << " cells inside the 99% CI (worst " << worst.str() << ", |z|=" << fmt("%.2f", worst_z)
      << "); tau(0.4, 21178.86)=" << fmt("%.3e", tau_ref) << " rel err " << fmt("%.4f", rel);
    return {ok == total && rel <= 0.02, d.str()};
}

// 2: greedy attack on 12-bit filters stays under tau + 3 SE.
Outcome criterion2() {
    const std::size_t trials = 10000;
    const double sigma0 = 10.0;
    bool pass = true;
    std::ostringstream d;
    std::uint64_t seed = 1000;
    for (double tau : {0.05, 0.2})
        for (std::size_t known : {1, 3, 5}) {
            privacy::AttackAuditConfig c;
            c.trials = trials;
            c.width = 12;
            c.known = known;
            c.generator = privacy::DistanceGenerator::declared_scale;
            c.declared_sigma0 = sigma0;
            c.sigma = privacy::sigma_from_tau(tau, sigma0);
            c.seed = seed;
            seed += trials;
            const auto r = privacy::empirical_attack_success(c);
            const double bound = tau + 3.0 * privacy::SuccessEstimate::standard_error(tau, trials);
            pass = pass && r.filter_recovered.rate <= bound;
            d << "tau=" << tau << " |S|=" << known << ": " << fmt("%.4f", r.filter_recovered.rate) << " <= "
              << fmt("%.4f", bound) << "; ";
        }
    return {pass, d.str()};
}

// 3: finite differences through both parties and the cut layer.
Outcome criterion3() {
    bool pass = true;
    std::ostringstream d;
    for (auto merge : {vfl::MergeMode::cnn, vfl::MergeMode::average}) {
        vfl::ModelConfig c;
        c.task = vfl::Task::binary;
        c.l_a = 2;
        c.l_b = 2;
        c.k = 3;
        c.l_m = 2;
        c.local_hidden = 3;
        c.cut_width = 2;
        c.embed_width = 2;
        c.agg_hidden = 3;
        c.sim_hidden = 3;
        c.merge = merge;
        c.k_conv = 2;
        c.channels = 2;
        c.merge_hidden = 3;
        c.dropout = 0.0;
        const std::size_t m = 4;
        std::mt19937_64 rng(31);
        auto model = vfl::ModelBundle::create(c, 32);
        linkage::AlignedBatch batch;
        batch.k = c.k;
        batch.a.rows.resize(m);
        std::iota(batch.a.rows.begin(), batch.a.rows.end(), 0);
        batch.a.features = random_matrix(m, c.l_a, rng);
        batch.a.labels = Tensor({m, 1});
        for (std::size_t i = 0; i < m; ++i) batch.a.labels(i, 0) = static_cast<double>(i % 2);
        batch.a.similarities = random_matrix(m * c.k, 1, rng);
        batch.b.rows.resize(m * c.k);
        std::iota(batch.b.rows.begin(), batch.b.rows.end(), 0);
        batch.b.features = random_matrix(m * c.k, c.l_b, rng);
        nn::LossClosure closure = [&](bool grads) {
            vfl::PartyB b(model);
            vfl::PartyA a(model);
            const auto cut = b.forward(batch.b, false, nullptr);
            const double loss = a.forward(batch.a, cut, false, nullptr);
            if (grads) b.backward(a.backward());
            return loss;
        };
        const auto r = nn::grad_check(closure, model.all_sets());
        pass = pass && r.max_relative_error < 1e-3;
        d << vfl::to_string(merge) << " max rel err " << fmt("%.2e", r.max_relative_error) << " (" << r.worst_parameter
          << "); ";
    }
    return {pass, d.str()};
}

// 4: top-k against an exhaustive scan ordered by (distance, index).
Outcome criterion4() {
    std::mt19937_64 rng(44);
    std::uniform_int_distribution<std::size_t> size(1, 200);
    std::size_t mismatches = 0, instances = 0;
    const linkage::Metric metrics[] = {linkage::Metric::euclidean, linkage::Metric::levenshtein,
                                       linkage::Metric::hamming};
    for (int inst = 0; inst < 100; ++inst) {
        const auto metric = metrics[inst % 3];
        const std::size_t m = size(rng), n = size(rng);
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(n, 12))(rng);
        IdentifierColumn a, b;
        if (metric == linkage::Metric::euclidean) {
            Tensor pa = random_matrix(m, 2, rng), pb = random_matrix(n, 2, rng);
            // a coarse grid makes ties common
            if (inst % 2 == 0) {
                for (double& v : pa.data()) v = std::round(v * 3) / 3;
                for (double& v : pb.data()) v = std::round(v * 3) / 3;
            }
            a = IdentifierColumn::numeric(pa);
            b = IdentifierColumn::numeric(pb);
        } else if (metric == linkage::Metric::levenshtein) {
            auto word = [&] {
                std::string s(std::uniform_int_distribution<int>(1, 6)(rng), 'a');
                for (char& ch : s) ch = static_cast<char>('a' + rng() % 4);
                return s;
            };
            std::vector<std::string> sa(m), sb(n);
            for (auto& s : sa) s = word();
            for (auto& s : sb) s = word();
            a = IdentifierColumn::strings(sa);
            b = IdentifierColumn::strings(sb);
        } else {
            auto filter = [&] {
                pprl::BloomFilter f(24);
                for (std::size_t i = 0; i < 24; ++i)
                    if (rng() % 3 == 0) f.set(i);
                return f;
            };
            std::vector<pprl::BloomFilter> fa(m, pprl::BloomFilter(24)), fb(n, pprl::BloomFilter(24));
            for (auto& f : fa) f = filter();
            for (auto& f : fb) f = filter();
            a = IdentifierColumn::blooms(fa);
            b = IdentifierColumn::blooms(fb);
        }
        const auto table = linkage::top_k_neighbors(a, b, metric, k);
        ++instances;
        bool same = table.a_rows == m && table.k == k;
        for (std::size_t i = 0; same && i < m; ++i) {
            std::vector<std::pair<double, std::size_t>> scan(n);
            for (std::size_t j = 0; j < n; ++j) {
                double dist = 0.0;
                if (metric == linkage::Metric::euclidean) {
                    const auto& pa = a.numeric_values();
                    const auto& pb = b.numeric_values();
                    {
                        const double dx = pa(i, 0) - pb(j, 0), dy = pa(i, 1) - pb(j, 1);
                        dist = std::sqrt(dx * dx + dy * dy);
                    }
                } else if (metric == linkage::Metric::levenshtein) {
                    const auto& x = a.string_values()[i];
                    const auto& y = b.string_values()[j];
                    std::vector<std::size_t> row(y.size() + 1);
                    std::iota(row.begin(), row.end(), 0);
                    for (std::size_t p = 1; p <= x.size(); ++p) {
                        std::size_t diag = row[0];
                        row[0] = p;
                        for (std::size_t q = 1; q <= y.size(); ++q) {
                            const std::size_t up = row[q];
                            row[q] = std::min({row[q] + 1, row[q - 1] + 1, diag + (x[p - 1] == y[q - 1] ? 0 : 1)});
                            diag = up;
                        }
                    }
                    dist = static_cast<double>(row[y.size()]);
                } else {
                    const auto& x = a.bloom_values()[i];
                    const auto& y = b.bloom_values()[j];
                    std::size_t h = 0;
                    for (std::size_t bit = 0; bit < 24; ++bit) h += x.test(bit) != y.test(bit) ? 1 : 0;
                    dist = static_cast<double>(h);
                }
                scan[j] = {dist, j};
            }
            std::sort(scan.begin(), scan.end());
            for (std::size_t r = 0; r < k; ++r)
                if (table.neighbor(i, r) != scan[r].second || std::abs(table.distance(i, r) - scan[r].first) > 1e-12)
                    same = false;
        }
        if (!same) ++mismatches;
    }
    return {mismatches == 0,
            std::to_string(instances - mismatches) + "/" + std::to_string(instances) + " instances identical"};
}

struct Summary {
    double mean = 0.0;
    double std = 0.0;
};

Summary accuracy_of(const harness::MetricsReport& r) {
    for (const auto& a : r.aggregate())
        if (a.metric == "accuracy") return {a.mean, a.std};
    throw InputError("report has no accuracy");
}

std::vector<std::pair<harness::ExperimentConfig, harness::MetricsReport>> run_config(const std::string& file,
                                                                                     const std::string& tag) {
    const auto json = harness::load_json(g_config_dir / file);
    auto base = harness::parse_experiment(json);
    base.output_dir = g_scratch / tag;
    const auto sweep = harness::parse_sweep(json);
    const auto configs = harness::expand_sweep(base, sweep);
    const auto reports = harness::run_sweep(base, sweep);
    harness::write_report_csv(g_scratch / tag / "report.csv", reports);
    std::vector<std::pair<harness::ExperimentConfig, harness::MetricsReport>> out;
    for (std::size_t i = 0; i < reports.size(); ++i) out.emplace_back(configs[i], reports[i]);
    return out;
}

template <class Pred>
Summary find(const std::vector<std::pair<harness::ExperimentConfig, harness::MetricsReport>>& runs, Pred pred) {
    for (const auto& [c, r] : runs)
        if (pred(c)) return accuracy_of(r);
    throw InputError("sweep point missing");
}

std::string ms(Summary s) { return fmt("%.4f", s.mean) + "+-" + fmt("%.4f", s.std); }

// 5: noise trend on the synthetic task.
Outcome criterion5() {
    const auto runs = run_config("noise_sweep.json", "noise_sweep");
    auto at = [&](const std::string& algo, double scf) {
        return find(runs, [&](const harness::ExperimentConfig& c) {
            return c.algorithm == algo && c.dataset.synthetic.sigma_cf == scf;
        });
    };
    const auto combine0 = at("combine", 0.0), top0 = at("top1sim", 0.0);
    const auto fed = at("fedsim", 0.2), top = at("top1sim", 0.2);
    const bool a = std::abs(top0.mean - combine0.mean) <= 0.02;
    const bool b = fed.mean > top.mean && fed.mean - fed.std > top.mean + top.std;
    std::ostringstream d;
    d << "(a) sigma_cf=0 top1sim " << ms(top0) << " combine " << ms(combine0) << (a ? " ok" : " FAIL")
      << "; (b) sigma_cf=0.2 fedsim " << ms(fed) << " top1sim " << ms(top) << (b ? " ok" : " FAIL");
    return {a && b, d.str()};
}

// 6: K trend of FedSim and AvgSim.
Outcome criterion6() {
    const auto runs = run_config("k_sweep.json", "k_sweep");
    auto at = [&](const std::string& algo, std::size_t k) {
        return find(runs, [&](const harness::ExperimentConfig& c) { return c.algorithm == algo && c.k == k; });
    };
    const auto f1 = at("fedsim", 1), f10 = at("fedsim", 10), a1 = at("avgsim", 1), a10 = at("avgsim", 10);
    const bool fed_ok = f10.mean >= f1.mean;
    const bool avg_ok = a10.mean <= a1.mean + 0.01;
    std::ostringstream d;
    d << "fedsim K1 " << ms(f1) << " K10 " << ms(f10) << (fed_ok ? " ok" : " FAIL") << "; avgsim K1 " << ms(a1)
      << " K10 " << ms(a10) << (avg_ok ? " ok" : " FAIL");
    return {fed_ok && avg_ok, d.str()};
}

// 7: mid-range similarity noise against the noiseless run.
Outcome criterion7() {
    const auto runs = run_config("tau_sweep.json", "tau_sweep");
    const auto clean = find(runs, [](const harness::ExperimentConfig& c) { return !c.privacy.enabled(); });
    const auto noisy = find(runs, [](const harness::ExperimentConfig& c) { return c.privacy.tau_mid; });
    const bool pass = std::abs(noisy.mean - clean.mean) <= 0.02;
    return {pass, "noiseless " + ms(clean) + " tau=mid " + ms(noisy)};
}

// 8: payload kinds in a full run's message log, and rejection of any other flow.
static_assert(vfl::CrossPartyPayload<vfl::CutActivation>);
static_assert(vfl::CrossPartyPayload<vfl::CutGradient>);
static_assert(vfl::CrossPartyPayload<vfl::PerturbedSimilarity>);
static_assert(!vfl::CrossPartyPayload<Tensor>);
static_assert(!vfl::CrossPartyPayload<linkage::NeighborTable>);
static_assert(!std::is_convertible_v<Tensor, vfl::CutActivation>);

Outcome criterion8() {
    auto c = harness::parse_experiment(harness::load_json(g_config_dir / "quick.json"));
    c.log_messages = true;
    c.output_dir = g_scratch / "audit";
    fs::remove_all(c.output_dir);
    harness::run_experiment(c);
    std::set<vfl::PayloadKind> kinds;
    std::size_t logs = 0, records = 0;
    bool directions = true;
    for (const auto& e : fs::directory_iterator(c.output_dir)) {
        if (!e.path().filename().string().ends_with(".messages.jsonl")) continue;
        ++logs;
        const auto log = vfl::MessageLog::read_jsonl(e.path());
        for (const auto& r : log.records()) {
            ++records;
            kinds.insert(r.kind);
            using vfl::Endpoint;
            using vfl::PayloadKind;
            const bool ok = (r.kind == PayloadKind::cut_activation && r.from == Endpoint::B && r.to == Endpoint::A) ||
                            (r.kind == PayloadKind::cut_gradient && r.from == Endpoint::A && r.to == Endpoint::B) ||
                            (r.kind == PayloadKind::perturbed_similarity && r.from == Endpoint::C &&
                             r.to == Endpoint::A);
            directions = directions && ok;
        }
    }
    const std::set<vfl::PayloadKind> expected{vfl::PayloadKind::cut_activation, vfl::PayloadKind::cut_gradient,
                                              vfl::PayloadKind::perturbed_similarity};

    std::size_t rejected = 0, probes = 0;
    vfl::MessageLog probe;
    for (auto from : {vfl::Endpoint::A, vfl::Endpoint::B, vfl::Endpoint::C})
        for (auto to : {vfl::Endpoint::A, vfl::Endpoint::B, vfl::Endpoint::C})
            for (auto kind : {vfl::PayloadKind::cut_activation, vfl::PayloadKind::cut_gradient,
                              vfl::PayloadKind::perturbed_similarity}) {
                const bool legal =
                    (kind == vfl::PayloadKind::cut_activation && from == vfl::Endpoint::B && to == vfl::Endpoint::A) ||
                    (kind == vfl::PayloadKind::cut_gradient && from == vfl::Endpoint::A && to == vfl::Endpoint::B) ||
                    (kind == vfl::PayloadKind::perturbed_similarity && from == vfl::Endpoint::C &&
                     to == vfl::Endpoint::A);
                if (legal) continue;
                ++probes;
                try {
                    probe.record(0, from, to, kind, {1});
                } catch (const ProtocolError&) {
                    ++rejected;
                }
            }
    const bool pass = logs == c.seeds.size() && kinds == expected && directions && rejected == probes;
    std::ostringstream d;
    d << logs << " logs, " << records << " records, " << kinds.size() << " payload kinds, directions "
      << (directions ? "ok" : "BAD") << "; " << rejected << "/" << probes << " illegal flows rejected";
    return {pass, d.str()};
}

// 9: identical config and seeds give byte-identical report CSVs.
Outcome criterion9() {
    auto c = harness::parse_experiment(harness::load_json(g_config_dir / "quick.json"));
    c.algorithm = "fedsim";
    std::string csv[2];
    for (int run = 0; run < 2; ++run) {
        c.output_dir = g_scratch / ("determinism_" + std::to_string(run));
        fs::remove_all(c.output_dir);
        const auto r = harness::run_experiment(c);
        harness::write_report_csv(c.output_dir / "report.csv", {r});
        csv[run] = slurp(c.output_dir / "report.csv");
    }
    const bool pass = !csv[0].empty() && csv[0] == csv[1];
    return {pass, std::to_string(csv[0].size()) + " bytes, " + (csv[0] == csv[1] ? "identical" : "different")};
}

std::set<int> parse_list(const std::string& s) {
    std::set<int> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.insert(std::stoi(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedsim acceptance checks"};
    std::string only, expect_fail;
    std::string config_dir = g_config_dir.string();
    app.add_option("--only", only, "comma-separated criteria to run");
    app.add_option("--expect-fail", expect_fail, "criteria whose failure does not change the exit status");
    app.add_option("--config-dir", config_dir, "directory holding the experiment configs");
    CLI11_PARSE(app, argc, argv);
    g_config_dir = config_dir;
    g_scratch = harness::resolve_output_dir({}, "acceptance");

    const std::set<int> selected = parse_list(only), tolerated = parse_list(expect_fail);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"per-pair distance factor", criterion1},   {"attack success bound", criterion2},
        {"gradient check", criterion3},              {"top-k oracle", criterion4},
        {"noise trend", criterion5},                 {"K trend", criterion6},
        {"similarity noise regularization", criterion7}, {"information flow", criterion8},
        {"determinism", criterion9}};

    int unexpected = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << ") "
                  << o.detail << " [" << fmt("%.1f", secs) << "s]" << std::endl;
        if (!o.pass && !tolerated.count(id)) ++unexpected;
    }
    return unexpected == 0 ? 0 : 1;
}
