// fedsim: command-line front end of the simulator.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <tuple>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fedsim/error.hpp"
#include "fedsim/harness/data.hpp"
#include "fedsim/harness/experiment.hpp"
#include "fedsim/harness/plot.hpp"
#include "fedsim/linkage.hpp"
#include "fedsim/privacy.hpp"

namespace fs = std::filesystem;
using namespace fedsim;

namespace {

struct Overrides {
    std::optional<std::string> algorithm;
    std::optional<std::size_t> k;
    std::vector<std::uint64_t> seeds;
    std::optional<double> sigma_cf;
    std::optional<std::string> tau;
    std::optional<double> sigma;
    std::optional<std::size_t> epochs;
    std::optional<std::string> out;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--algorithm", o.algorithm, "fedsim|solo|combine|exact|top1sim|avgsim|featuresim");
    cmd->add_option("--k", o.k, "neighbors per record");
    cmd->add_option("--seed", o.seeds, "run seed (repeatable)");
    cmd->add_option("--sigma-cf", o.sigma_cf, "identifier noise scale");
    cmd->add_option("--tau", o.tau, "privacy bound, or 'mid'");
    cmd->add_option("--sigma", o.sigma, "similarity noise scale");
    cmd->add_option("--epochs", o.epochs);
    cmd->add_option("--out", o.out, "output directory");
}

harness::ExperimentConfig load_config(const std::string& path, const Overrides& o) {
    auto c = harness::parse_experiment(harness::load_json(path));
    if (o.algorithm) c.algorithm = *o.algorithm;
    if (o.k) c.k = *o.k;
    if (!o.seeds.empty()) c.seeds = o.seeds;
    if (o.sigma_cf) c.dataset.synthetic.sigma_cf = *o.sigma_cf;
    if (o.tau || o.sigma) c.privacy = {};
    if (o.tau) {
        if (*o.tau == "mid") {
            c.privacy.tau_mid = true;
        } else {
            c.privacy.tau = std::stod(*o.tau);
        }
    }
    if (o.sigma) c.privacy.sigma = *o.sigma;
    if (o.epochs) c.fit.epochs = *o.epochs;
    if (o.out) c.output_dir = *o.out;
    return c;
}

void print_summary(const std::vector<harness::MetricsReport>& reports) {
    for (const auto& r : reports) {
        std::cout << r.algorithm << " K=" << r.k << " sigma_cf=" << harness::format_double(r.sigma_cf);
        if (r.tau) std::cout << " tau=" << harness::format_double(*r.tau) << " sigma=" << harness::format_double(r.sigma);
        for (const auto& a : r.aggregate()) {
            std::printf(" %s=%.4f+-%.4f", a.metric.c_str(), a.mean, a.std);
            std::fflush(stdout);
        }
        std::cout << "\n";
    }
}

int cmd_gen_data(const std::string& config, const Overrides& o) {
    auto c = load_config(config, o);
    const fs::path dir = harness::resolve_output_dir(c.output_dir, "data");
    fs::create_directories(dir);
    const auto& spec = c.dataset.synthetic;
    auto global = harness::generate_synthetic(spec);
    auto v = harness::vertical_split(global, spec.n_common, spec.sigma_cf, c.dataset.noise_both,
                                     harness::stream_seed(spec.seed, 101));
    harness::write_party_csv(dir / "party_a.csv", v.a.features(), &v.a.labels(), v.a.identifiers());
    harness::write_party_csv(dir / "party_b.csv", v.b.features(), nullptr, v.b.identifiers());
    std::ofstream truth(dir / "truth.csv");
    truth << "a_idx,b_idx\n";
    for (std::size_t i = 0; i < v.a_to_b.size(); ++i) truth << i << "," << v.a_to_b[i] << "\n";
    nlohmann::ordered_json cols;
    cols["common"] = v.common_columns;
    cols["party_a"] = v.a_columns;
    cols["party_b"] = v.b_columns;
    std::ofstream(dir / "columns.json") << cols.dump(2) << "\n";
    std::cout << "wrote " << (dir / "party_a.csv").string() << ", " << (dir / "party_b.csv").string() << "\n";
    return 0;
}

int cmd_link(const std::string& config, const Overrides& o) {
    auto c = load_config(config, o);
    const auto table = harness::build_neighbor_table(c, c.seeds.front());
    const fs::path dir = harness::resolve_output_dir(c.output_dir, "link");
    fs::create_directories(dir);
    linkage::write_table(table, dir / "neighbors.csv");
    std::cout << "K=" << table.k << " mu0=" << harness::format_double(table.mu0)
              << " sigma0=" << harness::format_double(table.sigma0)
              << " sigma=" << harness::format_double(table.sigma) << "\n";
    return 0;
}

int cmd_calibrate(double sigma0, std::optional<double> tau, std::optional<double> sigma, bool grid) {
    std::cout << "sigma0,sigma,tau\n";
    if (grid) {
        for (double s = 1e-3; s <= 1e3 * 1.0000001; s *= std::pow(10.0, 0.25)) {
            std::cout << harness::format_double(sigma0) << "," << harness::format_double(s) << ","
                      << harness::format_double(privacy::tau_from_sigma(s, sigma0)) << "\n";
        }
        return 0;
    }
    const auto b = tau ? privacy::PrivacyBudget::from_tau(*tau, sigma0) : privacy::PrivacyBudget::from_sigma(*sigma, sigma0);
    std::cout << harness::format_double(sigma0) << "," << harness::format_double(b.sigma) << ","
              << harness::format_double(b.tau) << "\n";
    return 0;
}

int cmd_attack_audit(privacy::AttackAuditConfig cfg, std::optional<double> tau, const std::string& generator,
                     const std::optional<std::string>& out_path) {
    if (generator == "uniform_filters") {
        cfg.generator = privacy::DistanceGenerator::uniform_filters;
    } else if (generator == "declared_scale") {
        cfg.generator = privacy::DistanceGenerator::declared_scale;
    } else {
        throw ConfigError("unknown generator '" + generator + "'");
    }
    if (tau) cfg.sigma = privacy::sigma_from_tau(*tau, cfg.sigma0());
    const auto r = privacy::empirical_attack_success(cfg);
    std::ostringstream csv;
    csv << "width,known,trials,generator,mu0,sigma0,sigma,tau,successes,rate,ci99_low,ci99_high,se_at_tau,"
           "distances_correct_rate\n";
    csv << cfg.width << "," << cfg.known << "," << cfg.trials << "," << generator << ","
        << harness::format_double(r.mu0) << "," << harness::format_double(r.sigma0) << ","
        << harness::format_double(cfg.sigma) << "," << harness::format_double(r.tau) << ","
        << r.filter_recovered.successes << "," << harness::format_double(r.filter_recovered.rate) << ","
        << harness::format_double(r.filter_recovered.ci_low) << "," << harness::format_double(r.filter_recovered.ci_high)
        << "," << harness::format_double(privacy::SuccessEstimate::standard_error(r.tau, cfg.trials)) << ","
        << harness::format_double(r.all_distances_correct.rate) << "\n";
    std::cout << csv.str();
    if (out_path) {
        std::ofstream f(*out_path);
        if (!f) throw InputError("cannot write " + *out_path);
        f << csv.str();
    }
    return 0;
}

void write_outputs(const fs::path& dir, const std::vector<harness::MetricsReport>& reports, bool plots) {
    fs::create_directories(dir);
    harness::write_report_csv(dir / "report.csv", reports);
    harness::write_report_json(dir / "report.json", reports);
    if (plots) {
        for (const auto& p : harness::write_sweep_plots(dir / "plots", harness::read_report_csv(dir / "report.csv")))
            std::cout << "plot " << p.string() << "\n";
    }
    std::cout << "report " << (dir / "report.csv").string() << "\n";
}

int cmd_train(const std::string& config, const Overrides& o) {
    auto c = load_config(config, o);
    const fs::path dir = harness::resolve_output_dir(c.output_dir, "train");
    c.output_dir = dir;
    std::vector<harness::MetricsReport> reports{harness::run_experiment(c)};
    print_summary(reports);
    write_outputs(dir, reports, false);
    return 0;
}

int cmd_sweep(const std::string& config, const Overrides& o, std::optional<std::size_t> workers) {
    const auto j = harness::load_json(config);
    auto c = load_config(config, o);
    auto sweep = harness::parse_sweep(j);
    if (workers) sweep.workers = *workers;
    const fs::path dir = harness::resolve_output_dir(c.output_dir, "sweep");
    c.output_dir = dir;
    const auto reports = harness::run_sweep(c, sweep);
    print_summary(reports);
    write_outputs(dir, reports, true);
    return 0;
}

int cmd_report(const std::string& input, const std::optional<std::string>& out) {
    const auto rows = harness::read_report_csv(input);
    const fs::path dir = out ? fs::path(*out) : fs::path(input).parent_path() / "plots";
    for (const auto& p : harness::write_sweep_plots(dir, rows)) std::cout << "plot " << p.string() << "\n";
    std::cout << "algorithm,K,sigma_cf,metric,mean,std,n\n";
    std::map<std::tuple<std::string, std::size_t, double, std::string>, std::vector<double>> groups;
    for (const auto& r : rows) groups[{r.algorithm, r.k, r.sigma_cf, r.metric}].push_back(r.value);
    for (const auto& [key, values] : groups) {
        double mean = 0.0, ss = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        for (double v : values) ss += (v - mean) * (v - mean);
        const double sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
        std::cout << std::get<0>(key) << "," << std::get<1>(key) << "," << harness::format_double(std::get<2>(key))
                  << "," << std::get<3>(key) << "," << harness::format_double(mean) << ","
                  << harness::format_double(sd) << "," << values.size() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Similarity-based vertical federated learning simulator"};
    app.require_subcommand(1);

    std::string config;
    Overrides gen_o, link_o, train_o, sweep_o;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset and write both parties' CSV files");
    gen->add_option("--config", config, "experiment JSON")->required();
    add_overrides(gen, gen_o);

    auto* link = app.add_subcommand("link", "build the perturbed neighbor table");
    link->add_option("--config", config, "experiment JSON")->required();
    add_overrides(link, link_o);

    double sigma0 = 0.0;
    std::optional<double> cal_tau, cal_sigma;
    bool grid = false;
    auto* cal = app.add_subcommand("calibrate", "convert between tau and sigma");
    cal->add_option("--sigma0", sigma0, "standard deviation of the negative distances")->required();
    auto* tau_opt = cal->add_option("--tau", cal_tau);
    auto* sigma_opt = cal->add_option("--sigma", cal_sigma);
    auto* grid_opt = cal->add_flag("--grid", grid, "tabulate tau over a sigma grid");
    tau_opt->excludes(sigma_opt)->excludes(grid_opt);
    sigma_opt->excludes(grid_opt);

    privacy::AttackAuditConfig audit;
    std::optional<double> audit_tau;
    std::string generator = "uniform_filters";
    std::optional<std::string> audit_out;
    auto* att = app.add_subcommand("attack-audit", "Monte-Carlo success rate of the MAP attack");
    att->add_option("--width", audit.width, "filter width N (<= 20)");
    att->add_option("--known", audit.known, "number of known filters |S|");
    att->add_option("--trials", audit.trials);
    auto* att_sigma = att->add_option("--sigma", audit.sigma);
    att->add_option("--tau", audit_tau)->excludes(att_sigma);
    att->add_option("--generator", generator, "uniform_filters|declared_scale");
    att->add_option("--sigma0", audit.declared_sigma0, "sigma0 for the declared_scale generator");
    att->add_option("--seed", audit.seed);
    att->add_option("--out", audit_out, "CSV file");

    auto* train = app.add_subcommand("train", "run one experiment over its seeds");
    train->add_option("--config", config, "experiment JSON")->required();
    add_overrides(train, train_o);

    std::optional<std::size_t> workers;
    auto* sweep = app.add_subcommand("sweep", "run the sweep block of a config and plot the results");
    sweep->add_option("--config", config, "experiment JSON")->required();
    sweep->add_option("--workers", workers);
    add_overrides(sweep, sweep_o);

    std::string report_in;
    std::optional<std::string> report_out;
    auto* rep = app.add_subcommand("report", "aggregate a report CSV and plot it");
    rep->add_option("--input", report_in, "report.csv")->required();
    rep->add_option("--out", report_out, "plot directory");

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

    try {
        if (*gen) return cmd_gen_data(config, gen_o);
        if (*link) return cmd_link(config, link_o);
        if (*cal) {
            if (!cal_tau && !cal_sigma && !grid) {
                std::cerr << "calibrate: give --tau, --sigma or --grid\n";
                return 2;
            }
            return cmd_calibrate(sigma0, cal_tau, cal_sigma, grid);
        }
        if (*att) return cmd_attack_audit(audit, audit_tau, generator, audit_out);
        if (*train) return cmd_train(config, train_o);
        if (*sweep) return cmd_sweep(config, sweep_o, workers);
        if (*rep) return cmd_report(report_in, report_out);
    } catch (const StageError& e) {
        std::cerr << "error in stage " << e.stage() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
