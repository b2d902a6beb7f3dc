#include <cstddef>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedsim/error.hpp"
#include "fedsim/harness/experiment.hpp"
#include "fedsim/linkage.hpp"
#include "fedsim/pprl.hpp"
#include "fedsim/privacy.hpp"

namespace py = pybind11;
using namespace fedsim;

namespace {

nn::Tensor to_tensor(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw InputError("empty identifier matrix");
    nn::Tensor t({rows.size(), rows[0].size()});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw DimensionError("ragged identifier matrix at row " + std::to_string(i));
        for (std::size_t j = 0; j < rows[i].size(); ++j) t(i, j) = rows[i][j];
    }
    return t;
}

py::dict table_dict(const linkage::NeighborTable& t) {
    py::dict d;
    d["k"] = t.k;
    d["neighbors"] = t.neighbors;
    d["distances"] = t.distances;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "fedsim core bindings";

    static py::exception<Error> base(m, "FedSimError");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<InputError>(m, "InputError", base.ptr());
    py::register_exception<InfeasibleBudgetError>(m, "InfeasibleBudgetError", base.ptr());
    py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());
    py::register_exception<StageError>(m, "StageError", base.ptr());

    m.def("tau_from_sigma", &privacy::tau_from_sigma, py::arg("sigma"), py::arg("sigma0"));
    m.def("sigma_from_tau", &privacy::sigma_from_tau, py::arg("tau"), py::arg("sigma0"));
    m.def("tau_floor", &privacy::tau_floor, py::arg("sigma0"));
    m.def("expected_disclosures", &privacy::expected_disclosures, py::arg("tau"), py::arg("n_records"));

    m.def(
        "per_pair_distance_success",
        [](std::size_t trials, double sigma, double sigma0, std::uint64_t seed) {
            const auto e = privacy::per_pair_distance_success(trials, sigma, sigma0, seed);
            return py::make_tuple(e.rate, e.ci_low, e.ci_high);
        },
        py::arg("trials"), py::arg("sigma"), py::arg("sigma0"), py::arg("seed") = 0);

    m.def(
        "attack_success",
        [](std::size_t width, std::size_t known, double tau, double sigma0, std::size_t trials, std::uint64_t seed) {
            privacy::AttackAuditConfig c;
            c.width = width;
            c.known = known;
            c.trials = trials;
            c.seed = seed;
            c.generator = privacy::DistanceGenerator::declared_scale;
            c.declared_sigma0 = sigma0;
            c.sigma = privacy::sigma_from_tau(tau, sigma0);
            return privacy::empirical_attack_success(c).filter_recovered.rate;
        },
        py::arg("width"), py::arg("known"), py::arg("tau"), py::arg("sigma0"), py::arg("trials") = 10000,
        py::arg("seed") = 0);

    m.def(
        "encode_string",
        [](const std::string& s, std::size_t q, std::size_t width, std::size_t num_hashes, std::uint64_t seed) {
            return pprl::encode_string(s, {q, width, num_hashes, seed}).to_string();
        },
        py::arg("s"), py::arg("q") = 2, py::arg("width") = 64, py::arg("num_hashes") = 2, py::arg("seed") = 0);

    m.def(
        "hamming_distance",
        [](const std::string& a, const std::string& b) {
            return pprl::hamming_distance(pprl::BloomFilter::from_bits(a), pprl::BloomFilter::from_bits(b));
        },
        py::arg("a"), py::arg("b"));

    m.def("levenshtein_distance", &linkage::levenshtein_distance, py::arg("a"), py::arg("b"));

    m.def(
        "top_k_numeric",
        [](const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b, std::size_t k) {
            return table_dict(linkage::top_k_neighbors(IdentifierColumn::numeric(to_tensor(a)),
                                                       IdentifierColumn::numeric(to_tensor(b)),
                                                       linkage::Metric::euclidean, k));
        },
        py::arg("a"), py::arg("b"), py::arg("k"));

    m.def(
        "top_k_strings",
        [](const std::vector<std::string>& a, const std::vector<std::string>& b, std::size_t k) {
            return table_dict(linkage::top_k_neighbors(IdentifierColumn::strings(a), IdentifierColumn::strings(b),
                                                       linkage::Metric::levenshtein, k));
        },
        py::arg("a"), py::arg("b"), py::arg("k"));

    m.def(
        "run_experiment_json",
        [](const std::string& config) {
            auto c = harness::parse_experiment(nlohmann::json::parse(config));
            py::gil_scoped_release release;
            return harness::run_experiment(c).to_json().dump();
        },
        py::arg("config"));
}
