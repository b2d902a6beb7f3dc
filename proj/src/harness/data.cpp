#include "fedsim/harness/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "fedsim/error.hpp"

namespace fedsim::harness {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    // splitmix64 finalizer over the combined input
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void SyntheticSpec::validate() const {
    if (n_samples < 2) throw ConfigError("synthetic data needs at least two samples");
    if (n_informative > n_features) throw ConfigError("n_informative exceeds n_features");
    if (n_informative + n_redundant > n_features) throw ConfigError("n_informative + n_redundant exceeds n_features");
    if (n_common >= n_features) throw ConfigError("n_common must leave training features");
    if (sigma_cf < 0.0 || !std::isfinite(sigma_cf)) throw ConfigError("sigma_cf must be non-negative");
    if (task != vfl::Task::regression) {
        if (classes < 2) throw ConfigError("classification needs at least two classes");
        if (task == vfl::Task::binary && classes != 2) throw ConfigError("binary task has exactly two classes");
        if (n_informative == 0) throw ConfigError("classification needs informative features");
        const std::size_t clusters = 2 * classes;
        if (n_informative < 63 && (std::size_t{1} << n_informative) < clusters) {
            throw ConfigError("2^n_informative must cover two clusters per class");
        }
        if (flip_y < 0.0 || flip_y > 1.0) throw ConfigError("flip_y must lie in [0, 1]");
    }
    if (noise < 0.0) throw ConfigError("noise must be non-negative");
}

namespace {

nn::Tensor uniform_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    nn::Tensor m({r, c});
    for (double& v : m.data()) v = u(rng);
    return m;
}

}  // namespace

GlobalDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t n = spec.n_samples, ni = spec.n_informative, nr = spec.n_redundant;
    GlobalDataset out;
    out.task = spec.task;
    out.classes = spec.task == vfl::Task::regression ? 1 : spec.classes;
    out.features = nn::Tensor({n, spec.n_features});
    out.labels = nn::Tensor({n, 1});
    nn::Tensor& x = out.features;

    if (spec.task == vfl::Task::regression) {
        for (double& v : x.data()) v = gauss(rng);
        std::vector<double> beta(ni), gamma(ni);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (auto& b : beta) b = u(rng);
        for (auto& g : gamma) g = u(rng);
        for (std::size_t r = 0; r < n; ++r) {
            double lin = 0.0, inner = 0.0;
            for (std::size_t j = 0; j < ni; ++j) {
                lin += beta[j] * x(r, j);
                inner += gamma[j] * x(r, j);
            }
            out.labels(r, 0) = lin + std::tanh(inner) + spec.noise * gauss(rng);
        }
    } else {
        const std::size_t clusters = 2 * spec.classes;
        std::vector<std::vector<double>> centroids;
        std::set<std::vector<double>> seen;
        std::bernoulli_distribution coin(0.5);
        while (centroids.size() < clusters) {
            std::vector<double> v(ni);
            for (auto& e : v) e = coin(rng) ? spec.class_sep : -spec.class_sep;
            if (seen.insert(v).second) centroids.push_back(std::move(v));
        }
        std::vector<nn::Tensor> mixing;
        for (std::size_t c = 0; c < clusters; ++c) mixing.push_back(uniform_matrix(ni, ni, rng));
        std::vector<double> z(ni);
        for (std::size_t r = 0; r < n; ++r) {
            const std::size_t c = r % clusters;
            for (auto& e : z) e = gauss(rng);
            for (std::size_t j = 0; j < ni; ++j) {
                double v = centroids[c][j];
                for (std::size_t q = 0; q < ni; ++q) v += z[q] * mixing[c](q, j);
                x(r, j) = v;
            }
            out.labels(r, 0) = static_cast<double>(c % spec.classes);
        }
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> any_class(0, spec.classes - 1);
        for (std::size_t r = 0; r < n; ++r)
            if (u01(rng) < spec.flip_y) out.labels(r, 0) = static_cast<double>(any_class(rng));
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = ni + nr; j < spec.n_features; ++j) x(r, j) = gauss(rng);
    }
    if (nr > 0) {
        const nn::Tensor b = uniform_matrix(ni, nr, rng);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < nr; ++j) {
                double v = 0.0;
                for (std::size_t q = 0; q < ni; ++q) v += x(r, q) * b(q, j);
                x(r, ni + j) = v;
            }
    }
    // Shuffle rows so cluster membership is not tied to position.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    GlobalDataset shuffled = out;
    for (std::size_t r = 0; r < n; ++r) {
        std::copy(out.features.row(perm[r]).begin(), out.features.row(perm[r]).end(), shuffled.features.row(r).begin());
        shuffled.labels(r, 0) = out.labels(perm[r], 0);
    }
    return shuffled;
}

VerticalData vertical_split(const GlobalDataset& data, std::size_t n_common, double sigma_cf, bool noise_both,
                            std::uint64_t seed) {
    const std::size_t n = data.features.rows(), f = data.features.cols();
    if (n_common == 0) throw ConfigError("vertical split needs at least one common feature to link on");
    if (n_common + 2 > f) throw ConfigError("vertical split needs at least one training feature per party");
    if (sigma_cf < 0.0 || !std::isfinite(sigma_cf)) throw ConfigError("sigma_cf must be non-negative");
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> cols(f);
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    std::shuffle(cols.begin(), cols.end(), rng);

    VerticalData v;
    v.common_columns.assign(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(n_common));
    const std::size_t rest = f - n_common;
    const std::size_t l_a = rest / 2;
    v.a_columns.assign(cols.begin() + static_cast<std::ptrdiff_t>(n_common),
                       cols.begin() + static_cast<std::ptrdiff_t>(n_common + l_a));
    v.b_columns.assign(cols.begin() + static_cast<std::ptrdiff_t>(n_common + l_a), cols.end());
    std::sort(v.common_columns.begin(), v.common_columns.end());
    std::sort(v.a_columns.begin(), v.a_columns.end());
    std::sort(v.b_columns.begin(), v.b_columns.end());

    std::vector<std::size_t> b_order(n);  // party-B row j holds global row b_order[j]
    std::iota(b_order.begin(), b_order.end(), std::size_t{0});
    std::shuffle(b_order.begin(), b_order.end(), rng);
    v.a_to_b.assign(n, 0);
    for (std::size_t j = 0; j < n; ++j) v.a_to_b[b_order[j]] = j;

    std::normal_distribution<double> noise(0.0, sigma_cf > 0.0 ? sigma_cf : 1.0);
    auto take = [&](const std::vector<std::size_t>& columns, std::size_t global_row, nn::Tensor& dst, std::size_t row,
                    bool perturb) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            double value = data.features(global_row, columns[c]);
            if (perturb && sigma_cf > 0.0) value += noise(rng);
            dst(row, c) = value;
        }
    };
    nn::Tensor fa({n, v.a_columns.size()}), ida({n, n_common}), fb({n, v.b_columns.size()}), idb({n, n_common});
    for (std::size_t i = 0; i < n; ++i) {
        take(v.a_columns, i, fa, i, false);
        take(v.common_columns, i, ida, i, noise_both);
    }
    for (std::size_t j = 0; j < n; ++j) {
        take(v.b_columns, b_order[j], fb, j, false);
        take(v.common_columns, b_order[j], idb, j, true);
    }
    v.a = PartyAView(std::move(fa), data.labels, IdentifierColumn::numeric(std::move(ida)));
    v.b = PartyBView(std::move(fb), IdentifierColumn::numeric(std::move(idb)));
    return v;
}

nn::Tensor combined_features(const VerticalData& v) {
    const nn::Tensor& fa = v.a.features();
    const nn::Tensor& fb = v.b.features();
    nn::Tensor out({fa.rows(), fa.cols() + fb.cols()});
    for (std::size_t i = 0; i < fa.rows(); ++i) {
        auto dst = out.row(i);
        std::copy(fa.row(i).begin(), fa.row(i).end(), dst.begin());
        std::copy(fb.row(v.a_to_b[i]).begin(), fb.row(v.a_to_b[i]).end(),
                  dst.begin() + static_cast<std::ptrdiff_t>(fa.cols()));
    }
    return out;
}

Splits split_train_val_test(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed) {
    for (double r : ratios)
        if (!(r > 0.0)) throw ConfigError("split ratios must be positive");
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[0]));
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1]));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
        throw ConfigError("split of " + std::to_string(n) + " rows leaves an empty part");
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    Splits s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                 idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
    return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::optional<double> parse_number(const std::string& s) {
    double v = 0.0;
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end || s.empty()) return std::nullopt;
    return v;
}

struct RawParty {
    nn::Tensor features;
    std::optional<nn::Tensor> labels;
    IdentifierColumn ids;
};

RawParty read_party(const std::filesystem::path& path, bool want_label) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw InputError(path.string() + " is empty");
    const auto header = split_csv_line(line);
    std::vector<std::size_t> feat_cols, id_cols;
    std::optional<std::size_t> label_col;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "label") {
            label_col = c;
        } else if (header[c].rfind("id:", 0) == 0) {
            id_cols.push_back(c);
        } else {
            feat_cols.push_back(c);
        }
    }
    if (id_cols.empty()) throw InputError(path.string() + " has no id: columns");
    if (want_label && !label_col) throw InputError(path.string() + " has no label column");
    if (!want_label && label_col) throw InputError(path.string() + ": party B must not hold labels");
    if (feat_cols.empty()) throw InputError(path.string() + " has no feature columns");

    std::vector<double> feats, labels;
    std::vector<std::vector<std::string>> id_cells;
    std::size_t rows = 0, line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " cells");
        }
        for (std::size_t c : feat_cols) {
            auto v = parse_number(cells[c]);
            if (!v) throw InputError(path.string() + ":" + std::to_string(line_no) + ": non-numeric feature '" + cells[c] + "'");
            feats.push_back(*v);
        }
        if (label_col) {
            auto v = parse_number(cells[*label_col]);
            if (!v) throw InputError(path.string() + ":" + std::to_string(line_no) + ": non-numeric label");
            labels.push_back(*v);
        }
        std::vector<std::string> ids;
        for (std::size_t c : id_cols) ids.push_back(cells[c]);
        id_cells.push_back(std::move(ids));
        ++rows;
    }
    if (rows == 0) throw InputError(path.string() + " has no records");

    bool numeric = true;
    for (const auto& r : id_cells)
        for (const auto& cell : r) numeric = numeric && parse_number(cell).has_value();
    RawParty p;
    p.features = nn::Tensor({rows, feat_cols.size()}, std::move(feats));
    if (label_col) p.labels = nn::Tensor({rows, 1}, std::move(labels));
    if (numeric) {
        nn::Tensor ids({rows, id_cols.size()});
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < id_cols.size(); ++c) ids(r, c) = *parse_number(id_cells[r][c]);
        p.ids = IdentifierColumn::numeric(std::move(ids));
    } else {
        if (id_cols.size() != 1) throw InputError(path.string() + ": string identifiers must be a single id: column");
        std::vector<std::string> ids;
        for (auto& r : id_cells) ids.push_back(std::move(r[0]));
        p.ids = IdentifierColumn::strings(std::move(ids));
    }
    return p;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

}  // namespace

PartyAView read_party_a_csv(const std::filesystem::path& path) {
    RawParty p = read_party(path, true);
    return PartyAView(std::move(p.features), std::move(*p.labels), std::move(p.ids));
}

PartyBView read_party_b_csv(const std::filesystem::path& path) {
    RawParty p = read_party(path, false);
    return PartyBView(std::move(p.features), std::move(p.ids));
}

void write_party_csv(const std::filesystem::path& path, const nn::Tensor& features, const nn::Tensor* labels,
                     const IdentifierColumn& ids) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    const bool numeric = ids.kind() == IdentifierKind::numeric;
    if (!numeric && ids.kind() != IdentifierKind::string) throw InputError("bloom identifiers are not written to CSV");
    const std::size_t id_width = numeric ? ids.numeric_values().cols() : 1;
    std::string header;
    for (std::size_t c = 0; c < features.cols(); ++c) header += (c ? ",f" : "f") + std::to_string(c);
    if (labels) header += ",label";
    for (std::size_t c = 0; c < id_width; ++c) header += ",id:" + std::to_string(c);
    out << header << '\n';
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (std::size_t r = 0; r < features.rows(); ++r) {
        std::string line;
        for (std::size_t c = 0; c < features.cols(); ++c) line += (c ? "," : "") + num(features(r, c));
        if (labels) line += "," + num((*labels)(r, 0));
        if (numeric) {
            for (std::size_t c = 0; c < id_width; ++c) line += "," + num(ids.numeric_values()(r, c));
        } else {
            line += "," + quote(ids.string_values()[r]);
        }
        out << line << '\n';
    }
}

}  // namespace fedsim::harness
