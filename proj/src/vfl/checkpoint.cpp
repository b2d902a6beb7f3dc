#include "fedsim/vfl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <string>

#include "fedsim/error.hpp"

namespace fedsim::vfl {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'I', 'M', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw CorruptionError("checkpoint is truncated");
    return v;
}

std::string get_string(std::istream& in) {
    const auto n = get<std::uint32_t>(in);
    if (n > (1u << 20)) throw CorruptionError("implausible name length in checkpoint");
    std::string s(n, '\0');
    if (!in.read(s.data(), n)) throw CorruptionError("checkpoint is truncated");
    return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<const nn::ParamSet*>& sets) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(sets.size()));
    for (const nn::ParamSet* set : sets) {
        put_string(out, set->name());
        put<std::uint32_t>(out, static_cast<std::uint32_t>(set->size()));
        for (const auto& [name, p] : *set) {
            put_string(out, name);
            put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
            for (std::size_t e : p.value.shape()) put<std::uint64_t>(out, e);
            for (double v : p.value.data()) put<double>(out, v);
        }
    }
    if (!out) throw InputError("failed writing checkpoint " + path.string());
}

std::vector<nn::ParamSet> read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read checkpoint " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw CorruptionError(path.string() + " is not a checkpoint");
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw CorruptionError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto n_sets = get<std::uint32_t>(in);
    std::vector<nn::ParamSet> sets;
    for (std::uint32_t s = 0; s < n_sets; ++s) {
        nn::ParamSet set(get_string(in));
        const auto n_params = get<std::uint32_t>(in);
        for (std::uint32_t i = 0; i < n_params; ++i) {
            std::string name = get_string(in);
            const auto rank = get<std::uint32_t>(in);
            if (rank > 8) throw CorruptionError("implausible rank for " + name);
            std::vector<std::size_t> shape(rank);
            std::size_t count = 1;
            for (auto& e : shape) {
                e = static_cast<std::size_t>(get<std::uint64_t>(in));
                if (e > (std::size_t{1} << 32)) throw CorruptionError("implausible extent for " + name);
                count *= e;
            }
            std::vector<double> values(count);
            for (double& v : values) v = get<double>(in);
            set.add(name, nn::Tensor(std::move(shape), std::move(values)));
        }
        sets.push_back(std::move(set));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw CorruptionError("trailing bytes after checkpoint payload");
    return sets;
}

void load_checkpoint(const std::filesystem::path& path, ModelBundle& model) {
    auto stored = read_checkpoint(path);
    auto targets = model.all_sets();
    if (stored.size() != targets.size()) throw CorruptionError("checkpoint holds a different number of parameter sets");
    for (std::size_t s = 0; s < stored.size(); ++s) {
        nn::ParamSet& dst = *targets[s];
        if (stored[s].name() != dst.name() || stored[s].size() != dst.size()) {
            throw CorruptionError("checkpoint set '" + stored[s].name() + "' does not match '" + dst.name() + "'");
        }
        for (auto& [name, p] : stored[s]) {
            if (!dst.contains(name)) throw CorruptionError("checkpoint parameter " + name + " is unknown to the model");
            nn::Param& q = dst.at(name);
            if (!q.value.same_shape(p.value)) throw CorruptionError("shape mismatch for " + name);
            q.value = p.value;
        }
    }
}

}  // namespace fedsim::vfl
