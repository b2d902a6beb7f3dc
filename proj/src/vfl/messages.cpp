#include "fedsim/vfl/messages.hpp"

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fedsim/error.hpp"

namespace fedsim::vfl {

std::string_view to_string(Endpoint e) {
    switch (e) {
        case Endpoint::A: return "A";
        case Endpoint::B: return "B";
        case Endpoint::C: return "C";
    }
    return "?";
}

std::string_view to_string(PayloadKind k) {
    switch (k) {
        case PayloadKind::cut_activation: return "cut_activation";
        case PayloadKind::cut_gradient: return "cut_gradient";
        case PayloadKind::perturbed_similarity: return "perturbed_similarity";
    }
    return "?";
}

namespace {

template <typename P>
bool matches(Endpoint from, Endpoint to, PayloadKind kind) {
    return kind == P::kind && from == P::from && to == P::to;
}

Endpoint parse_endpoint(const std::string& s) {
    if (s == "A") return Endpoint::A;
    if (s == "B") return Endpoint::B;
    if (s == "C") return Endpoint::C;
    throw ProtocolError("unknown endpoint '" + s + "'");
}

PayloadKind parse_kind(const std::string& s) {
    if (s == "cut_activation") return PayloadKind::cut_activation;
    if (s == "cut_gradient") return PayloadKind::cut_gradient;
    if (s == "perturbed_similarity") return PayloadKind::perturbed_similarity;
    throw ProtocolError("payload kind '" + s + "' is not allowed across parties");
}

}  // namespace

void MessageLog::record(std::size_t batch, Endpoint from, Endpoint to, PayloadKind kind, std::vector<std::size_t> shape) {
    if (!matches<CutActivation>(from, to, kind) && !matches<CutGradient>(from, to, kind) &&
        !matches<PerturbedSimilarity>(from, to, kind)) {
        throw ProtocolError(std::string(to_string(kind)) + " may not travel " + std::string(to_string(from)) + " -> " +
                            std::string(to_string(to)));
    }
    records_.push_back({batch, from, to, kind, std::move(shape)});
}

std::set<PayloadKind> MessageLog::kinds() const {
    std::set<PayloadKind> out;
    for (const auto& r : records_) out.insert(r.kind);
    return out;
}

std::size_t MessageLog::count(PayloadKind kind) const {
    std::size_t n = 0;
    for (const auto& r : records_) n += r.kind == kind ? 1 : 0;
    return n;
}

void MessageLog::write_jsonl(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write message log " + path.string());
    for (const auto& r : records_) {
        nlohmann::ordered_json j;
        j["batch"] = r.batch;
        j["from"] = std::string(to_string(r.from));
        j["to"] = std::string(to_string(r.to));
        j["kind"] = std::string(to_string(r.kind));
        j["shape"] = r.shape;
        out << j.dump() << '\n';
    }
}

MessageLog MessageLog::read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read message log " + path.string());
    MessageLog log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        log.record(j.at("batch").get<std::size_t>(), parse_endpoint(j.at("from").get<std::string>()),
                   parse_endpoint(j.at("to").get<std::string>()), parse_kind(j.at("kind").get<std::string>()),
                   j.at("shape").get<std::vector<std::size_t>>());
    }
    return log;
}

}  // namespace fedsim::vfl
