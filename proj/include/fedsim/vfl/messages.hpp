#pragma once

#include <concepts>
#include <cstddef>
#include <filesystem>
#include <set>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "fedsim/nn/tensor.hpp"

namespace fedsim::vfl {

enum class Endpoint { A, B, C };
enum class PayloadKind { cut_activation, cut_gradient, perturbed_similarity };

std::string_view to_string(Endpoint e);
std::string_view to_string(PayloadKind k);

// The only values allowed to cross a party boundary. Each payload type fixes
// its direction. Constructors are explicit so that nothing converts into a
// payload implicitly.

/// c_i: party B's cut-layer activations for one batch (B -> A).
struct CutActivation {
    static constexpr PayloadKind kind = PayloadKind::cut_activation;
    static constexpr Endpoint from = Endpoint::B;
    static constexpr Endpoint to = Endpoint::A;
    explicit CutActivation(nn::Tensor v) : value(std::move(v)) {}
    nn::Tensor value;
};

/// g^c: gradient of the loss w.r.t. the cut activations (A -> B).
struct CutGradient {
    static constexpr PayloadKind kind = PayloadKind::cut_gradient;
    static constexpr Endpoint from = Endpoint::A;
    static constexpr Endpoint to = Endpoint::B;
    explicit CutGradient(nn::Tensor v) : value(std::move(v)) {}
    nn::Tensor value;
};

/// s_i: perturbed similarities of a batch's candidate pairs (C -> A).
struct PerturbedSimilarity {
    static constexpr PayloadKind kind = PayloadKind::perturbed_similarity;
    static constexpr Endpoint from = Endpoint::C;
    static constexpr Endpoint to = Endpoint::A;
    explicit PerturbedSimilarity(nn::Tensor v) : value(std::move(v)) {}
    nn::Tensor value;
};

template <typename T>
concept CrossPartyPayload = std::same_as<T, CutActivation> || std::same_as<T, CutGradient> ||
                            std::same_as<T, PerturbedSimilarity>;

struct MessageRecord {
    std::size_t batch = 0;
    Endpoint from = Endpoint::A;
    Endpoint to = Endpoint::A;
    PayloadKind kind = PayloadKind::cut_activation;
    std::vector<std::size_t> shape;
};

/// Append-only record of every cross-party transfer in a run.
class MessageLog {
public:
    template <CrossPartyPayload P>
    const P& send(std::size_t batch, const P& payload) {
        records_.push_back({batch, P::from, P::to, P::kind, payload.value.shape()});
        return payload;
    }

    /// Untyped entry point used when replaying logs; rejects any
    /// (kind, direction) pair the protocol does not define.
    void record(std::size_t batch, Endpoint from, Endpoint to, PayloadKind kind, std::vector<std::size_t> shape);

    const std::vector<MessageRecord>& records() const noexcept { return records_; }
    std::set<PayloadKind> kinds() const;
    std::size_t count(PayloadKind kind) const;
    void clear() noexcept { records_.clear(); }

    /// One JSON object per line: {"batch", "from", "to", "kind", "shape"}.
    void write_jsonl(const std::filesystem::path& path) const;
    static MessageLog read_jsonl(const std::filesystem::path& path);

private:
    std::vector<MessageRecord> records_;
};

}  // namespace fedsim::vfl
