#pragma once

#include <cstddef>
#include <string_view>

#include "fedsim/error.hpp"
#include "fedsim/identifier.hpp"
#include "fedsim/nn/tensor.hpp"

namespace fedsim {

enum class Role { A, B };

constexpr std::string_view to_string(Role r) { return r == Role::A ? "A" : "B"; }

/// One data party's private holdings. The role is part of the type: only a
/// party-A view carries labels, and training code for one party is written
/// against that party's view type, so the other party's features are never
/// in reach.
template <Role R>
class PartyView {
public:
    PartyView() = default;

    PartyView(nn::Tensor features, IdentifierColumn identifiers)
        requires(R == Role::B)
        : features_(std::move(features)), identifiers_(std::move(identifiers)) {
        check();
    }

    PartyView(nn::Tensor features, nn::Tensor labels, IdentifierColumn identifiers)
        requires(R == Role::A)
        : features_(std::move(features)), labels_(std::move(labels)), identifiers_(std::move(identifiers)) {
        check();
        if (labels_.rows() != features_.rows()) throw DimensionError("party A labels do not match feature rows");
    }

    static constexpr Role role() noexcept { return R; }
    std::size_t rows() const noexcept { return features_.rows(); }
    std::size_t width() const noexcept { return features_.cols(); }

    const nn::Tensor& features() const noexcept { return features_; }
    const nn::Tensor& labels() const noexcept
        requires(R == Role::A)
    {
        return labels_;
    }
    /// Linkage input for the coordinator.
    const IdentifierColumn& identifiers() const noexcept { return identifiers_; }

private:
    void check() const {
        if (features_.rank() != 2) throw DimensionError("party features must be a matrix");
        if (identifiers_.size() != features_.rows()) {
            throw DimensionError("party identifiers do not match feature rows");
        }
    }

    nn::Tensor features_;
    nn::Tensor labels_;
    IdentifierColumn identifiers_;
};

using PartyAView = PartyView<Role::A>;
using PartyBView = PartyView<Role::B>;

}  // namespace fedsim
