#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fedsim/nn/tensor.hpp"
#include "fedsim/pprl.hpp"

namespace fedsim {

enum class IdentifierKind { numeric, string, bloom };

std::string_view to_string(IdentifierKind kind);

/// Homogeneous column of linkage identifiers: numeric vectors (one tensor
/// row per record), strings, or bloom filters.
class IdentifierColumn {
public:
    IdentifierColumn() = default;

    static IdentifierColumn numeric(nn::Tensor rows);
    static IdentifierColumn strings(std::vector<std::string> values);
    static IdentifierColumn blooms(std::vector<pprl::BloomFilter> values);

    IdentifierKind kind() const noexcept;
    std::size_t size() const noexcept;

    const nn::Tensor& numeric_values() const;
    const std::vector<std::string>& string_values() const;
    const std::vector<pprl::BloomFilter>& bloom_values() const;

private:
    std::variant<nn::Tensor, std::vector<std::string>, std::vector<pprl::BloomFilter>> values_;
};

}  // namespace fedsim
