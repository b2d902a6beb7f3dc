#include "fedsim/identifier.hpp"

#include "fedsim/error.hpp"

namespace fedsim {

std::string_view to_string(IdentifierKind kind) {
    switch (kind) {
        case IdentifierKind::numeric: return "numeric";
        case IdentifierKind::string: return "string";
        case IdentifierKind::bloom: return "bloom";
    }
    return "?";
}

IdentifierColumn IdentifierColumn::numeric(nn::Tensor rows) {
    if (rows.rank() != 2) throw InputError("numeric identifiers must be a matrix (records x dims)");
    IdentifierColumn c;
    c.values_ = std::move(rows);
    return c;
}

IdentifierColumn IdentifierColumn::strings(std::vector<std::string> values) {
    IdentifierColumn c;
    c.values_ = std::move(values);
    return c;
}

IdentifierColumn IdentifierColumn::blooms(std::vector<pprl::BloomFilter> values) {
    for (const auto& f : values) {
        if (f.width() != values.front().width()) throw InputError("bloom identifiers must share one width");
    }
    IdentifierColumn c;
    c.values_ = std::move(values);
    return c;
}

IdentifierKind IdentifierColumn::kind() const noexcept { return static_cast<IdentifierKind>(values_.index()); }

std::size_t IdentifierColumn::size() const noexcept {
    return std::visit(
        [](const auto& v) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, nn::Tensor>) {
                return v.rows();
            } else {
                return v.size();
            }
        },
        values_);
}

const nn::Tensor& IdentifierColumn::numeric_values() const {
    if (kind() != IdentifierKind::numeric) throw InputError("identifier column is not numeric");
    return std::get<nn::Tensor>(values_);
}

const std::vector<std::string>& IdentifierColumn::string_values() const {
    if (kind() != IdentifierKind::string) throw InputError("identifier column does not hold strings");
    return std::get<std::vector<std::string>>(values_);
}

const std::vector<pprl::BloomFilter>& IdentifierColumn::bloom_values() const {
    if (kind() != IdentifierKind::bloom) throw InputError("identifier column does not hold bloom filters");
    return std::get<std::vector<pprl::BloomFilter>>(values_);
}

}  // namespace fedsim
