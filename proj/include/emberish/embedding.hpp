#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace emberish {

using EmbeddingVector = std::vector<double>;

/// A record id with its embedding, in dataset order.
using EmbeddedRecord = std::pair<std::string, EmbeddingVector>;

enum class Metric { l2, inner_product };

std::string_view to_string(Metric metric) noexcept;
Metric parse_metric(std::string_view text);

}  // namespace emberish
