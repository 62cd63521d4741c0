// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "fbsd/core.hpp"

namespace fbsd {

// Ordered feature columns per layer (119 NAS, 183 RRC).
std::span<const std::string_view> field_schema(Layer layer);
std::optional<std::size_t> field_column(Layer layer, std::string_view name);

// Column holding the message kind.
std::string_view kind_field(Layer layer);

}  // namespace fbsd
