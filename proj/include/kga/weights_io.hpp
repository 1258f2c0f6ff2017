#pragma once

#include <filesystem>

#include "kga/param_store.hpp"

namespace kga {

// "KGAW1" weight files: UTF-8 text, first line the magic, then per tensor a
// `name ndim d1 d2 ...` line followed by one line of space-separated decimal
// values. Values are written with 17 significant digits so a write/read
// round-trip is bit-exact. The final line is `frozen name1 name2 ...`.
void write_weights(const ParamStore& store, const std::filesystem::path& path);
ParamStore read_weights(const std::filesystem::path& path);

// 17-significant-digit decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace kga
