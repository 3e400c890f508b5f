#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "monoview/tensor.hpp"

namespace monoview::io {

/// Weight directory format: `manifest.txt` (format line, tensor count, then
/// one `name dtype n h w c byte_offset` line per tensor) plus `weights.bin`,
/// a single little-endian float32 blob. Tensor names must not contain
/// whitespace.
void save_tensors(const std::string& dir,
                  const std::vector<std::pair<std::string, const Tensorf*>>& tensors);

/// Load every tensor in a weight directory. Order follows the manifest.
std::vector<std::pair<std::string, Tensorf>> load_tensors(const std::string& dir);

std::map<std::string, Tensorf> load_tensor_map(const std::string& dir);

} // namespace monoview::io
