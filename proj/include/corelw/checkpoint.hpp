#pragma once

#include <filesystem>

#include "corelw/encoders.hpp"

namespace corelw {

// Self-describing JSON container: encoder config, named tensors with shapes
// and row-major f64 data, plus the non-trainable batch-norm running
// statistics. Values round-trip exactly.
void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params);
EncoderParams load_checkpoint(const std::filesystem::path& path);

}  // namespace corelw
