#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "novelplan/nn.hpp"

namespace novelplan {

// Network checkpoint layout:
//
//   novelplan-densenet
//   format_version 1
//   seed <u64>
//   layers <n>
//   layer <in> <out> <activation>      (n lines)
//   parameters <count>
//   end_header
//   <count little-endian float32: per layer, weights row-major then bias>
inline constexpr int checkpoint_format_version = 1;

void write_checkpoint(std::ostream& os, const nn::DenseNet& net);
nn::DenseNet read_checkpoint(std::istream& is, const std::string& origin = "<stream>");

void save_checkpoint(const nn::DenseNet& net, const std::filesystem::path& path);
nn::DenseNet load_checkpoint(const std::filesystem::path& path);

// key: value sidecar files shared by the model modules and the dataset manifest.
using KeyValues = std::map<std::string, std::string>;

void write_key_values(const std::filesystem::path& path, const KeyValues& kv, const std::string& comment = {});
KeyValues read_key_values(const std::filesystem::path& path);
const std::string& require_key(const KeyValues& kv, const std::string& key, const std::filesystem::path& origin);

// Raw little-endian float32 blobs.
void write_f32_blob(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32_blob(const std::filesystem::path& path, std::size_t expected_count);

std::string join_floats(std::span<const float> values);
std::vector<float> split_floats(const std::string& text);

}  // namespace novelplan
