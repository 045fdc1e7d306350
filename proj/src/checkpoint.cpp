#include "novelplan/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "novelplan/error.hpp"

namespace novelplan {

namespace {

void put_f32(std::ostream& os, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
  os.write(bytes, 4);
}

float get_f32(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

std::string next_line(std::istream& is, const std::string& origin) {
  std::string line;
  if (!std::getline(is, line)) throw LoadError(origin + ": checkpoint header ended early");
  return line;
}

}  // namespace

void write_checkpoint(std::ostream& os, const nn::DenseNet& net) {
  os << "novelplan-densenet\n";
  os << "format_version " << checkpoint_format_version << "\n";
  os << "seed " << net.seed() << "\n";
  os << "layers " << net.layer_count() << "\n";
  for (const auto& l : net.layers()) os << "layer " << l.in << ' ' << l.out << ' ' << nn::to_string(l.activation) << "\n";
  os << "parameters " << net.parameter_count() << "\n";
  os << "end_header\n";
  for (const auto& l : net.layers()) {
    for (float w : l.weight) put_f32(os, w);
    for (float b : l.bias) put_f32(os, b);
  }
  if (!os) throw std::runtime_error("failed writing checkpoint");
}

nn::DenseNet read_checkpoint(std::istream& is, const std::string& origin) {
  if (next_line(is, origin) != "novelplan-densenet") throw LoadError(origin + ": not a densenet checkpoint");
  std::string key;
  int version = 0;
  {
    std::istringstream ls(next_line(is, origin));
    ls >> key >> version;
    if (key != "format_version") throw LoadError(origin + ": missing format_version");
    if (version != checkpoint_format_version) {
      throw LoadError(origin + ": unsupported checkpoint format version " + std::to_string(version) + " (expected " +
                      std::to_string(checkpoint_format_version) + ")");
    }
  }
  std::uint64_t seed = 0;
  {
    std::istringstream ls(next_line(is, origin));
    ls >> key >> seed;
    if (key != "seed" || !ls) throw LoadError(origin + ": missing seed");
  }
  std::size_t layer_count = 0;
  {
    std::istringstream ls(next_line(is, origin));
    ls >> key >> layer_count;
    if (key != "layers" || !ls || layer_count == 0) throw LoadError(origin + ": bad layer count");
  }
  std::vector<nn::Layer> layers(layer_count);
  std::size_t expected = 0;
  for (std::size_t i = 0; i < layer_count; ++i) {
    std::istringstream ls(next_line(is, origin));
    std::string act;
    ls >> key >> layers[i].in >> layers[i].out >> act;
    if (key != "layer" || !ls) throw LoadError(origin + ": malformed layer line " + std::to_string(i));
    try {
      layers[i].activation = nn::parse_activation(act);
    } catch (const InputError& e) {
      throw LoadError(origin + ": " + e.what());
    }
    if (i > 0 && layers[i - 1].out != layers[i].in) {
      throw LoadError(origin + ": layer " + std::to_string(i) + " input dim " + std::to_string(layers[i].in) +
                      " does not chain with previous output dim " + std::to_string(layers[i - 1].out));
    }
    expected += layers[i].in * layers[i].out + layers[i].out;
  }
  std::size_t declared = 0;
  {
    std::istringstream ls(next_line(is, origin));
    ls >> key >> declared;
    if (key != "parameters" || !ls) throw LoadError(origin + ": missing parameter count");
    if (declared != expected) {
      throw LoadError(origin + ": header declares " + std::to_string(declared) + " parameters, layer dims imply " +
                      std::to_string(expected));
    }
  }
  if (next_line(is, origin) != "end_header") throw LoadError(origin + ": missing end_header");

  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (blob.size() != expected * 4) {
    throw LoadError(origin + ": parameter blob has " + std::to_string(blob.size()) + " bytes, expected " +
                    std::to_string(expected * 4));
  }
  const unsigned char* p = blob.data();
  for (auto& l : layers) {
    l.weight.resize(l.in * l.out);
    l.bias.resize(l.out);
    for (auto& w : l.weight) {
      w = get_f32(p);
      p += 4;
    }
    for (auto& b : l.bias) {
      b = get_f32(p);
      p += 4;
    }
  }
  for (const auto& l : layers) {
    for (float w : l.weight) {
      if (!std::isfinite(w)) throw LoadError(origin + ": non-finite parameter");
    }
    for (float b : l.bias) {
      if (!std::isfinite(b)) throw LoadError(origin + ": non-finite parameter");
    }
  }
  return nn::DenseNet(std::move(layers), seed);
}

void save_checkpoint(const nn::DenseNet& net, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(os, net);
}

nn::DenseNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint " + path.string());
  return read_checkpoint(is, path.string());
}

void write_key_values(const std::filesystem::path& path, const KeyValues& kv, const std::string& comment) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (!comment.empty()) {
    std::istringstream cs(comment);
    std::string line;
    while (std::getline(cs, line)) os << "# " << line << "\n";
  }
  for (const auto& [k, v] : kv) os << k << ": " << v << "\n";
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open " + path.string());
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw LoadError(path.string() + ":" + std::to_string(lineno) + ": expected 'key: value'");
    }
    std::string value = line.substr(colon + 1);
    if (!value.empty() && value[0] == ' ') value.erase(0, 1);
    kv[line.substr(0, colon)] = value;
  }
  return kv;
}

const std::string& require_key(const KeyValues& kv, const std::string& key, const std::filesystem::path& origin) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw LoadError(origin.string() + ": missing key '" + key + "'");
  return it->second;
}

void write_f32_blob(const std::filesystem::path& path, std::span<const float> values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (float v : values) put_f32(os, v);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::vector<float> read_f32_blob(const std::filesystem::path& path, std::size_t expected_count) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open blob " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() != expected_count * 4) {
    throw LoadError(path.string() + ": blob has " + std::to_string(bytes.size()) + " bytes, expected " +
                    std::to_string(expected_count * 4));
  }
  std::vector<float> values(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) values[i] = get_f32(bytes.data() + 4 * i);
  return values;
}

std::string join_floats(std::span<const float> values) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(values[i]));
    if (i) out += ',';
    out += buf;
  }
  return out;
}

std::vector<float> split_floats(const std::string& text) {
  std::vector<float> out;
  std::size_t pos = 0;
  while (pos <= text.size() && !text.empty()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    char* end = nullptr;
    const float v = std::strtof(item.c_str(), &end);
    if (item.empty() || end == item.c_str()) throw LoadError("malformed number list near '" + item + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace novelplan
