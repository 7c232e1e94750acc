// Weight file: a textual header followed by a flat little-endian float64 payload.
//
//   TCT-WEIGHTS 1
//   <config key> <value>          (one per line)
//   tensor <name> <rows> <cols> <byte offset into payload>
//   end
//   <payload bytes>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "tct/encoder.hpp"
#include "tct/errors.hpp"

namespace tct {

namespace {

constexpr const char* kMagic = "TCT-WEIGHTS 1";

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<std::pair<std::string, std::string>> config_fields(const EncoderConfig& c) {
  return {
      {"channels", std::to_string(c.channels)},
      {"patch_size", std::to_string(c.patch_size)},
      {"hidden_dim", std::to_string(c.hidden_dim)},
      {"heads", std::to_string(c.heads)},
      {"layers", std::to_string(c.layers)},
      {"mlp_dim", std::to_string(c.mlp_dim)},
      {"norm", to_string(c.norm)},
      {"norm_eps", format_double(c.norm_eps)},
      {"use_position_embeddings", c.use_position_embeddings ? "1" : "0"},
      {"position_grid_rows", std::to_string(c.position_grid.rows)},
      {"position_grid_cols", std::to_string(c.position_grid.cols)},
      {"normalize_patches", c.normalize_patches ? "1" : "0"},
      {"profile", to_string(c.profile)},
      {"key_gain", format_double(c.key_gain)},
      {"residual_write_scale", format_double(c.residual_write_scale)},
  };
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw InputError("weights header: '" + key + "' expects an integer, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw InputError("weights header: '" + key + "' expects a number, got '" + v + "'");
}

bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "1") return true;
  if (v == "0") return false;
  throw InputError("weights header: '" + key + "' expects 0 or 1");
}

void apply_field(EncoderConfig& c, const std::string& key, const std::string& v) {
  if (key == "channels") c.channels = parse_int(key, v);
  else if (key == "patch_size") c.patch_size = parse_int(key, v);
  else if (key == "hidden_dim") c.hidden_dim = parse_int(key, v);
  else if (key == "heads") c.heads = parse_int(key, v);
  else if (key == "layers") c.layers = parse_int(key, v);
  else if (key == "mlp_dim") c.mlp_dim = parse_int(key, v);
  else if (key == "norm") c.norm = parse_norm_kind(v);
  else if (key == "norm_eps") c.norm_eps = parse_double(key, v);
  else if (key == "use_position_embeddings") c.use_position_embeddings = parse_flag(key, v);
  else if (key == "position_grid_rows") c.position_grid.rows = parse_int(key, v);
  else if (key == "position_grid_cols") c.position_grid.cols = parse_int(key, v);
  else if (key == "normalize_patches") c.normalize_patches = parse_flag(key, v);
  else if (key == "profile") c.profile = parse_weight_profile(v);
  else if (key == "key_gain") c.key_gain = parse_double(key, v);
  else if (key == "residual_write_scale") c.residual_write_scale = parse_double(key, v);
  else throw InputError("weights header: unknown key '" + key + "'");
}

std::uint64_t to_little(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(bits);
  return bits;
}

struct NamedTensor {
  std::string name;
  std::size_t rows, cols;
  std::span<const double> values;
};

std::vector<NamedTensor> collect(const EncoderWeights& w) {
  std::vector<NamedTensor> out;
  auto mat = [&](std::string name, const Matrix& m) { out.push_back({std::move(name), m.rows(), m.cols(), m.values()}); };
  auto vec = [&](std::string name, std::span<const double> v) { out.push_back({std::move(name), 1, v.size(), v}); };
  mat("patch_projection", w.patch_projection());
  vec("patch_bias", w.patch_bias());
  vec("class_token", w.class_token());
  if (w.position_embeddings()) mat("position_embeddings", *w.position_embeddings());
  for (int l = 0; l < w.layer_count(); ++l) {
    const auto& lw = w.layer(l);
    const std::string p = "layer." + std::to_string(l) + ".";
    mat(p + "qkv", lw.qkv);
    vec(p + "qkv_bias", lw.qkv_bias);
    mat(p + "output_projection", lw.output_projection);
    vec(p + "output_bias", lw.output_bias);
    vec(p + "norm1_gain", lw.norm1_gain);
    vec(p + "norm1_bias", lw.norm1_bias);
    vec(p + "norm2_gain", lw.norm2_gain);
    vec(p + "norm2_bias", lw.norm2_bias);
    mat(p + "mlp_in", lw.mlp_in);
    vec(p + "mlp_in_bias", lw.mlp_in_bias);
    mat(p + "mlp_out", lw.mlp_out);
    vec(p + "mlp_out_bias", lw.mlp_out_bias);
  }
  return out;
}

struct ParsedFile {
  WeightFileInfo info;
  std::vector<unsigned char> payload;
};

ParsedFile parse_file(const std::filesystem::path& path, bool want_payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open weight file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw InputError(path.string() + ": not a weight file (expected '" + kMagic + "' on line 1)");
  }
  ParsedFile parsed;
  auto& info = parsed.info;
  int lineno = 1;
  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    try {
      if (key == "tensor") {
        TensorEntry e;
        if (!(ls >> e.name >> e.rows >> e.cols >> e.offset)) throw InputError("malformed tensor line");
        info.tensors.push_back(std::move(e));
      } else {
        std::string value;
        if (!(ls >> value)) throw InputError("missing value for '" + key + "'");
        apply_field(info.config, key, value);
      }
      std::string extra;
      if (ls >> extra) throw InputError("trailing text '" + extra + "'");
    } catch (const InputError& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!ended) throw InputError(path.string() + ": header missing 'end' line");
  std::vector<unsigned char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  info.payload_bytes = payload.size();
  for (const auto& t : info.tensors) {
    const std::uint64_t bytes = static_cast<std::uint64_t>(t.rows) * t.cols * 8;
    if (t.offset % 8 != 0 || t.offset + bytes > info.payload_bytes) {
      throw InputError(path.string() + ": tensor '" + t.name + "' lies outside the payload");
    }
  }
  if (want_payload) parsed.payload = std::move(payload);
  return parsed;
}

}  // namespace

void save_weights(const EncoderWeights& weights, const std::filesystem::path& path) {
  std::ostringstream header;
  header << kMagic << "\n";
  for (const auto& [k, v] : config_fields(weights.config())) header << k << " " << v << "\n";
  const auto tensors = collect(weights);
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    header << "tensor " << t.name << " " << t.rows << " " << t.cols << " " << offset << "\n";
    offset += static_cast<std::uint64_t>(t.values.size()) * 8;
  }
  header << "end\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write weight file " + path.string());
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& t : tensors) {
    for (double v : t.values) {
      const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
      char buf[8];
      std::memcpy(buf, &bits, 8);
      out.write(buf, 8);
    }
  }
  if (!out) throw InputError("failed writing weight file " + path.string());
}

WeightFileInfo inspect_weights(const std::filesystem::path& path) { return parse_file(path, false).info; }

EncoderWeights load_weights(const std::filesystem::path& path) {
  ParsedFile parsed = parse_file(path, true);
  const EncoderConfig& cfg = parsed.info.config;
  std::map<std::string, const TensorEntry*> by_name;
  for (const auto& t : parsed.info.tensors) {
    if (!by_name.emplace(t.name, &t).second) throw InputError(path.string() + ": duplicate tensor '" + t.name + "'");
  }
  auto read = [&](const std::string& name) -> Matrix {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw InputError(path.string() + ": missing tensor '" + name + "'");
    const TensorEntry& e = *it->second;
    std::vector<double> data(e.rows * e.cols);
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, parsed.payload.data() + e.offset + i * 8, 8);
      data[i] = std::bit_cast<double>(to_little(bits));
    }
    if (!all_finite(data)) throw InputError(path.string() + ": tensor '" + name + "' has non-finite values");
    return Matrix(e.rows, e.cols, std::move(data));
  };
  auto read_vec = [&](const std::string& name) {
    const Matrix m = read(name);
    if (m.rows() != 1) throw InputError(path.string() + ": tensor '" + name + "' must have one row");
    return std::vector<double>(m.values().begin(), m.values().end());
  };

  try {
    cfg.validate();
    Matrix patch = read("patch_projection");
    auto patch_bias = read_vec("patch_bias");
    auto cls = read_vec("class_token");
    std::optional<Matrix> pos;
    if (by_name.contains("position_embeddings")) pos = read("position_embeddings");
    std::vector<LayerWeights> layers;
    for (int l = 0; l < cfg.layers; ++l) {
      const std::string p = "layer." + std::to_string(l) + ".";
      LayerWeights lw;
      lw.qkv = read(p + "qkv");
      lw.qkv_bias = read_vec(p + "qkv_bias");
      lw.output_projection = read(p + "output_projection");
      lw.output_bias = read_vec(p + "output_bias");
      lw.norm1_gain = read_vec(p + "norm1_gain");
      lw.norm1_bias = read_vec(p + "norm1_bias");
      lw.norm2_gain = read_vec(p + "norm2_gain");
      lw.norm2_bias = read_vec(p + "norm2_bias");
      lw.mlp_in = read(p + "mlp_in");
      lw.mlp_in_bias = read_vec(p + "mlp_in_bias");
      lw.mlp_out = read(p + "mlp_out");
      lw.mlp_out_bias = read_vec(p + "mlp_out_bias");
      layers.push_back(std::move(lw));
    }
    EncoderConfig loaded = cfg;
    loaded.profile = WeightProfile::FileLoaded;
    return EncoderWeights(loaded, std::move(patch), std::move(patch_bias), std::move(cls), std::move(pos),
                          std::move(layers));
  } catch (const ShapeError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace tct
