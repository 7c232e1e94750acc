#include "tct/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tct/errors.hpp"
#include "tct/rng.hpp"

namespace tct {

namespace pt = boost::property_tree;

RunConfig::RunConfig() {
  pipeline.encoder_width = 64;
  pipeline.encoder_height = 40;
  pipeline.target_size = 12;
  pipeline.modulation = ModulationConfig::tct_default(encoder.layers);
  pipeline.modulation.g_max = 0.01;
}

void RunConfig::validate() const {
  encoder.validate();
  pipeline.modulation.validate(encoder.layers);
  if (encoder.profile == WeightProfile::FileLoaded && weights_file.empty()) {
    throw InputError("[encoder] profile = file-loaded needs a weights path");
  }
  if (pipeline.search.ior_width < 1 || pipeline.search.ior_height < 1) throw InputError("[search] IOR must be >= 1");
  if (pipeline.search.max_fixations && *pipeline.search.max_fixations < 1) {
    throw InputError("[search] max_fixations must be >= 1");
  }
  if (pipeline.encoder_width < 0 || pipeline.encoder_height < 0 || pipeline.target_size < 0) {
    throw InputError("[search] sizes must be >= 0");
  }
  if (pipeline.prior.kind == PriorKind::SpatialGaussian && !(pipeline.prior.sigma > 0.0)) {
    throw InputError("[prior] sigma must be positive");
  }
  if (bench.trials < 1) throw InputError("[bench] trials must be >= 1");
  if (bench.jobs < 1) throw InputError("[bench] jobs must be >= 1");
  if (bench.n_max && *bench.n_max < 1) throw InputError("[bench] n_max must be >= 1");
  if (bench.congruencies.empty()) throw InputError("[bench] congruency list is empty");
  if (bench.variants.empty()) throw InputError("[bench] variants list is empty");
}

std::uint64_t RunConfig::resolved_weight_seed() const { return weight_seed.value_or(derive_seed(seed, "weights")); }

std::set<int> parse_layer_set(const std::string& text) {
  std::set<int> out;
  std::string trimmed;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) trimmed.push_back(c);
  if (trimmed.empty() || trimmed == "none") return out;
  std::stringstream ss(trimmed);
  std::string item;
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used == s.size() && v >= 1) return v;
    } catch (const std::exception&) {
    }
    throw InputError("bad layer list '" + text + "' (layers are numbered from 1)");
  };
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.insert(number(item));
    } else {
      const int lo = number(item.substr(0, dash)), hi = number(item.substr(dash + 1));
      if (lo > hi) throw InputError("bad layer range '" + item + "'");
      for (int l = lo; l <= hi; ++l) out.insert(l);
    }
  }
  return out;
}

std::string format_layer_set(const std::set<int>& layers) {
  if (layers.empty()) return "none";
  std::string out;
  auto it = layers.begin();
  while (it != layers.end()) {
    const int lo = *it;
    int hi = lo;
    for (++it; it != layers.end() && *it == hi + 1; ++it) hi = *it;
    if (!out.empty()) out += ",";
    out += lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi);
  }
  return out;
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

// Typed access to one section that remembers which keys were consumed.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name, std::string source)
      : tree_(tree), name_(std::move(name)), source_(std::move(source)) {}

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    if (!tree_) return std::nullopt;
    auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return *v;
  }

  template <typename T>
  std::optional<T> get(const std::string& key) {
    auto v = raw(key);
    if (!v) return std::nullopt;
    std::istringstream in(*v);
    T out{};
    if constexpr (std::is_same_v<T, bool>) {
      if (*v == "true" || *v == "1" || *v == "yes") return true;
      if (*v == "false" || *v == "0" || *v == "no") return false;
      fail(key, "expects true/false");
    } else {
      if (!(in >> out) || !(in >> std::ws).eof()) fail(key, "cannot parse '" + *v + "'");
    }
    return out;
  }

  template <typename T>
  void set(const std::string& key, T& field) {
    if (auto v = get<T>(key)) field = *v;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw InputError(source_ + ": [" + name_ + "] " + key + " " + what);
  }

  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, _] : *tree_) {
      if (!used_.contains(key)) throw InputError(source_ + ": [" + name_ + "] unknown key '" + key + "'");
    }
  }

 private:
  const pt::ptree* tree_;
  std::string name_, source_;
  std::set<std::string> used_;
};

}  // namespace

RunConfig parse_run_config(std::istream& in, const std::string& source_name) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(source_name + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  static const std::set<std::string> known = {"encoder", "modulation", "search", "prior", "bench", "run"};
  for (const auto& [name, sub] : tree) {
    if (!known.contains(name)) throw InputError(source_name + ": unknown section [" + name + "]");
    if (sub.empty()) throw InputError(source_name + ": key '" + name + "' outside a section");
  }
  auto section = [&](const std::string& name) {
    auto child = tree.get_child_optional(name);
    return Section(child ? &*child : nullptr, name, source_name);
  };

  RunConfig cfg;
  Section run = section("run");
  run.set("seed", cfg.seed);
  if (auto v = run.raw("output_dir")) cfg.output_dir = *v;
  run.reject_unknown();

  Section enc = section("encoder");
  const WeightProfile profile = parse_weight_profile(enc.raw("profile").value_or("pixel-similarity"));
  if (auto v = enc.raw("weights")) cfg.weights_file = *v;
  if (auto v = enc.get<std::uint64_t>("weight_seed")) cfg.weight_seed = *v;
  if (profile == WeightProfile::FileLoaded) {
    if (cfg.weights_file.empty()) enc.fail("weights", "is required for profile = file-loaded");
    cfg.encoder = inspect_weights(cfg.weights_file).config;
    cfg.encoder.profile = WeightProfile::FileLoaded;
  } else {
    cfg.encoder = profile == WeightProfile::PixelSimilarity ? EncoderConfig::pixel_similarity_default() : EncoderConfig{};
    auto& e = cfg.encoder;
    enc.set("channels", e.channels);
    enc.set("patch_size", e.patch_size);
    if (auto d = enc.get<int>("hidden_dim")) {
      e.hidden_dim = *d;
    } else if (profile == WeightProfile::PixelSimilarity) {
      e.hidden_dim = 2 * e.patch_len();
    }
    enc.set("heads", e.heads);
    enc.set("layers", e.layers);
    enc.set("mlp_dim", e.mlp_dim);
    if (auto v = enc.raw("norm")) e.norm = parse_norm_kind(*v);
    enc.set("norm_eps", e.norm_eps);
    enc.set("use_position_embeddings", e.use_position_embeddings);
    if (auto v = enc.raw("position_grid")) {
      char x = 0;
      std::istringstream g(*v);
      if (!(g >> e.position_grid.rows >> x >> e.position_grid.cols) || x != 'x') {
        enc.fail("position_grid", "expects ROWSxCOLS");
      }
    }
    enc.set("normalize_patches", e.normalize_patches);
    enc.set("key_gain", e.key_gain);
    enc.set("residual_write_scale", e.residual_write_scale);
  }
  enc.reject_unknown();

  Section mod = section("modulation");
  cfg.pipeline.modulation = ModulationConfig::tct_default(cfg.encoder.layers);
  cfg.pipeline.modulation.g_max = 0.01;
  if (auto v = mod.raw("target_layers")) cfg.pipeline.modulation.target_layers = parse_layer_set(*v);
  if (auto v = mod.raw("context_layers")) cfg.pipeline.modulation.context_layers = parse_layer_set(*v);
  mod.set("g_max", cfg.pipeline.modulation.g_max);
  mod.reject_unknown();

  Section search = section("search");
  auto& p = cfg.pipeline;
  search.set("ior_width", p.search.ior_width);
  search.set("ior_height", p.search.ior_height);
  if (auto v = search.get<int>("max_fixations")) p.search.max_fixations = *v;
  if (auto v = search.raw("upsample")) {
    if (*v == "bilinear") p.upsample = Upsample::Bilinear;
    else if (*v == "nearest") p.upsample = Upsample::Nearest;
    else search.fail("upsample", "expects bilinear or nearest");
  }
  search.set("encoder_width", p.encoder_width);
  search.set("encoder_height", p.encoder_height);
  search.set("target_size", p.target_size);
  search.reject_unknown();

  Section prior = section("prior");
  if (auto v = prior.raw("kind")) p.prior.kind = parse_prior_kind(*v);
  prior.set("center_x", p.prior.center_x);
  prior.set("center_y", p.prior.center_y);
  prior.set("sigma", p.prior.sigma);
  if (auto v = prior.raw("file")) {
    if (p.prior.kind != PriorKind::File) prior.fail("file", "only applies to kind = file");
    cfg.prior_file = *v;
    const ContextPrior loaded = load_prior_file(*v);
    p.prior.grid = loaded.grid;
    p.prior.values = loaded.values;
  } else if (p.prior.kind == PriorKind::File) {
    prior.fail("file", "is required for kind = file");
  }
  prior.reject_unknown();

  Section bench = section("bench");
  auto& b = cfg.bench;
  if (auto v = bench.raw("profile")) b.profile = parse_scale_profile(*v);
  bench.set("trials", b.trials);
  bench.set("density", b.density);
  if (auto v = bench.get<double>("ratio")) b.ratio = *v;
  if (auto v = bench.raw("congruency")) {
    b.congruencies.clear();
    if (*v == "both") {
      b.congruencies = {Congruency::Congruent, Congruency::Incongruent};
    } else {
      for (const auto& c : split_list(*v)) b.congruencies.push_back(parse_congruency(c));
    }
  }
  if (auto v = bench.raw("variants")) b.variants = split_list(*v);
  bench.set("layer_groups", b.layer_groups);
  if (auto v = bench.get<int>("n_max")) b.n_max = *v;
  bench.set("jobs", b.jobs);
  if (auto v = bench.raw("manifest")) b.manifest = *v;
  bench.reject_unknown();

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  return parse_run_config(in, path.string());
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void write_effective_config(std::ostream& out, const RunConfig& c) {
  const auto& e = c.encoder;
  const auto& p = c.pipeline;
  const auto& b = c.bench;
  out << "[run]\n"
      << "seed = " << c.seed << "\n"
      << "output_dir = " << c.output_dir.string() << "\n\n";
  out << "[encoder]\n"
      << "profile = " << to_string(e.profile) << "\n";
  if (e.profile == WeightProfile::FileLoaded) {
    out << "weights = " << c.weights_file.string() << "\n";
  } else {
    if (e.profile == WeightProfile::SeededRandom) out << "weight_seed = " << c.resolved_weight_seed() << "\n";
    out << "channels = " << e.channels << "\n"
        << "patch_size = " << e.patch_size << "\n"
        << "hidden_dim = " << e.hidden_dim << "\n"
        << "heads = " << e.heads << "\n"
        << "layers = " << e.layers << "\n"
        << "mlp_dim = " << e.mlp_dim << "\n"
        << "norm = " << to_string(e.norm) << "\n"
        << "norm_eps = " << num(e.norm_eps) << "\n"
        << "use_position_embeddings = " << (e.use_position_embeddings ? "true" : "false") << "\n"
        << "position_grid = " << e.position_grid.rows << "x" << e.position_grid.cols << "\n"
        << "normalize_patches = " << (e.normalize_patches ? "true" : "false") << "\n"
        << "key_gain = " << num(e.key_gain) << "\n"
        << "residual_write_scale = " << num(e.residual_write_scale) << "\n";
  }
  out << "\n[modulation]\n"
      << "target_layers = " << format_layer_set(p.modulation.target_layers) << "\n"
      << "context_layers = " << format_layer_set(p.modulation.context_layers) << "\n"
      << "g_max = " << num(p.modulation.g_max) << "\n\n";
  out << "[search]\n"
      << "ior_width = " << p.search.ior_width << "\n"
      << "ior_height = " << p.search.ior_height << "\n";
  if (p.search.max_fixations) out << "max_fixations = " << *p.search.max_fixations << "\n";
  out << "upsample = " << (p.upsample == Upsample::Bilinear ? "bilinear" : "nearest") << "\n"
      << "encoder_width = " << p.encoder_width << "\n"
      << "encoder_height = " << p.encoder_height << "\n"
      << "target_size = " << p.target_size << "\n\n";
  out << "[prior]\n"
      << "kind = " << to_string(p.prior.kind) << "\n"
      << "center_x = " << num(p.prior.center_x) << "\n"
      << "center_y = " << num(p.prior.center_y) << "\n"
      << "sigma = " << num(p.prior.sigma) << "\n";
  if (p.prior.kind == PriorKind::File) out << "file = " << c.prior_file.string() << "\n";
  out << "\n[bench]\n"
      << "profile = " << to_string(b.profile) << "\n"
      << "trials = " << b.trials << "\n"
      << "density = " << num(b.density) << "\n"
      << "ratio = " << num(b.ratio.value_or(profile_spec(b.profile).target_ratio)) << "\n"
      << "congruency = ";
  for (std::size_t i = 0; i < b.congruencies.size(); ++i) out << (i ? "," : "") << to_string(b.congruencies[i]);
  out << "\nvariants = ";
  for (std::size_t i = 0; i < b.variants.size(); ++i) out << (i ? "," : "") << b.variants[i];
  out << "\nlayer_groups = " << (b.layer_groups ? "true" : "false") << "\n";
  if (b.n_max) out << "n_max = " << *b.n_max << "\n";
  out << "jobs = " << b.jobs << "\n";
  if (!b.manifest.empty()) out << "manifest = " << b.manifest.string() << "\n";
}

EncoderWeights build_weights(const RunConfig& config) {
  switch (config.encoder.profile) {
    case WeightProfile::PixelSimilarity: return EncoderWeights::pixel_similarity(config.encoder);
    case WeightProfile::SeededRandom: return EncoderWeights::seeded_random(config.encoder, config.resolved_weight_seed());
    case WeightProfile::FileLoaded: return load_weights(config.weights_file);
  }
  throw InvariantError("unhandled weight profile");
}

}  // namespace tct
