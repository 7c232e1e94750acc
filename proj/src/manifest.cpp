#include "tct/manifest.hpp"

#include <fstream>

#include "json.hpp"
#include "tct/errors.hpp"

namespace tct {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

ContextPrior parse_prior(const json& j, const std::filesystem::path& base) {
  const PriorKind kind = parse_prior_kind(j.at("kind").get<std::string>());
  switch (kind) {
    case PriorKind::Uniform:
      return ContextPrior::uniform();
    case PriorKind::SpatialGaussian: {
      const auto c = j.at("center").get<std::vector<double>>();
      if (c.size() != 2) throw InputError("prior center must be [x, y]");
      return ContextPrior::gaussian(c[0], c[1], j.value("sigma", 0.15));
    }
    case PriorKind::File:
      return load_prior_file(resolve(base, j.at("path").get<std::string>()));
  }
  throw InputError("unsupported prior");
}

TrialSpec parse_line(const json& j, const std::filesystem::path& base, int lineno) {
  if (!j.is_object()) throw InputError("expected a JSON object");
  TrialSpec s;
  s.synthetic = false;
  s.id = j.value("id", "line" + std::to_string(lineno));
  s.search_path = resolve(base, j.at("search").get<std::string>());
  s.target_path = resolve(base, j.at("target").get<std::string>());
  const auto box = j.at("box").get<std::vector<int>>();
  if (box.size() != 4) throw InputError("box must be [x, y, w, h]");
  s.box = {box[0], box[1], box[2], box[3]};
  if (s.box.w <= 0 || s.box.h <= 0) throw InputError("box has zero area");
  s.congruency = parse_congruency(j.value("congruency", std::string("n/a")));
  s.profile = parse_scale_profile(j.value("profile", std::string("coco18-like")));
  if (j.contains("prior")) s.prior = parse_prior(j.at("prior"), base);
  return s;
}

}  // namespace

std::vector<TrialSpec> parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                                      const std::string& source_name) {
  std::vector<TrialSpec> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      out.push_back(parse_line(json::parse(line), base_dir, lineno));
    } catch (const json::exception& e) {
      throw InputError(source_name + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(source_name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw InputError(source_name + ": manifest lists no trials");
  return out;
}

std::vector<TrialSpec> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path(), path.string());
}

}  // namespace tct
