#include "tct/context_provider.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tct/errors.hpp"

namespace tct {

std::string to_string(PriorKind k) {
  switch (k) {
    case PriorKind::Uniform: return "uniform";
    case PriorKind::SpatialGaussian: return "spatial-gaussian";
    case PriorKind::File: return "file";
  }
  return "unknown";
}

PriorKind parse_prior_kind(const std::string& s) {
  if (s == "uniform") return PriorKind::Uniform;
  if (s == "spatial-gaussian" || s == "gaussian") return PriorKind::SpatialGaussian;
  if (s == "file") return PriorKind::File;
  throw InputError("unknown prior kind '" + s + "' (uniform | spatial-gaussian | file)");
}

ContextPrior ContextPrior::gaussian(double cx, double cy, double sigma) {
  ContextPrior p;
  p.kind = PriorKind::SpatialGaussian;
  p.center_x = cx;
  p.center_y = cy;
  p.sigma = sigma;
  return p;
}

ContextPrior parse_prior_text(const std::string& text) {
  std::istringstream in(text);
  ContextPrior p;
  p.kind = PriorKind::File;
  if (!(in >> p.grid.rows >> p.grid.cols) || p.grid.rows <= 0 || p.grid.cols <= 0) {
    throw InputError("prior file: first line must be 'rows cols' with positive values");
  }
  p.values.reserve(static_cast<std::size_t>(p.grid.count()));
  double v;
  while (in >> v) {
    if (!std::isfinite(v)) throw InputError("prior file: non-finite gain");
    p.values.push_back(v);
  }
  if (!in.eof()) throw InputError("prior file: unparsable value after " + std::to_string(p.values.size()) + " gains");
  if (p.values.size() != static_cast<std::size_t>(p.grid.count())) {
    throw InputError("prior file: expected " + std::to_string(p.grid.count()) + " gains, found " +
                     std::to_string(p.values.size()));
  }
  return p;
}

ContextPrior load_prior_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open prior file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_prior_text(ss.str());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<double> context_gain(const ContextPrior& prior, GridDims grid, double g_max) {
  if (grid.rows <= 0 || grid.cols <= 0) throw ShapeError("context_gain: empty patch grid");
  if (!(g_max >= 0.0) || !std::isfinite(g_max)) throw InputError("context_gain: g_max must be finite and >= 0");
  std::vector<double> g(static_cast<std::size_t>(grid.count()), 0.0);
  switch (prior.kind) {
    case PriorKind::Uniform:
      break;
    case PriorKind::SpatialGaussian: {
      if (!(prior.sigma > 0.0)) throw InputError("gaussian prior: sigma must be positive");
      const double denom = 2.0 * prior.sigma * prior.sigma;
      for (int r = 0; r < grid.rows; ++r) {
        const double dy = (r + 0.5) / grid.rows - prior.center_y;
        for (int c = 0; c < grid.cols; ++c) {
          const double dx = (c + 0.5) / grid.cols - prior.center_x;
          g[static_cast<std::size_t>(r * grid.cols + c)] = g_max * std::exp(-(dx * dx + dy * dy) / denom);
        }
      }
      break;
    }
    case PriorKind::File:
      if (prior.grid != grid) {
        throw InputError("prior grid " + std::to_string(prior.grid.rows) + "x" + std::to_string(prior.grid.cols) +
                         " does not match the search patch grid " + std::to_string(grid.rows) + "x" +
                         std::to_string(grid.cols));
      }
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::clamp(prior.values[i], 0.0, g_max);
      break;
  }
  return g;
}

}  // namespace tct
