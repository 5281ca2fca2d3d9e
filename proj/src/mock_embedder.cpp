#include <cmath>
#include <fstream>
#include <random>

#include "medfab/errors.hpp"
#include "medfab/hashing.hpp"
#include "medfab/providers.hpp"

namespace medfab {

using nlohmann::json;

namespace {

void normalise(Embedding& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw PreconditionError("cannot normalise a zero vector");
  for (double& x : v) x /= norm;
}

Embedding hashed_vector(const std::string& text, int dim) {
  // Raw engine output only: distribution objects are implementation-defined.
  std::mt19937_64 gen(fnv1a64(text));
  Embedding v(static_cast<std::size_t>(dim));
  for (double& x : v) x = static_cast<double>(gen() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  normalise(v);
  return v;
}

}  // namespace

MockEmbedder::MockEmbedder(int dim) : dim_(dim) {
  if (dim < 1) throw PreconditionError("mock embedding dimension must be >= 1");
}

Embedding MockEmbedder::vector_for(const std::string& text) const {
  {
    std::lock_guard lock(mu_);
    if (auto it = overrides_.find(text); it != overrides_.end()) return it->second;
  }
  return hashed_vector(text, dim_);
}

std::vector<Embedding> MockEmbedder::embed(const EmbedRequest& req) {
  req.validate();
  ++calls_;
  std::vector<Embedding> out;
  out.reserve(req.inputs.size());
  for (const auto& text : req.inputs) out.push_back(vector_for(text));
  return out;
}

void MockEmbedder::set_vector(const std::string& text, Embedding v) {
  if (static_cast<int>(v.size()) != dim_) {
    throw PreconditionError("override vector for '" + text + "' has dimension " +
                            std::to_string(v.size()) + ", expected " + std::to_string(dim_));
  }
  normalise(v);
  std::lock_guard lock(mu_);
  overrides_[text] = std::move(v);
}

void MockEmbedder::script_pair(const std::string& a, const std::string& b, double similarity) {
  if (!(similarity >= -1.0 && similarity <= 1.0)) {
    throw PreconditionError("scripted similarity must lie in [-1, 1]");
  }
  if (a == b) throw PreconditionError("cannot script a similarity between identical texts");
  if (dim_ < 2) throw PreconditionError("scripting similarities needs dimension >= 2");

  const Embedding va = vector_for(a);
  // Gram-Schmidt: the hashed vector of b, made orthogonal to va.
  Embedding w = hashed_vector(b, dim_);
  double proj = 0.0;
  for (int i = 0; i < dim_; ++i) proj += w[i] * va[i];
  for (int i = 0; i < dim_; ++i) w[i] -= proj * va[i];
  normalise(w);

  const double ortho = std::sqrt(std::max(0.0, 1.0 - similarity * similarity));
  Embedding vb(static_cast<std::size_t>(dim_));
  for (int i = 0; i < dim_; ++i) vb[i] = similarity * va[i] + ortho * w[i];
  std::lock_guard lock(mu_);
  overrides_[b] = std::move(vb);
}

void MockEmbedder::load_overrides(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open embedding overrides '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
    if (auto it = doc.find("vectors"); it != doc.end()) {
      for (const auto& [text, vec] : it->items()) set_vector(text, vec.get<Embedding>());
    }
    if (auto it = doc.find("pairs"); it != doc.end()) {
      for (const auto& p : *it) {
        script_pair(p.at("a").get<std::string>(), p.at("b").get<std::string>(),
                    p.at("similarity").get<double>());
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed embedding overrides '" + path.string() + "': " + e.what());
  }
}

}  // namespace medfab
