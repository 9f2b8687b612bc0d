#pragma once

// JSON schema for models and unravelings, consumed by the CLI:
//
// {
//   "dim": 2,
//   "hamiltonian": {"re": [[...], ...], "im": [[...], ...]},
//   "channels": [{"rate": 1.0, "operator": {"re": ..., "im": ...}}, ...],
//   "unraveling": {"betas": [{"re": 0.0, "im": 0.0}, ...], "mixing": {...}}   (optional)
// }
//
// Matrices are row-major lists of rows; complex scalars are {"re", "im"}.

#include "betadyne/core.hpp"
#include "betadyne/model.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace betadyne {

using nlohmann::json;

inline json complex_to_json(Complex z) {
  return json{{"re", z.real()}, {"im", z.imag()}};
}

inline Complex complex_from_json(const json& j) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (!j.is_object() || !j.contains("re") || !j.contains("im"))
    throw std::invalid_argument("complex value must be a number or {\"re\", \"im\"}");
  return Complex(j.at("re").get<double>(), j.at("im").get<double>());
}

inline json matrix_to_json(const Matrix& m) {
  json re = json::array(), im = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json re_row = json::array(), im_row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      re_row.push_back(m(i, j).real());
      im_row.push_back(m(i, j).imag());
    }
    re.push_back(std::move(re_row));
    im.push_back(std::move(im_row));
  }
  return json{{"re", std::move(re)}, {"im", std::move(im)}};
}

inline Matrix matrix_from_json(const json& j, Eigen::Index expect_dim = -1) {
  if (!j.is_object() || !j.contains("re") || !j.contains("im"))
    throw std::invalid_argument("matrix value must carry \"re\" and \"im\" row lists");
  const json& re = j.at("re");
  const json& im = j.at("im");
  if (!re.is_array() || !im.is_array() || re.size() != im.size() || re.empty())
    throw std::invalid_argument("matrix rows malformed");
  const auto rows = Eigen::Index(re.size());
  const auto cols = Eigen::Index(re.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& rr = re.at(std::size_t(i));
    const json& ri = im.at(std::size_t(i));
    if (Eigen::Index(rr.size()) != cols || Eigen::Index(ri.size()) != cols)
      throw std::invalid_argument("matrix rows have inconsistent lengths");
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = Complex(rr.at(std::size_t(k)).get<double>(), ri.at(std::size_t(k)).get<double>());
  }
  if (expect_dim >= 0 && (rows != expect_dim || cols != expect_dim))
    throw std::invalid_argument("matrix dimension does not match \"dim\"");
  return m;
}

inline json unraveling_to_json(const UnravelingSpec& spec) {
  json betas = json::array();
  for (const Complex b : spec.betas) betas.push_back(complex_to_json(b));
  json out{{"betas", std::move(betas)}};
  if (spec.mixing) out["mixing"] = matrix_to_json(*spec.mixing);
  return out;
}

inline UnravelingSpec unraveling_from_json(const json& j) {
  UnravelingSpec spec;
  if (!j.is_object() || !j.contains("betas"))
    throw std::invalid_argument("unraveling must carry a \"betas\" list");
  for (const auto& b : j.at("betas")) spec.betas.push_back(complex_from_json(b));
  if (j.contains("mixing") && !j.at("mixing").is_null())
    spec.mixing = matrix_from_json(j.at("mixing"));
  return spec;
}

inline json model_to_json(const LindbladModel& model,
                          const std::optional<UnravelingSpec>& unraveling = std::nullopt) {
  json channels = json::array();
  for (const auto& ch : model.channels())
    channels.push_back(json{{"rate", ch.rate}, {"operator", matrix_to_json(ch.op)}});
  json out{{"dim", model.dim()},
           {"hamiltonian", matrix_to_json(model.hamiltonian())},
           {"channels", std::move(channels)}};
  if (unraveling) out["unraveling"] = unraveling_to_json(*unraveling);
  return out;
}

// Parses a model plus its optional unraveling block. Construction revalidates
// everything (hermiticity, dims, rates), so corrupt files are rejected here.
inline std::pair<LindbladModel, std::optional<UnravelingSpec>> model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("hamiltonian"))
    throw std::invalid_argument("model must carry \"dim\" and \"hamiltonian\"");
  const auto dim = j.at("dim").get<Eigen::Index>();
  if (dim < 1) throw std::invalid_argument("model \"dim\" must be positive");
  Matrix h = matrix_from_json(j.at("hamiltonian"), dim);
  std::vector<JumpChannel> channels;
  if (j.contains("channels")) {
    for (const auto& cj : j.at("channels")) {
      if (!cj.contains("rate") || !cj.contains("operator"))
        throw std::invalid_argument("channel must carry \"rate\" and \"operator\"");
      channels.push_back({cj.at("rate").get<double>(), matrix_from_json(cj.at("operator"), dim)});
    }
  }
  LindbladModel model(std::move(h), std::move(channels));
  std::optional<UnravelingSpec> spec;
  if (j.contains("unraveling") && !j.at("unraveling").is_null()) {
    spec = unraveling_from_json(j.at("unraveling"));
    if (spec->betas.size() != model.channels().size())
      throw std::invalid_argument("unraveling betas length must match channel count");
    if (spec->mixing && !is_unitary(*spec->mixing, tolerances().structural))
      throw std::invalid_argument("unraveling mixing matrix must be unitary");
  }
  return {std::move(model), std::move(spec)};
}

}  // namespace betadyne
