#include "n2ce/objectives.hpp"

#include <cmath>
#include <sstream>

#include "n2ce/divergence.hpp"

namespace n2ce {

std::string to_string(ObjectiveTag tag) {
  switch (tag) {
    case ObjectiveTag::Nce:
      return "NCE";
    case ObjectiveTag::N2ce:
      return "N2CE";
    case ObjectiveTag::Nwj:
      return "NWJ";
    case ObjectiveTag::NegReweight:
      return "NEG_REWEIGHT";
    case ObjectiveTag::MleExact:
      return "MLE_EXACT";
  }
  return "UNKNOWN";
}

ObjectiveTag objective_tag_from_string(const std::string& name) {
  for (auto tag : {ObjectiveTag::Nce, ObjectiveTag::N2ce, ObjectiveTag::Nwj, ObjectiveTag::NegReweight,
                   ObjectiveTag::MleExact}) {
    if (to_string(tag) == name) return tag;
  }
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

void ObjectiveKind::validate() const {
  switch (tag) {
    case ObjectiveTag::Nce:
      require(noise_magnitude == 1.0, "NCE fixes M = 1");
      break;
    case ObjectiveTag::N2ce:
    case ObjectiveTag::NegReweight:
      require(std::isfinite(noise_magnitude) && noise_magnitude >= 1.0, to_string(tag) + " requires M >= 1");
      break;
    case ObjectiveTag::Nwj:
    case ObjectiveTag::MleExact:
      break;
  }
}

std::string ObjectiveKind::label() const {
  if (tag == ObjectiveTag::N2ce || tag == ObjectiveTag::NegReweight) {
    std::ostringstream os;
    os << to_string(tag) << "(" << noise_magnitude << ")";
    return os.str();
  }
  return to_string(tag);
}

double weight_fn(double noise_magnitude, double ratio) {
  require(noise_magnitude > 0.0 && ratio > 0.0, "weight_fn: M and r must be positive");
  return noise_magnitude / (noise_magnitude + ratio);
}

double sigmoid_form_stage_objective(const MlpRatioModel& model, const Matrix& pos, const Matrix& neg, int stage,
                                    double m) {
  detail::check_samples(pos, neg);
  detail::check_magnitude(m);
  const StageView view(model, stage);
  const double log_m = std::log(m);
  const Vector fp = view.log_ratios(pos);
  const Vector fn = view.log_ratios(neg);
  double pos_term = 0.0;
  for (Index i = 0; i < fp.size(); ++i) pos_term += std::log(sigmoid(fp(i) - log_m));
  double neg_term = 0.0;
  for (Index i = 0; i < fn.size(); ++i) neg_term += std::log1p(-sigmoid(fn(i) - log_m));
  return pos_term / fp.size() + m * neg_term / fn.size();
}

GradEstimate sigmoid_form_stage_gradient(const MlpRatioModel& model, const Matrix& pos, const Matrix& neg, int stage,
                                         double m) {
  detail::check_samples(pos, neg);
  detail::check_magnitude(m);
  const StageView view(model, stage);
  const double log_m = std::log(m);
  const Vector fp = view.log_ratios(pos);
  const Vector fn = view.log_ratios(neg);
  const Vector wp =
      fp.unaryExpr([&](double f) { return 1.0 - sigmoid(f - log_m); }) / static_cast<double>(fp.size());
  const Vector wn = fn.unaryExpr([&](double f) { return sigmoid(f - log_m); }) * (m / static_cast<double>(fn.size()));
  return {view.weighted_grad(pos, wp) - view.weighted_grad(neg, wn), pos.rows(), neg.rows()};
}

double binary_entropy(double a, bool allow_endpoints) {
  if (allow_endpoints && (a == 0.0 || a == 1.0)) return 0.0;
  require(a > 0.0 && a < 1.0, "binary_entropy: argument must lie in (0,1)");
  return -a * std::log(a) - (1.0 - a) * std::log1p(-a);
}

}  // namespace n2ce
