#include "n2ce/gradcheck.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "n2ce/objectives.hpp"

namespace n2ce {

namespace {

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  Vector probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

std::string label_with_m(const char* name, double m) {
  std::ostringstream os;
  os << name << "(M=" << m << ")";
  return os.str();
}

}  // namespace

std::vector<GradCheckRow> run_gradient_checks(const GradCheckOptions& o) {
  require(o.dim >= 1 && o.samples >= 1, "gradcheck: dim and samples must be positive");
  std::vector<GradCheckRow> rows;
  auto add = [&](std::string name, double error, double tol) { rows.push_back({std::move(name), error, tol, error <= tol}); };

  Rng rng = derive_rng(o.seed);
  const Vector alpha = 0.5 * standard_normal(o.dim, 1, rng);
  const Vector target = Vector::LinSpaced(o.dim, -1.0, 1.0);
  const Matrix pos = sample_gaussian_location(target, o.samples, rng);
  const Matrix neg = sample_gaussian_location(Vector::Zero(o.dim), o.samples, rng);
  constexpr double h = 1e-5;
  constexpr double closed_tol = 1e-6;

  auto at = [](const Vector& a) { return GaussianLocation(a); };
  for (double m : o.m_grid) {
    const auto fd = central_difference([&](const Vector& a) { return n2ce_objective(at(a), pos, neg, m); }, alpha, h);
    add(label_with_m("N2CE gaussian", m), relative_error(n2ce_gradient(at(alpha), pos, neg, m).vector, fd), closed_tol);
    const auto fd_nr =
        central_difference([&](const Vector& a) { return neg_reweight_objective(at(a), pos, neg, m); }, alpha, h);
    add(label_with_m("NEG_REWEIGHT gaussian", m), relative_error(neg_reweight_gradient(at(alpha), pos, neg, m).vector, fd_nr),
        closed_tol);
  }
  {
    const auto fd = central_difference([&](const Vector& a) { return nce_objective(at(a), pos, neg); }, alpha, h);
    add("NCE gaussian", relative_error(estimator_gradient(ObjectiveKind::nce(), at(alpha), pos, neg).vector, fd),
        closed_tol);
    const auto fd_nwj = central_difference([&](const Vector& a) { return nwj_objective(at(a), pos, neg); }, alpha, h);
    add("NWJ gaussian", relative_error(nwj_gradient(at(alpha), pos, neg).vector, fd_nwj), closed_tol);
    ObjectiveOptions penalized;
    penalized.ratio_penalty = 0.1;
    const auto fd_pen = central_difference(
        [&](const Vector& a) { return n2ce_objective(at(a), pos, neg, 10.0, penalized); }, alpha, h);
    add("N2CE gaussian ratio penalty", relative_error(n2ce_gradient(at(alpha), pos, neg, 10.0, penalized).vector, fd_pen),
        closed_tol);
  }

  // Ratio network: parameter gradients on a random subset of coordinates.
  const MlpShape shape{o.dim, o.mlp_hidden_width, o.mlp_resblocks, 3};
  MlpRatioModel net = MlpRatioModel::initialized(shape, rng);
  const int stage = 1;
  std::vector<Index> coords(net.num_params());
  std::iota(coords.begin(), coords.end(), Index(0));
  std::shuffle(coords.begin(), coords.end(), rng);
  coords.resize(static_cast<std::size_t>(std::min<Index>(o.mlp_coordinates, net.num_params())));
  auto subset_fd = [&](const std::function<double(const MlpRatioModel&)>& f) {
    Vector fd(static_cast<Index>(coords.size()));
    MlpRatioModel probe = net;
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const Index c = coords[i];
      const double base = net.params()(c);
      probe.mutable_params()(c) = base + h;
      const double up = f(probe);
      probe.mutable_params()(c) = base - h;
      const double down = f(probe);
      probe.mutable_params()(c) = base;
      fd(static_cast<Index>(i)) = (up - down) / (2.0 * h);
    }
    return fd;
  };
  auto pick = [&](const Vector& full) {
    Vector out(static_cast<Index>(coords.size()));
    for (std::size_t i = 0; i < coords.size(); ++i) out(static_cast<Index>(i)) = full(coords[i]);
    return out;
  };
  constexpr double mlp_tol = 1e-4;
  {
    const Vector z = pos.row(0).transpose();
    const auto fd = subset_fd([&](const MlpRatioModel& m) { return mlp_forward(m, z, stage); });
    add("MLP forward", relative_error(pick(mlp_param_grad(net, z, stage)), fd), mlp_tol);
  }
  for (double m : o.m_grid) {
    const auto fd =
        subset_fd([&](const MlpRatioModel& model) { return n2ce_objective(StageView(model, stage), pos, neg, m); });
    add(label_with_m("N2CE mlp", m), relative_error(pick(n2ce_gradient(StageView(net, stage), pos, neg, m).vector), fd),
        mlp_tol);
    const auto fd_sig =
        subset_fd([&](const MlpRatioModel& model) { return sigmoid_form_stage_objective(model, pos, neg, stage, m); });
    const Vector sig = sigmoid_form_stage_gradient(net, pos, neg, stage, m).vector;
    add(label_with_m("sigmoid form mlp", m), relative_error(pick(sig), fd_sig), mlp_tol);
    add(label_with_m("sigmoid form vs direct (abs)", m),
        (sig - n2ce_gradient(StageView(net, stage), pos, neg, m).vector).cwiseAbs().maxCoeff(), 1e-10);
  }
  {
    const GaussianLocation g(alpha);
    add("N2CE(M=1) vs NCE objective (abs)", std::abs(n2ce_objective(g, pos, neg, 1.0) - nce_objective(g, pos, neg)),
        1e-12);
  }
  return rows;
}

}  // namespace n2ce
