#include "clafd/scenarios.hpp"

#include <array>
#include <cmath>

namespace clafd {

StateSpaceModel oscillator_model(double Delta, double delta) {
  StateSpaceModel m;
  m.A.resize(2, 2);
  m.A << -0.0792 + Delta, -0.6746, 1.0936, 0.0926;
  m.B.resize(2, 2);
  m.B << 0.2734, 1.5700 - delta, 0.3677, 0.0;
  m.C.resize(2, 2);
  m.C << 0.0, 1.0, 0.1, 0.5;
  return m;
}

namespace {

constexpr std::array<double, 5> kUncontrolledDelta{0.0, 0.2, 0.4, 1.0, 1.1};
constexpr std::array<double, 5> kUncontrolledSmallDelta{0.0, 0.1660, 0.3319, 0.8297, 0.9127};
constexpr std::array<double, 5> kFeedbackDelta{2.0, 2.01, 2.02, 2.03, 2.04};
constexpr std::array<double, 5> kFeedbackSmallDelta{1.6594, 1.6677, 1.6760, 1.6843, 1.6926};

NoiseModel diagonal_noise(double q, double r) {
  NoiseModel n;
  n.Q = q * Matrix::Identity(2, 2);
  n.R = r * Matrix::Identity(2, 2);
  n.S = Matrix::Zero(2, 2);
  return n;
}

ExperimentConfig uncontrolled(std::string name, ConstraintSpec constraints) {
  ExperimentConfig cfg;
  cfg.name = std::move(name);
  const NoiseModel noise = diagonal_noise(0.2, 80.0);
  for (std::size_t i = 0; i < kUncontrolledDelta.size(); ++i) {
    cfg.candidates.push_back({oscillator_model(kUncontrolledDelta[i], kUncontrolledSmallDelta[i]), noise});
  }
  cfg.constraints = std::move(constraints);
  cfg.x0_mean = (Vector(2) << 0.0, 1.0).finished();
  cfg.x0_cov = 0.5 * Matrix::Identity(2, 2);
  cfg.prior = Vector::Constant(5, 0.2);
  return cfg;
}

ExperimentConfig feedback() {
  ExperimentConfig cfg;
  cfg.name = "feedback-ball";
  const NoiseModel noise = diagonal_noise(1e-4, 1e-2);
  const StateSpaceModel nominal = oscillator_model(kFeedbackDelta[0], kFeedbackSmallDelta[0]);
  const std::array<double, 2> poles{0.94, 0.95};
  const ControllerGains gains = nominal_controller(nominal, noise, poles);
  for (std::size_t i = 0; i < kFeedbackDelta.size(); ++i) {
    const auto cl = close_loop(oscillator_model(kFeedbackDelta[i], kFeedbackSmallDelta[i]), noise, nominal, gains);
    cfg.candidates.push_back({cl.model, cl.noise});
  }
  cfg.true_model = 3;
  cfg.constraints = BallSpec{2.5e-3, (Vector(2) << 3.0, 5.0).finished()};
  // The loop has been running around the reference: start from the nominal
  // equilibrium with the stationary closed-loop covariance.
  const auto& loop0 = cfg.candidates.front();
  const auto& r = std::get<BallSpec>(cfg.constraints).center;
  cfg.x0_mean = (Matrix::Identity(4, 4) - loop0.model.A).fullPivLu().solve(loop0.model.B * r);
  cfg.x0_cov = stationary_covariance(loop0.model.A, loop0.noise.Q);
  cfg.prior = Vector::Constant(5, 0.2);
  return cfg;
}

}  // namespace

ControllerGains nominal_controller(const StateSpaceModel& nominal, const NoiseModel& noise,
                                   std::span<const double> poles) {
  ControllerGains g;
  g.K = steady_state_filter(nominal, noise).gain;
  g.F = place_poles(nominal.A, nominal.B, poles);
  g.G = dc_feedforward_gain(nominal, g.F);
  return g;
}

ExperimentConfig build_scenario(std::string_view name) {
  if (name == "uncontrolled-polytope") return uncontrolled("uncontrolled-polytope", PolytopeSpec{2.0, 1.0});
  if (name == "uncontrolled-ball") return uncontrolled("uncontrolled-ball", BallSpec{2.0, Vector::Zero(2)});
  if (name == "feedback-ball") return feedback();
  throw std::invalid_argument("unknown scenario '" + std::string(name) + "'");
}

std::vector<std::string> scenario_names() { return {"uncontrolled-polytope", "uncontrolled-ball", "feedback-ball"}; }

std::vector<SweepCell> concavity_sweep(const ExperimentConfig& base, std::span<const double> R_values,
                                       std::span<const double> C_scales, const Vector& u_fixed) {
  base.validate();
  const Candidate& ref = base.candidates.front();
  if (u_fixed.size() != base.horizon * ref.model.nu()) {
    throw DimensionError("u_fixed must have horizon * n_u entries");
  }
  const FilterState fs{base.x0_mean, base.x0_cov};
  std::vector<SweepCell> cells;
  cells.reserve(R_values.size() * C_scales.size());
  for (double scale : C_scales) {
    StateSpaceModel m1 = ref.model;
    m1.C = scale * ref.model.C;
    for (double r : R_values) {
      if (!(r > 0.0)) throw NumericError("sweep noise variance must be positive");
      NoiseModel noise = ref.noise;
      noise.R = r * Matrix::Identity(ref.model.ny(), ref.model.ny());
      const PairQuadratic pq =
          pair_quadratic(build_lifted(ref.model, noise, base.horizon), build_lifted(m1, noise, base.horizon), fs, fs);
      const ConcavitySpectrum spec = spectrum(pq);
      SweepCell cell;
      cell.R = r;
      cell.scale = scale;
      cell.gamma_fro = pq.Gamma.norm();
      cell.level = spec.degenerate() ? 0.0 : concavity_level(pq, spec, u_fixed);
      cell.pass = concave_at(pq, spec, u_fixed) == Concavity::concave;
      cells.push_back(cell);
    }
  }
  return cells;
}

Vector sweep_default_input() {
  return (Vector(10) << -1.0, -1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 0.0, 0.0).finished();
}

std::vector<double> sweep_default_R() {
  std::vector<double> r;
  for (int e = -20; e <= 30; ++e) r.push_back(std::pow(10.0, e / 10.0));
  return r;
}

std::vector<double> sweep_default_scales() {
  std::vector<double> s;
  for (int i = 0; i <= 20; ++i) s.push_back(1.0 + 0.1 * i);
  return s;
}

}  // namespace clafd
