#include "clafd/simulation.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <limits>

namespace clafd {

std::uint64_t substream_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  for (std::uint64_t k : keys) h = mix(h ^ mix(k));
  return h;
}

const char* to_string(Method m) {
  switch (m) {
    case Method::bd:
      return "bd";
    case Method::qta:
      return "qta";
    case Method::bc:
      return "bc";
    case Method::sbc:
      return "sbc";
    case Method::ol:
      return "ol";
    case Method::none:
      return "none";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::bd, Method::qta, Method::bc, Method::sbc, Method::ol, Method::none}) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (candidates.empty()) throw DimensionError("experiment needs at least one candidate model");
  const auto& ref = candidates.front().model;
  for (const auto& cand : candidates) {
    cand.model.validate();
    cand.noise.validate(cand.model.nx(), cand.model.ny());
    if (cand.model.nx() != ref.nx() || cand.model.nu() != ref.nu() || cand.model.ny() != ref.ny()) {
      throw DimensionError("candidates must share nx, nu and ny");
    }
  }
  if (true_model < 0 || true_model >= static_cast<int>(candidates.size())) {
    throw DimensionError("true model index out of range");
  }
  if (horizon < 1) throw DimensionError("horizon must be at least 1");
  if (!(decision_threshold > 0.0 && decision_threshold < 1.0)) {
    throw NumericError("decision threshold must lie in (0, 1)");
  }
  if (max_steps < horizon) throw DimensionError("max_steps must be at least the horizon");
  if (x0_mean.size() != ref.nx() || x0_cov.rows() != ref.nx() || x0_cov.cols() != ref.nx()) {
    throw DimensionError("initial state statistics do not match nx");
  }
  if (prior.size() != static_cast<Eigen::Index>(candidates.size())) {
    throw DimensionError("one prior probability per candidate is required");
  }
  if ((prior.array() < 0.0).any() || std::abs(prior.sum() - 1.0) > 1e-9) {
    throw NumericError("prior probabilities must be non-negative and sum to 1");
  }
  if (const auto* b = std::get_if<BallSpec>(&constraints)) {
    if (b->center.size() != ref.nu()) throw DimensionError("ball centre must have n_u entries");
  }
  if (ol_horizon < 1 || ol_starts < 1) throw DimensionError("open-loop horizon and starts must be positive");
  constraint_set(initial_input()).validate();
}

ConstraintSet ExperimentConfig::constraint_set(const Vector& u_prev, int horizon_override) const {
  ConstraintSet cs;
  cs.horizon = horizon_override > 0 ? horizon_override : horizon;
  cs.n_u = n_u();
  if (const auto* p = std::get_if<PolytopeSpec>(&constraints)) {
    cs.region = BoxRatePolytope{p->amp_bound, p->rate_bound, u_prev};
  } else {
    const auto& b = std::get<BallSpec>(constraints);
    cs.region = EnergyBallProduct{b.energy_bound, b.center};
  }
  return cs;
}

Vector ExperimentConfig::initial_input() const {
  if (const auto* b = std::get_if<BallSpec>(&constraints)) return b->center;
  return Vector::Zero(n_u());
}

BeliefState ExperimentConfig::initial_belief() const {
  std::vector<FilterState> filters(candidates.size(), FilterState{x0_mean, x0_cov});
  return BeliefState::from_probabilities(prior, std::move(filters));
}

// ---------------------------------------------------------------------------

namespace {

/// F with F F' = M for a symmetric PSD M: Cholesky when it succeeds, else a
/// spectral square root with negative round-off clipped.
Matrix psd_factor(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Vector standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

}  // namespace

NoiseSampler::NoiseSampler(const NoiseModel& noise)
    : factor_(psd_factor(noise.joint())), ny_(noise.R.rows()), nx_(noise.Q.rows()) {}

std::pair<Vector, Vector> NoiseSampler::draw(Rng& rng) const {
  const Vector e = factor_ * standard_normal(ny_ + nx_, rng);
  return {e.head(ny_), e.tail(nx_)};
}

std::pair<Vector, Vector> simulate_step(const StateSpaceModel& model, const NoiseSampler& sampler, const Vector& x,
                                        const Vector& u, Rng& rng) {
  if (x.size() != model.nx() || u.size() != model.nu()) throw DimensionError("simulate_step: size mismatch");
  const auto [v, w] = sampler.draw(rng);
  Vector y = model.C * x + v;
  Vector x_next = model.A * x + model.B * u + w;
  return {std::move(x_next), std::move(y)};
}

std::pair<Vector, Vector> simulate_step(const StateSpaceModel& model, const NoiseModel& noise, const Vector& x,
                                        const Vector& u, Rng& rng) {
  return simulate_step(model, NoiseSampler(noise), x, u, rng);
}

double TrialRecord::mean_design_ms() const {
  if (steps.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : steps) total += s.design_ms;
  return total / static_cast<double>(steps.size());
}

double TrialRecord::certified_fraction() const {
  int applicable = 0;
  int yes = 0;
  for (const auto& s : steps) {
    if (s.certified == Certificate::not_applicable) continue;
    ++applicable;
    if (s.certified == Certificate::yes) ++yes;
  }
  return applicable == 0 ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(yes) / applicable;
}

OpenLoopPlan plan_open_loop(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<StateSpaceModel> models;
  std::vector<NoiseModel> noises;
  for (const auto& c : cfg.candidates) {
    models.push_back(c.model);
    noises.push_back(c.noise);
  }
  OpenLoopOptions opts;
  opts.horizon = cfg.ol_horizon;
  opts.n_starts = cfg.ol_starts;
  opts.seed = seed;
  return design_ol(models, noises, cfg.initial_belief(), cfg.constraint_set(cfg.initial_input()), opts);
}

TrialRecord run_trial(const ExperimentConfig& cfg, int true_index, std::uint64_t seed, const OpenLoopPlan* plan) {
  cfg.validate();
  const auto nm = static_cast<int>(cfg.candidates.size());
  if (true_index < 0 || true_index >= nm) throw DimensionError("true model index out of range");

  TrialRecord rec;
  rec.method = cfg.method;
  rec.true_model = true_index;
  rec.seed = seed;

  std::vector<LiftedModel> lifts;
  std::vector<std::vector<LiftedModel>> prefix_lifts;
  if (cfg.method == Method::bd || cfg.method == Method::qta || cfg.method == Method::bc) {
    for (const auto& c : cfg.candidates) lifts.push_back(build_lifted(c.model, c.noise, cfg.horizon));
  } else if (cfg.method == Method::sbc) {
    for (int len = 1; len <= cfg.horizon; ++len) {
      std::vector<LiftedModel> group;
      for (const auto& c : cfg.candidates) group.push_back(build_lifted(c.model, c.noise, len));
      prefix_lifts.push_back(std::move(group));
    }
  }

  OpenLoopPlan own_plan;
  if (cfg.method == Method::ol && plan == nullptr) {
    own_plan = plan_open_loop(cfg, substream_seed(seed, {0x0b}));
    plan = &own_plan;
  }

  const Candidate& truth = cfg.candidates[static_cast<std::size_t>(true_index)];
  const NoiseSampler sampler(truth.noise);
  Rng rng(seed);
  Vector x = cfg.x0_mean + psd_factor(cfg.x0_cov) * standard_normal(cfg.x0_mean.size(), rng);

  BeliefState belief = cfg.initial_belief();
  Vector u_prev = cfg.initial_input();

  for (int k = 0;; ++k) {
    if (!rec.decided) {
      if (const auto d = decide(belief, cfg.decision_threshold)) {
        rec.decided = d;
        rec.steps_to_decision = k;
        if (cfg.stop_on_decision) break;
      }
    }
    if (k == cfg.max_steps) {
      if (!rec.decided) rec.steps_to_decision = k;
      break;
    }

    try {
      const ConstraintSet cs = cfg.constraint_set(u_prev);
      DesignOptions opts;
      opts.seed = substream_seed(seed, {static_cast<std::uint64_t>(k), 0x5eed});

      StepRecord step;
      const auto t0 = std::chrono::steady_clock::now();
      DesignResult design;
      switch (cfg.method) {
        case Method::bd:
          design = design_bd(all_pairs(lifts, belief.filters), cs, opts);
          break;
        case Method::qta:
          design = design_qta(all_pairs(lifts, belief.filters), belief, cs, opts);
          break;
        case Method::bc:
          design = design_bc(all_pairs(lifts, belief.filters), belief, cs, opts);
          break;
        case Method::sbc: {
          PrefixPairs groups;
          for (const auto& group : prefix_lifts) groups.push_back(all_pairs(group, belief.filters));
          design = design_sbc(groups, belief, cs, opts);
          break;
        }
        case Method::ol:
          design.first_input = plan->input_at(k, cs);
          break;
        case Method::none:
          design.first_input = cs.rest_point().head(cs.n_u);
          break;
      }
      step.design_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      step.u = design.first_input;
      step.certified = design.certified;

      auto [x_next, y] = simulate_step(truth.model, sampler, x, step.u, rng);
      Vector logliks(nm);
      for (int i = 0; i < nm; ++i) {
        const auto& cand = cfg.candidates[static_cast<std::size_t>(i)];
        const KalmanStep ks = kf_step(belief.filters[static_cast<std::size_t>(i)], cand.model, cand.noise, step.u, y);
        logliks[i] = gaussian_loglik(y, ks.innovation_mean, ks.innovation_cov);
        belief.filters[static_cast<std::size_t>(i)] = ks.next;
      }
      belief = update_beliefs(belief, logliks);

      step.y = std::move(y);
      step.probs = belief.probabilities();
      rec.steps.push_back(std::move(step));
      u_prev = rec.steps.back().u;
      x = std::move(x_next);
    } catch (const std::exception& e) {
      throw NumericError("step " + std::to_string(k) + ": " + e.what());
    }
  }
  rec.final_probs = belief.probabilities();
  return rec;
}

}  // namespace clafd
