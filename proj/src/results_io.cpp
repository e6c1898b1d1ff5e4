#include "clafd/results_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace clafd {

using nlohmann::json;

namespace {

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(12);
  os << v;
  return os.str();
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument(std::string(what) + ": expected nested arrays");
  const auto rows = j.size();
  const auto cols = j.front().size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw std::invalid_argument(std::string(what) + ": ragged rows");
    }
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string(what) + ": expected an array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

void write_summary_csv(std::ostream& os, std::span<const TrialRecord> records) {
  os << "method,true_model,trial,decided,correct,steps,mean_design_ms,certified_fraction\n";
  for (const auto& r : records) {
    os << to_string(r.method) << ',' << r.true_model << ',' << r.trial_id << ','
       << (r.decided ? std::to_string(*r.decided) : std::string("none")) << ',' << (r.correct() ? 1 : 0) << ','
       << r.steps_to_decision << ',' << number(r.mean_design_ms()) << ',' << number(r.certified_fraction()) << '\n';
  }
}

void write_trace_csv(std::ostream& os, const TrialRecord& record) {
  if (record.steps.empty()) {
    os << "step,certified\n";
    return;
  }
  const auto& first = record.steps.front();
  os << "step";
  for (Eigen::Index i = 0; i < first.u.size(); ++i) os << ",u_" << i;
  for (Eigen::Index i = 0; i < first.y.size(); ++i) os << ",y_" << i;
  for (Eigen::Index i = 0; i < first.probs.size(); ++i) os << ",P_" << i;
  os << ",certified\n";
  for (std::size_t k = 0; k < record.steps.size(); ++k) {
    const auto& s = record.steps[k];
    os << k;
    for (Eigen::Index i = 0; i < s.u.size(); ++i) os << ',' << number(s.u[i]);
    for (Eigen::Index i = 0; i < s.y.size(); ++i) os << ',' << number(s.y[i]);
    for (Eigen::Index i = 0; i < s.probs.size(); ++i) os << ',' << number(s.probs[i]);
    os << ',' << to_string(s.certified) << '\n';
  }
}

void write_sweep_csv(std::ostream& os, std::span<const SweepCell> cells) {
  os << "R,scale,pass\n";
  for (const auto& c : cells) os << number(c.R) << ',' << number(c.scale) << ',' << (c.pass ? 1 : 0) << '\n';
}

void write_methods_csv(std::ostream& os, std::span<const MethodSummary> summaries) {
  os << "method,trials,median_steps,decide_rate,undecided_fraction,accuracy,mean_design_ms,certified_fraction\n";
  for (const auto& s : summaries) {
    os << to_string(s.method) << ',' << s.trials << ',' << number(s.median_steps) << ',' << number(s.decide_rate)
       << ',' << number(s.undecided_fraction) << ',' << number(s.accuracy) << ',' << number(s.mean_design_ms) << ','
       << number(s.certified_fraction) << '\n';
  }
}

ExperimentConfig scenario_from_json(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig cfg;
  cfg.name = j.value("name", std::string("custom"));
  for (const auto& c : j.at("candidates")) {
    Candidate cand;
    cand.model.A = matrix_from_json(c.at("A"), "A");
    cand.model.B = matrix_from_json(c.at("B"), "B");
    cand.model.C = matrix_from_json(c.at("C"), "C");
    cand.noise.Q = matrix_from_json(c.at("Q"), "Q");
    cand.noise.R = matrix_from_json(c.at("R"), "R");
    cand.noise.S = c.contains("S") ? matrix_from_json(c.at("S"), "S")
                                   : Matrix::Zero(cand.model.A.rows(), cand.model.C.rows());
    cfg.candidates.push_back(std::move(cand));
  }
  if (cfg.candidates.empty()) throw std::invalid_argument("scenario has no candidates");
  const auto nm = static_cast<Eigen::Index>(cfg.candidates.size());
  const auto nu = cfg.candidates.front().model.B.cols();

  const json& con = j.at("constraints");
  const std::string type = con.at("type").get<std::string>();
  if (type == "polytope") {
    cfg.constraints = PolytopeSpec{con.at("amp_bound").get<double>(), con.at("rate_bound").get<double>()};
  } else if (type == "ball") {
    BallSpec b{con.at("energy_bound").get<double>(), Vector::Zero(nu)};
    if (con.contains("center")) b.center = vector_from_json(con.at("center"), "center");
    cfg.constraints = std::move(b);
  } else {
    throw std::invalid_argument("constraint type must be 'polytope' or 'ball'");
  }

  cfg.true_model = j.value("true_model", 0);
  cfg.horizon = j.value("horizon", 5);
  cfg.decision_threshold = j.value("decision_threshold", 0.98);
  cfg.max_steps = j.value("max_steps", 400);
  cfg.stop_on_decision = j.value("stop_on_decision", true);
  cfg.x0_mean = vector_from_json(j.at("x0_mean"), "x0_mean");
  cfg.x0_cov = matrix_from_json(j.at("x0_cov"), "x0_cov");
  cfg.prior = j.contains("prior") ? vector_from_json(j.at("prior"), "prior")
                                  : Vector::Constant(nm, 1.0 / static_cast<double>(nm));
  cfg.method = parse_method(j.value("method", std::string("bc")));
  cfg.ol_horizon = j.value("ol_horizon", 200);
  cfg.ol_starts = j.value("ol_starts", 20);
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.validate();
  return cfg;
}

std::string scenario_to_json(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  json cands = json::array();
  for (const auto& c : cfg.candidates) {
    cands.push_back({{"A", matrix_to_json(c.model.A)},
                     {"B", matrix_to_json(c.model.B)},
                     {"C", matrix_to_json(c.model.C)},
                     {"Q", matrix_to_json(c.noise.Q)},
                     {"R", matrix_to_json(c.noise.R)},
                     {"S", matrix_to_json(c.noise.S)}});
  }
  j["candidates"] = std::move(cands);
  if (const auto* p = std::get_if<PolytopeSpec>(&cfg.constraints)) {
    j["constraints"] = {{"type", "polytope"}, {"amp_bound", p->amp_bound}, {"rate_bound", p->rate_bound}};
  } else {
    const auto& b = std::get<BallSpec>(cfg.constraints);
    j["constraints"] = {{"type", "ball"}, {"energy_bound", b.energy_bound}, {"center", vector_to_json(b.center)}};
  }
  j["true_model"] = cfg.true_model;
  j["horizon"] = cfg.horizon;
  j["decision_threshold"] = cfg.decision_threshold;
  j["max_steps"] = cfg.max_steps;
  j["stop_on_decision"] = cfg.stop_on_decision;
  j["x0_mean"] = vector_to_json(cfg.x0_mean);
  j["x0_cov"] = matrix_to_json(cfg.x0_cov);
  j["prior"] = vector_to_json(cfg.prior);
  j["method"] = to_string(cfg.method);
  j["ol_horizon"] = cfg.ol_horizon;
  j["ol_starts"] = cfg.ol_starts;
  j["seed"] = cfg.seed;
  return j.dump(2) + "\n";
}

ExperimentConfig load_scenario(const std::string& name_or_path) {
  for (const auto& n : scenario_names()) {
    if (n == name_or_path) return build_scenario(n);
  }
  std::ifstream in(name_or_path);
  if (!in) throw std::invalid_argument("no scenario named or at '" + name_or_path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

}  // namespace clafd
