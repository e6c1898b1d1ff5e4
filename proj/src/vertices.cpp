#include "clafd/input_design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace clafd {

namespace {

constexpr double kFeasTol = 1e-9;

using Key = std::vector<long long>;

Key rounded_key(const std::vector<double>& v) {
  Key k(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) k[i] = std::llround(v[i] * 1e9);
  return k;
}

bool channel_feasible(const std::vector<double>& v, double amp, double rate, double u_prev) {
  double prev = u_prev;
  for (double x : v) {
    if (std::abs(x) > amp + kFeasTol || std::abs(x - prev) > rate + kFeasTol) return false;
    prev = x;
  }
  return true;
}

// A vertex of the chain polytope has `horizon` independent active
// constraints. Box constraints and the rate constraint on the first step tie
// a variable to a constant; the remaining rate constraints link neighbours.
// Independent active sets therefore split the horizon into consecutive
// segments, each fully linked and anchored exactly once.
struct ChainEnumerator {
  double amp;
  double rate;
  double u_prev;
  int horizon;
  std::map<Key, std::vector<double>> found;
  std::vector<double> current;

  void run() {
    current.assign(horizon, 0.0);
    segment_from(0);
  }

  void segment_from(int start) {
    if (start == horizon) {
      if (channel_feasible(current, amp, rate, u_prev)) found.emplace(rounded_key(current), current);
      return;
    }
    for (int end = start; end < horizon; ++end) {
      const int links = end - start;
      for (int anchor = start; anchor <= end; ++anchor) {
        for (double value : {-amp, amp}) fill_segment(start, end, anchor, value, links);
      }
      if (start == 0) {
        for (double value : {u_prev - rate, u_prev + rate}) fill_segment(start, end, 0, value, links);
      }
    }
  }

  void fill_segment(int start, int end, int anchor, double value, int links) {
    for (unsigned mask = 0; mask < (1u << links); ++mask) {
      current[anchor] = value;
      for (int l = anchor + 1; l <= end; ++l) {
        current[l] = current[l - 1] + (((mask >> (l - start - 1)) & 1u) ? rate : -rate);
      }
      for (int l = anchor - 1; l >= start; --l) {
        current[l] = current[l + 1] - (((mask >> (l - start)) & 1u) ? rate : -rate);
      }
      // Prune partial chains that already violate a constraint.
      std::vector<double> prefix(current.begin(), current.begin() + end + 1);
      if (!channel_feasible(prefix, amp, rate, u_prev)) continue;
      segment_from(end + 1);
    }
  }
};

}  // namespace

Matrix enumerate_channel_vertices(double amp_bound, double rate_bound, double u_prev, int horizon) {
  if (horizon < 1) throw DimensionError("horizon must be at least 1");
  if (!(amp_bound > 0.0) || !(rate_bound > 0.0)) throw NumericError("bounds must be positive");
  ChainEnumerator e{amp_bound, rate_bound, u_prev, horizon, {}, {}};
  e.run();
  Matrix out(horizon, static_cast<Eigen::Index>(e.found.size()));
  Eigen::Index col = 0;
  for (const auto& [key, v] : e.found) {
    for (int l = 0; l < horizon; ++l) out(l, col) = v[l];
    ++col;
  }
  return out;
}

Matrix enumerate_vertices(const BoxRatePolytope& poly, int horizon, std::size_t cap) {
  const Eigen::Index nu = poly.u_prev.size();
  if (nu < 1) throw DimensionError("u_prev must have at least one entry");
  std::vector<Matrix> channels;
  std::size_t total = 1;
  for (Eigen::Index ch = 0; ch < nu; ++ch) {
    channels.push_back(enumerate_channel_vertices(poly.amp_bound, poly.rate_bound, poly.u_prev[ch], horizon));
    total *= static_cast<std::size_t>(channels.back().cols());
    if (total > cap) throw NumericError("vertex count exceeds the configured cap");
  }
  if (total == 0) throw NumericError("empty polytope");

  const Eigen::Index m = horizon * nu;
  std::vector<std::vector<double>> verts;
  verts.reserve(total);
  std::vector<Eigen::Index> idx(nu, 0);
  for (std::size_t n = 0; n < total; ++n) {
    std::vector<double> v(m);
    for (int l = 0; l < horizon; ++l) {
      for (Eigen::Index ch = 0; ch < nu; ++ch) v[l * nu + ch] = channels[ch](l, idx[ch]);
    }
    verts.push_back(std::move(v));
    for (Eigen::Index ch = nu - 1; ch >= 0; --ch) {
      if (++idx[ch] < channels[ch].cols()) break;
      idx[ch] = 0;
    }
  }
  std::sort(verts.begin(), verts.end());
  Matrix out(m, static_cast<Eigen::Index>(verts.size()));
  for (std::size_t k = 0; k < verts.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Vector>(verts[k].data(), m);
  }
  return out;
}

}  // namespace clafd
