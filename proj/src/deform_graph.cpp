#include "rup/deform_graph.hpp"

#include "rup/numeric.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace rup {

std::vector<int> farthestPointSampling(std::span<const Vec3> points, int count, int seedIndex) {
  const int n = static_cast<int>(points.size());
  if (count < 0 || count > n) {
    throw InputError("FPS: requested " + std::to_string(count) + " of " + std::to_string(n) +
                     " points");
  }
  if (count == 0) {
    return {};
  }
  if (seedIndex < 0 || seedIndex >= n) {
    throw InputError("FPS: seed index out of range");
  }
  std::vector<int> picked{seedIndex};
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  taken[seedIndex] = 1;
  int last = seedIndex;
  while (static_cast<int>(picked.size()) < count) {
    int best = -1;
    double bestDist = -1.0;
    for (int i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], (points[i] - points[last]).squaredNorm());
      if (!taken[i] && dist[i] > bestDist) {  // strict: lowest index wins ties
        bestDist = dist[i];
        best = i;
      }
    }
    taken[best] = 1;
    picked.push_back(best);
    last = best;
  }
  return picked;
}

WeightTable computeWeights(std::span<const Vec3> points, std::span<const Vec3> nodes, int k) {
  if (k < 1 || static_cast<int>(nodes.size()) < k + 1) {
    throw InputError("weights need at least k + 1 = " + std::to_string(k + 1) + " nodes");
  }
  WeightTable table;
  table.k = k;
  table.nodes.resize(points.size() * k);
  table.weights.resize(points.size() * k);
  std::vector<std::pair<double, int>> order(nodes.size());
  for (size_t p = 0; p < points.size(); ++p) {
    for (size_t m = 0; m < nodes.size(); ++m) {
      order[m] = {(points[p] - nodes[m]).norm(), static_cast<int>(m)};
    }
    std::partial_sort(order.begin(), order.begin() + k + 1, order.end());
    const double dMax = order[k].first;
    int* idx = &table.nodes[p * k];
    double* w = &table.weights[p * k];
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
      idx[j] = order[j].second;
      const double s = dMax > 0.0 ? 1.0 - order[j].first / dMax : 0.0;
      w[j] = s * s;
      total += w[j];
    }
    if (order[0].first <= 1e-12) {
      // a point sitting on a node follows that node alone
      std::fill(w, w + k, 0.0);
      w[0] = 1.0;
    } else if (total > 0.0) {
      for (int j = 0; j < k; ++j) {
        w[j] /= total;
      }
    } else {
      std::fill(w, w + k, 1.0 / k);
    }
  }
  return table;
}

std::vector<std::pair<int, int>> connectNodes(std::span<const Vec3> nodes) {
  const int n = static_cast<int>(nodes.size());
  if (n < 2) {
    return {};
  }
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a != b) {
        nearest[a] = std::min(nearest[a], (nodes[a] - nodes[b]).norm());
      }
    }
  }
  std::vector<double> sorted = nearest;
  std::sort(sorted.begin(), sorted.end());
  const double median =
      n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if ((nodes[a] - nodes[b]).norm() <= 2.0 * median) {
        edges.emplace_back(a, b);
      }
    }
  }
  return edges;
}

DeformationGraph buildGraph(std::span<const Vec3> points, int nodeCount, int k, int seedIndex) {
  DeformationGraph g;
  g.k = k;
  for (int i : farthestPointSampling(points, nodeCount, seedIndex)) {
    g.nodes.push_back(points[i]);
  }
  g.transforms.assign(g.nodes.size(), RigidTransform::identity());
  g.edges = connectNodes(g.nodes);
  return g;
}

namespace {

Vec3 blend(const DeformationGraph& graph, const WeightTable& weights, size_t p, const Vec3& point,
           std::span<const Mat3> rotations, std::span<const Vec3> translations) {
  Vec3 out = Vec3::Zero();
  for (int j = 0; j < weights.k; ++j) {
    const int m = weights.nodes[p * weights.k + j];
    const Vec3& g = graph.nodes[m];
    out += weights.weights[p * weights.k + j] * (rotations[m] * (point - g) + g + translations[m]);
  }
  return out;
}

void checkWeights(const DeformationGraph& graph, const WeightTable& weights, size_t pointCount) {
  if (weights.pointCount() != pointCount || weights.weights.size() != weights.nodes.size()) {
    throw InputError("weight table does not match the point set");
  }
  for (int m : weights.nodes) {
    if (m < 0 || static_cast<size_t>(m) >= graph.size()) {
      throw InputError("weight table references a missing node");
    }
  }
}

struct State {
  std::vector<Vec3> rot;
  std::vector<Vec3> trans;
  std::vector<Mat3> R;

  void refresh() {
    R.resize(rot.size());
    for (size_t i = 0; i < rot.size(); ++i) {
      R[i] = rotationFromAxisAngle(rot[i]);
    }
  }
};

double energyOf(const DeformationGraph& graph, const WeightTable& weights,
                std::span<const Vec3> points, std::span<const Vec3> targets, double wReg,
                const State& s) {
  std::vector<double> terms;
  terms.reserve(points.size() + 2 * graph.edges.size());
  for (size_t p = 0; p < points.size(); ++p) {
    terms.push_back((blend(graph, weights, p, points[p], s.R, s.trans) - targets[p]).squaredNorm());
  }
  for (const auto& [a, b] : graph.edges) {
    for (const auto& [m, n] : {std::pair{a, b}, std::pair{b, a}}) {
      const Vec3& gm = graph.nodes[m];
      const Vec3& gn = graph.nodes[n];
      const Vec3 r = s.R[m] * (gn - gm) + gm + s.trans[m] - (gn + s.trans[n]);
      terms.push_back(wReg * r.squaredNorm());
    }
  }
  return pairwiseSum(terms);
}

}  // namespace

std::vector<Vec3> applyGraph(const DeformationGraph& graph, const WeightTable& weights,
                             std::span<const Vec3> points) {
  checkWeights(graph, weights, points.size());
  if (graph.transforms.size() != graph.size()) {
    throw InputError("graph needs one transform per node");
  }
  std::vector<Mat3> rotations(graph.size());
  std::vector<Vec3> translations(graph.size());
  for (size_t m = 0; m < graph.size(); ++m) {
    rotations[m] = graph.transforms[m].rotation();
    translations[m] = graph.transforms[m].translation();
  }
  std::vector<Vec3> out(points.size());
  for (size_t p = 0; p < points.size(); ++p) {
    out[p] = blend(graph, weights, p, points[p], rotations, translations);
  }
  return out;
}

double fitEnergy(const DeformationGraph& graph, const WeightTable& weights,
                 std::span<const Vec3> points, std::span<const Vec3> targets, double wReg) {
  checkWeights(graph, weights, points.size());
  State s;
  for (const RigidTransform& t : graph.transforms) {
    s.rot.push_back(t.axisAngle());
    s.trans.push_back(t.translation());
  }
  s.refresh();
  return energyOf(graph, weights, points, targets, wReg, s);
}

FitResult fitGraph(const DeformationGraph& graph, std::span<const Vec3> points,
                   std::span<const Vec3> targets, const FitOptions& options) {
  if (points.empty() || points.size() != targets.size()) {
    throw InputError("fit needs at least one constraint and one target per point");
  }
  if (graph.transforms.size() != graph.size()) {
    throw InputError("graph needs one transform per node");
  }
  const WeightTable weights = computeWeights(points, graph.nodes, graph.k);
  const int n = static_cast<int>(graph.size());
  const int dim = 6 * n;
  const double sqrtReg = std::sqrt(options.wReg);

  State s;
  for (const RigidTransform& t : graph.transforms) {
    s.rot.push_back(t.axisAngle());
    s.trans.push_back(t.translation());
  }
  s.refresh();

  FitResult result;
  double energy = energyOf(graph, weights, points, targets, options.wReg, s);
  result.initialEnergy = energy;
  result.energyTrace.push_back(energy);

  Eigen::MatrixXd jtj(dim, dim);
  Eigen::VectorXd jtr(dim);
  for (int iter = 0; iter < options.maxIterations && energy > 0.0; ++iter) {
    jtj.setZero();
    jtr.setZero();
    // data term: each constraint touches k nodes
    Eigen::Matrix<double, 3, Eigen::Dynamic> J(3, 6 * weights.k);
    std::vector<int> cols(6 * weights.k);
    for (size_t p = 0; p < points.size(); ++p) {
      const Vec3 r = blend(graph, weights, p, points[p], s.R, s.trans) - targets[p];
      for (int j = 0; j < weights.k; ++j) {
        const int m = weights.nodes[p * weights.k + j];
        const double w = weights.weights[p * weights.k + j];
        J.block<3, 3>(0, 6 * j) = w * rotateJacobian(s.rot[m], points[p] - graph.nodes[m]);
        J.block<3, 3>(0, 6 * j + 3) = w * Mat3::Identity();
        for (int c = 0; c < 6; ++c) {
          cols[6 * j + c] = 6 * m + c;
        }
      }
      const Eigen::MatrixXd local = J.transpose() * J;
      const Eigen::VectorXd localR = J.transpose() * r;
      for (int a = 0; a < 6 * weights.k; ++a) {
        jtr[cols[a]] += localR[a];
        for (int b = 0; b < 6 * weights.k; ++b) {
          jtj(cols[a], cols[b]) += local(a, b);
        }
      }
    }
    // regularizer: both directions of every edge
    for (const auto& [a, b] : graph.edges) {
      for (const auto& [m, nn] : {std::pair{a, b}, std::pair{b, a}}) {
        const Vec3& gm = graph.nodes[m];
        const Vec3& gn = graph.nodes[nn];
        const Vec3 r = sqrtReg * (s.R[m] * (gn - gm) + gm + s.trans[m] - (gn + s.trans[nn]));
        Eigen::Matrix<double, 3, 9> Je;
        Je.block<3, 3>(0, 0) = sqrtReg * rotateJacobian(s.rot[m], gn - gm);
        Je.block<3, 3>(0, 3) = sqrtReg * Mat3::Identity();
        Je.block<3, 3>(0, 6) = -sqrtReg * Mat3::Identity();
        const int ec[9] = {6 * m, 6 * m + 1, 6 * m + 2, 6 * m + 3, 6 * m + 4, 6 * m + 5,
                           6 * nn + 3, 6 * nn + 4, 6 * nn + 5};
        const Eigen::Matrix<double, 9, 9> local = Je.transpose() * Je;
        const Eigen::Matrix<double, 9, 1> localR = Je.transpose() * r;
        for (int x = 0; x < 9; ++x) {
          jtr[ec[x]] += localR[x];
          for (int y = 0; y < 9; ++y) {
            jtj(ec[x], ec[y]) += local(x, y);
          }
        }
      }
    }
    // tiny damping keeps unconstrained directions (isolated nodes) solvable
    const double damping = 1e-12 * std::max(1.0, jtj.diagonal().maxCoeff());
    jtj.diagonal().array() += damping;
    const Eigen::VectorXd delta = jtj.ldlt().solve(-jtr);
    if (!delta.allFinite()) {
      break;
    }

    bool accepted = false;
    double alpha = 1.0;
    State trial = s;
    for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
      for (int m = 0; m < n; ++m) {
        trial.rot[m] = s.rot[m] + alpha * delta.segment<3>(6 * m);
        trial.trans[m] = s.trans[m] + alpha * delta.segment<3>(6 * m + 3);
      }
      trial.refresh();
      const double e = energyOf(graph, weights, points, targets, options.wReg, trial);
      if (e < energy) {
        const double drop = (energy - e) / energy;
        s = trial;
        energy = e;
        accepted = true;
        result.energyTrace.push_back(e);
        result.iterations = iter + 1;
        if (drop < options.relativeTolerance) {
          result.converged = true;
        }
        break;
      }
    }
    if (!accepted) {
      // no descent along the Gauss-Newton direction: stationary to working precision
      result.converged = true;
    }
    if (result.converged) {
      break;
    }
  }
  if (energy == 0.0) {
    result.converged = true;
  }
  result.energy = energy;
  result.transforms.reserve(n);
  for (int m = 0; m < n; ++m) {
    result.transforms.emplace_back(s.rot[m], s.trans[m]);
  }
  return result;
}

// ---------------------------------------------------------------------------

using nlohmann::json;

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vecFrom(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw InputError("expected a 3-vector");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

std::string graphToJson(const DeformationGraph& graph) {
  json j;
  j["format"] = "rup-deformation-graph";
  j["version"] = 1;
  j["units"] = "meters";
  j["k"] = graph.k;
  j["node_count"] = graph.size();
  j["nodes"] = json::array();
  for (const Vec3& g : graph.nodes) {
    j["nodes"].push_back(vec(g));
  }
  j["edges"] = json::array();
  for (const auto& [a, b] : graph.edges) {
    j["edges"].push_back({a, b});
  }
  j["transforms"] = json::array();
  for (const RigidTransform& t : graph.transforms) {
    j["transforms"].push_back({{"axis_angle", vec(t.axisAngle())}, {"translation", vec(t.translation())}});
  }
  return j.dump(2);
}

DeformationGraph graphFromJson(const std::string& text) {
  DeformationGraph g;
  try {
    const json j = json::parse(text);
    g.k = j.at("k").get<int>();
    for (const json& n : j.at("nodes")) {
      g.nodes.push_back(vecFrom(n));
    }
    for (const json& e : j.at("edges")) {
      g.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    }
    for (const json& t : j.at("transforms")) {
      g.transforms.emplace_back(vecFrom(t.at("axis_angle")), vecFrom(t.at("translation")));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("bad graph JSON: ") + e.what());
  }
  if (g.transforms.size() != g.nodes.size()) {
    throw InputError("graph JSON needs one transform per node");
  }
  for (const auto& [a, b] : g.edges) {
    if (a < 0 || b < 0 || static_cast<size_t>(std::max(a, b)) >= g.size()) {
      throw InputError("graph edge references a missing node");
    }
  }
  return g;
}

void saveGraph(const std::filesystem::path& path, const DeformationGraph& graph) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  out << graphToJson(graph) << '\n';
}

DeformationGraph loadGraph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return graphFromJson(ss.str());
}

}  // namespace rup
