#pragma once

#include "rup/geometry.hpp"

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace rup {

inline constexpr int kDefaultNodeCount = 64;
inline constexpr int kDefaultNeighbors = 4;

/// Greedy max-min selection starting at `seedIndex`; ties go to the lowest index.
std::vector<int> farthestPointSampling(std::span<const Vec3> points, int count, int seedIndex = 0);

/// k (node, weight) pairs per point, row-major.
struct WeightTable {
  int k = kDefaultNeighbors;
  std::vector<int> nodes;
  std::vector<double> weights;

  size_t pointCount() const { return k > 0 ? nodes.size() / k : 0; }
};

/// w = (1 - |p - g| / d_{k+1})^2 over the k nearest nodes, normalized.
WeightTable computeWeights(std::span<const Vec3> points, std::span<const Vec3> nodes,
                           int k = kDefaultNeighbors);

struct DeformationGraph {
  std::vector<Vec3> nodes;
  std::vector<RigidTransform> transforms;
  std::vector<std::pair<int, int>> edges;  // undirected, first < second
  int k = kDefaultNeighbors;

  size_t size() const { return nodes.size(); }
};

/// Pairs of nodes closer than twice the median nearest-node spacing.
std::vector<std::pair<int, int>> connectNodes(std::span<const Vec3> nodes);

/// FPS nodes over `points`, identity transforms, connected edges.
DeformationGraph buildGraph(std::span<const Vec3> points, int nodeCount = kDefaultNodeCount,
                            int k = kDefaultNeighbors, int seedIndex = 0);

/// p~ = sum_m w_m [R_m (p - g_m) + g_m + t_m].
std::vector<Vec3> applyGraph(const DeformationGraph& graph, const WeightTable& weights,
                             std::span<const Vec3> points);

struct FitOptions {
  double wReg = 10.0;
  // Orthogonality weight. Rotations are axis-angle, so R^T R = I holds exactly
  // and the term is always zero; kept so callers can state the full energy.
  double wRot = 100.0;
  int maxIterations = 50;
  double relativeTolerance = 1e-8;
};

struct FitResult {
  std::vector<RigidTransform> transforms;
  double initialEnergy = 0.0;
  double energy = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> energyTrace;  // one entry per accepted step, starting with the initial energy
};

/// Gauss-Newton with backtracking on axis-angle + translation per node.
/// Starts from graph.transforms. On non-convergence returns the best iterate
/// with converged = false.
FitResult fitGraph(const DeformationGraph& graph, std::span<const Vec3> points,
                   std::span<const Vec3> targets, const FitOptions& options = {});

/// Fit energy for given transforms (data + regularizer).
double fitEnergy(const DeformationGraph& graph, const WeightTable& weights,
                 std::span<const Vec3> points, std::span<const Vec3> targets, double wReg);

std::string graphToJson(const DeformationGraph& graph);
DeformationGraph graphFromJson(const std::string& text);
void saveGraph(const std::filesystem::path& path, const DeformationGraph& graph);
DeformationGraph loadGraph(const std::filesystem::path& path);

}  // namespace rup
