#pragma once

// Desk-scale RUFormer: region-token encoder and point-token decoder attention
// stacks (float) with small trainable heads (double, hand-written backprop).

#include "rup/contact.hpp"
#include "rup/unwrap.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rup::nn {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowF = Eigen::Matrix<float, 1, Eigen::Dynamic>;
using RowD = Eigen::Matrix<double, 1, Eigen::Dynamic>;

enum class Init {
  Identity,  // residual branches start at zero: every block is the identity map
  Random,
};

/// Named view of a parameter tensor, used by checkpoints, optimizers and gradient checks.
struct TensorRef {
  std::string name;
  int rows = 0;
  int cols = 0;
  float* f32 = nullptr;  // exactly one of f32 / f64 is set
  double* f64 = nullptr;

  size_t size() const { return static_cast<size_t>(rows) * cols; }
};

// ---------------------------------------------------------------------------
// Attention stacks

struct LinearF {
  MatF w;  // in x out
  RowF b;
  MatF forward(const MatF& x) const;
};

struct LayerNormF {
  RowF gamma;
  RowF beta;
  MatF forward(const MatF& x) const;
};

struct AttentionBlock {
  LayerNormF norm1;
  LinearF qkv;  // width -> 3 width
  LinearF out;
  LayerNormF norm2;
  LinearF ff1;
  LinearF ff2;
};

/// Pre-norm transformer blocks over a fixed number of tokens with learned
/// positional embeddings. Output shape equals input shape.
class AttentionStack {
 public:
  AttentionStack() = default;
  AttentionStack(int tokens, int width, int depth, int heads, int ffMult, uint64_t seed, Init init,
                 int queryChunk = 512);

  MatF forward(const MatF& x) const;

  int tokens() const { return tokens_; }
  int width() const { return width_; }
  int depth() const { return static_cast<int>(blocks_.size()); }
  int heads() const { return heads_; }

  void collect(const std::string& prefix, std::vector<TensorRef>& out);

 private:
  void attend(const MatF& normed, const AttentionBlock& block, MatF& mixed) const;

  int tokens_ = 0;
  int width_ = 0;
  int heads_ = 1;
  int queryChunk_ = 512;
  MatF position_;
  std::vector<AttentionBlock> blocks_;
};

// ---------------------------------------------------------------------------
// Heads (double precision, analytic gradients)

/// x -> tanh(x W1 + b1) W2 + b2, row-wise.
struct MlpHead {
  MatD w1;
  RowD b1;
  MatD w2;
  RowD b2;

  struct Cache {
    MatD hidden;
  };
  struct Grad {
    MatD w1;
    RowD b1;
    MatD w2;
    RowD b2;
  };

  MlpHead() = default;
  MlpHead(int in, int hidden, int out, uint64_t seed, double scale);

  MatD forward(const MatD& x, Cache* cache = nullptr) const;
  /// Parameter gradients given dL/d(output); optionally dL/dx.
  Grad backward(const MatD& x, const Cache& cache, const MatD& dOut, MatD* dx = nullptr) const;

  void zero();
  void collect(const std::string& prefix, std::vector<TensorRef>& out);
  static void flatten(const Grad& g, std::vector<double>& out);
};

/// Per-token sigmoid(MLP) in (0, 1).
struct DegreeHead {
  MlpHead mlp;

  DegreeHead() = default;
  DegreeHead(int width, int hidden, uint64_t seed);

  std::vector<double> forward(const MatD& tokens) const;
  /// Mean clamped BCE against `targets` and its gradient (flattened in collect order).
  double lossAndGrad(const MatD& tokens, std::span<const double> targets,
                     std::vector<double>* grad) const;
};

/// Per-token 6-vector: axis-angle (3) then translation (3).
struct TransformHead {
  MlpHead mlp;

  TransformHead() = default;
  TransformHead(int width, int hidden, uint64_t seed);

  MatD forward(const MatD& tokens) const;
  std::vector<RigidTransform> transforms(const MatD& tokens) const;
  /// Mean squared error against N x 6 targets.
  double lossAndGrad(const MatD& tokens, const MatD& targets, std::vector<double>* grad) const;
};

/// Region token -> low-resolution hand and object contact maps (cells x cells each),
/// upsampled to the RUP resolution and masked by the nonzero RUP pixels.
struct MapHead {
  MatD w;  // width x (2 cells^2)
  RowD b;
  int cells = 16;

  MapHead() = default;
  MapHead(int width, int cells, uint64_t seed);

  ContactMapStack forward(const MatD& tokens, const RupStack& handStack,
                          const RupStack& objectStack) const;
  /// Gradient of any map loss through the head, given dL/d(map pixel).
  void backward(const MatD& tokens, const RupStack& handStack, const RupStack& objectStack,
                const LossGradient& pixelGrad, std::vector<double>& grad) const;
  void collect(const std::string& prefix, std::vector<TensorRef>& out);
};

// ---------------------------------------------------------------------------
// Token assembly

/// Per-region inputs from the feature providers; each is 16 rows.
struct RegionInputs {
  MatD image;      // 16 x imageDim
  MatD bones;      // 16 x 6 (axis-angle, translation)
  MatD handRup;    // 16 x handRupDim
  MatD objectRup;  // 16 x objectRupDim
};

/// Deterministic pseudo-random features in [-1, 1], seeded by (seed, tag, row, col).
MatD syntheticFeatures(uint64_t seed, uint64_t tag, int rows, int cols);

/// Average-pools each RUP channel onto a rows x cols grid (rows * cols features per region).
MatD rupPoolFeatures(const RupStack& stack, int rows, int cols);

/// Bone transforms as 16 x 6 rows.
MatD boneFeatures(const ArticulatedHand& hand);

struct PointTokens {
  MatD features;                 // N x 7: point, deformation feature, node flag
  std::vector<uint8_t> nodeFlag;

  size_t size() const { return nodeFlag.size(); }
};

/// Contact points carry their coarse displacement; all other points the mask vector.
PointTokens assemblePointTokens(std::span<const Vec3> points, std::span<const uint8_t> contact,
                                std::span<const Vec3> displacement,
                                std::span<const uint8_t> nodeFlag, const Vec3& maskEmbedding);

// ---------------------------------------------------------------------------
// Model

struct RuFormerConfig {
  int imageDim = 512;
  int boneDim = 64;
  int handRupDim = 96;
  int objectRupDim = 96;
  int encoderDepth = 6;
  int encoderHeads = 8;
  int pointTokens = 8192;
  int pointWidth = 256;
  int decoderDepth = 5;
  int decoderHeads = 4;
  int ffMult = 4;
  int headHidden = 64;
  int mapCells = 16;
  uint64_t seed = 0;
  Init init = Init::Identity;

  int regionWidth() const { return imageDim + boneDim + handRupDim + objectRupDim; }
};

struct ForwardOutput {
  MatF regionTokens;     // F_c, 16 x d_c
  MatF contactTokens;    // F_c+, 16 x d_c
  std::array<double, kRegionCount> degrees{};
  ContactMapStack maps;  // only when stacks were given
  MatF pointTokens;      // encoder map of F_p, N_p x d_d
  MatF deformTokens;     // F_d+, N_p x d_d
  std::vector<int> nodeTokens;
  std::vector<RigidTransform> transforms;  // one per node-flagged token
};

class RuFormer {
 public:
  explicit RuFormer(const RuFormerConfig& config = {});

  const RuFormerConfig& config() const { return config_; }

  /// Per-region concatenation (image, bone map, hand RUP, object RUP).
  MatF embedRegional(const RegionInputs& inputs) const;
  MatF contactAttention(const MatF& tokens) const;
  MatF encodePoints(const PointTokens& points) const;
  MatF deformationAttention(const MatF& tokens) const;

  /// Full pass. Maps are predicted when both stacks are given.
  ForwardOutput forward(const RegionInputs& inputs, const PointTokens& points,
                        const RupStack* handStack = nullptr,
                        const RupStack* objectStack = nullptr) const;

  DegreeHead& degreeHead() { return degreeHead_; }
  TransformHead& transformHead() { return transformHead_; }
  MapHead& mapHead() { return mapHead_; }
  const Vec3& maskEmbedding() const { return mask_; }

  std::vector<TensorRef> parameters();

  void save(const std::filesystem::path& path);
  void load(const std::filesystem::path& path);

 private:
  RuFormerConfig config_;
  MatD boneMap_;  // 6 x boneDim, bias-free
  AttentionStack encoder_;
  DegreeHead degreeHead_;
  MapHead mapHead_;
  MatD pointMap_;  // 7 x pointWidth
  RowD pointBias_;
  Vec3 mask_ = Vec3::Zero();
  AttentionStack decoder_;
  TransformHead transformHead_;
};

// ---------------------------------------------------------------------------
// Training and verification

/// Adam over a set of double tensors.
class Adam {
 public:
  Adam(std::vector<TensorRef> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step(std::span<const double> grad);

 private:
  std::vector<TensorRef> params_;
  std::vector<double> m_;
  std::vector<double> v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  int t_ = 0;
};

struct TrainReport {
  std::vector<double> losses;  // one per step, before the update
  double finalLoss = 0.0;
  int steps = 0;
};

/// Full-batch Adam on the degree head; stops early once the loss is below `targetLoss`.
TrainReport trainDegreeHead(DegreeHead& head, const MatD& embeddings,
                            std::span<const double> targets, int maxSteps, double lr = 1e-2,
                            double targetLoss = 0.0);

struct GradCheckEntry {
  std::string name;
  size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relError = 0.0;
};

struct GradCheckReport {
  double maxRelError = 0.0;
  size_t checked = 0;
  std::vector<GradCheckEntry> offenders;  // relError > tolerance
  bool ok() const { return offenders.empty(); }
};

struct GradSlot {
  std::string name;
  size_t index = 0;
  double* value = nullptr;
  double analytic = 0.0;
};

/// Central differences (step h) against analytic gradients; at most 1000 slots.
GradCheckReport gradCheck(const std::function<double()>& loss, std::span<GradSlot> slots,
                          double step = 1e-5, double tolerance = 1e-3);

/// Picks `count` distinct (tensor, index) slots from double tensors, seeded.
std::vector<GradSlot> pickSlots(std::span<const TensorRef> params, std::span<const double> grad,
                                size_t count, uint64_t seed);

}  // namespace rup::nn
