#include "rup/ruformer.hpp"

#include "binary_io.hpp"
#include "rup/numeric.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace rup::nn {

namespace {

MatF randomF(std::mt19937_64& rng, int rows, int cols, float stddev) {
  std::normal_distribution<float> dist(0.0f, stddev);
  MatF m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = dist(rng);
  }
  return m;
}

MatD randomD(std::mt19937_64& rng, int rows, int cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = dist(rng);
  }
  return m;
}

LinearF makeLinear(std::mt19937_64& rng, int in, int out, bool zero) {
  LinearF l;
  l.w = zero ? MatF::Zero(in, out) : randomF(rng, in, out, 1.0f / std::sqrt(static_cast<float>(in)));
  l.b = RowF::Zero(out);
  return l;
}

LayerNormF makeNorm(int width) { return {RowF::Ones(width), RowF::Zero(width)}; }

float gelu(float x) {
  constexpr float k = 0.7978845608028654f;  // sqrt(2 / pi)
  return 0.5f * x * (1.0f + std::tanh(k * (x + 0.044715f * x * x * x)));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void addRef(std::vector<TensorRef>& out, std::string name, MatF& m) {
  out.push_back({std::move(name), static_cast<int>(m.rows()), static_cast<int>(m.cols()), m.data(), nullptr});
}
void addRef(std::vector<TensorRef>& out, std::string name, RowF& m) {
  out.push_back({std::move(name), 1, static_cast<int>(m.cols()), m.data(), nullptr});
}
void addRef(std::vector<TensorRef>& out, std::string name, MatD& m) {
  out.push_back({std::move(name), static_cast<int>(m.rows()), static_cast<int>(m.cols()), nullptr, m.data()});
}
void addRef(std::vector<TensorRef>& out, std::string name, RowD& m) {
  out.push_back({std::move(name), 1, static_cast<int>(m.cols()), nullptr, m.data()});
}

uint64_t splitmix(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

// ---------------------------------------------------------------------------

MatF LinearF::forward(const MatF& x) const {
  MatF y = x * w;
  y.rowwise() += b;
  return y;
}

MatF LayerNormF::forward(const MatF& x) const {
  MatF y(x.rows(), x.cols());
  const float n = static_cast<float>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const float mean = x.row(r).sum() / n;
    const float var = (x.row(r).array() - mean).square().sum() / n;
    const float inv = 1.0f / std::sqrt(var + 1e-5f);
    y.row(r) = ((x.row(r).array() - mean) * inv * gamma.array() + beta.array()).matrix();
  }
  return y;
}

AttentionStack::AttentionStack(int tokens, int width, int depth, int heads, int ffMult,
                               uint64_t seed, Init init, int queryChunk)
    : tokens_(tokens), width_(width), heads_(heads), queryChunk_(queryChunk) {
  if (tokens <= 0 || width <= 0 || depth < 0 || heads <= 0 || width % heads != 0) {
    throw InputError("attention stack: width must be a positive multiple of the head count");
  }
  std::mt19937_64 rng(seed);
  const bool identity = init == Init::Identity;
  position_ = identity ? MatF::Zero(tokens, width) : randomF(rng, tokens, width, 0.02f);
  for (int d = 0; d < depth; ++d) {
    AttentionBlock b;
    b.norm1 = makeNorm(width);
    b.qkv = makeLinear(rng, width, 3 * width, false);
    b.out = makeLinear(rng, width, width, identity);
    b.norm2 = makeNorm(width);
    b.ff1 = makeLinear(rng, width, ffMult * width, false);
    b.ff2 = makeLinear(rng, ffMult * width, width, identity);
    blocks_.push_back(std::move(b));
  }
}

void AttentionStack::attend(const MatF& normed, const AttentionBlock& block, MatF& mixed) const {
  const MatF qkv = block.qkv.forward(normed);
  const int dh = width_ / heads_;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  const Eigen::Index t = normed.rows();
  mixed.resize(t, width_);
  MatF scores;
  for (int h = 0; h < heads_; ++h) {
    const auto k = qkv.middleCols(width_ + h * dh, dh);
    const auto v = qkv.middleCols(2 * width_ + h * dh, dh);
    for (Eigen::Index r0 = 0; r0 < t; r0 += queryChunk_) {
      const Eigen::Index len = std::min<Eigen::Index>(queryChunk_, t - r0);
      scores.noalias() = qkv.block(r0, h * dh, len, dh) * k.transpose();
      scores *= scale;
      for (Eigen::Index r = 0; r < len; ++r) {
        auto row = scores.row(r);
        row.array() = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
      }
      mixed.block(r0, h * dh, len, dh).noalias() = scores * v;
    }
  }
}

MatF AttentionStack::forward(const MatF& x) const {
  if (x.rows() != tokens_ || x.cols() != width_) {
    throw InputError("attention stack expects " + std::to_string(tokens_) + "x" +
                     std::to_string(width_) + " tokens, got " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()));
  }
  MatF h = x + position_;
  MatF mixed;
  for (const AttentionBlock& b : blocks_) {
    attend(b.norm1.forward(h), b, mixed);
    h += b.out.forward(mixed);
    MatF hidden = b.ff1.forward(b.norm2.forward(h));
    hidden = hidden.unaryExpr(&gelu);
    h += b.ff2.forward(hidden);
  }
  return h;
}

void AttentionStack::collect(const std::string& prefix, std::vector<TensorRef>& out) {
  addRef(out, prefix + ".position", position_);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    AttentionBlock& b = blocks_[i];
    const std::string p = prefix + ".block" + std::to_string(i);
    addRef(out, p + ".norm1.gamma", b.norm1.gamma);
    addRef(out, p + ".norm1.beta", b.norm1.beta);
    addRef(out, p + ".qkv.w", b.qkv.w);
    addRef(out, p + ".qkv.b", b.qkv.b);
    addRef(out, p + ".out.w", b.out.w);
    addRef(out, p + ".out.b", b.out.b);
    addRef(out, p + ".norm2.gamma", b.norm2.gamma);
    addRef(out, p + ".norm2.beta", b.norm2.beta);
    addRef(out, p + ".ff1.w", b.ff1.w);
    addRef(out, p + ".ff1.b", b.ff1.b);
    addRef(out, p + ".ff2.w", b.ff2.w);
    addRef(out, p + ".ff2.b", b.ff2.b);
  }
}

// ---------------------------------------------------------------------------

MlpHead::MlpHead(int in, int hidden, int out, uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  w1 = randomD(rng, in, hidden, scale / std::sqrt(static_cast<double>(in)));
  b1 = RowD::Zero(hidden);
  w2 = randomD(rng, hidden, out, scale / std::sqrt(static_cast<double>(hidden)));
  b2 = RowD::Zero(out);
}

MatD MlpHead::forward(const MatD& x, Cache* cache) const {
  MatD hidden = x * w1;
  hidden.rowwise() += b1;
  hidden = hidden.array().tanh().matrix();
  MatD out = hidden * w2;
  out.rowwise() += b2;
  if (cache) {
    cache->hidden = std::move(hidden);
  }
  return out;
}

MlpHead::Grad MlpHead::backward(const MatD& x, const Cache& cache, const MatD& dOut,
                                MatD* dx) const {
  Grad g;
  g.w2 = cache.hidden.transpose() * dOut;
  g.b2 = dOut.colwise().sum();
  const MatD dPre =
      ((dOut * w2.transpose()).array() * (1.0 - cache.hidden.array().square())).matrix();
  g.w1 = x.transpose() * dPre;
  g.b1 = dPre.colwise().sum();
  if (dx) {
    *dx = dPre * w1.transpose();
  }
  return g;
}

void MlpHead::zero() {
  w1.setZero();
  b1.setZero();
  w2.setZero();
  b2.setZero();
}

void MlpHead::collect(const std::string& prefix, std::vector<TensorRef>& out) {
  addRef(out, prefix + ".w1", w1);
  addRef(out, prefix + ".b1", b1);
  addRef(out, prefix + ".w2", w2);
  addRef(out, prefix + ".b2", b2);
}

void MlpHead::flatten(const Grad& g, std::vector<double>& out) {
  out.clear();
  auto append = [&](const double* p, Eigen::Index n) { out.insert(out.end(), p, p + n); };
  append(g.w1.data(), g.w1.size());
  append(g.b1.data(), g.b1.size());
  append(g.w2.data(), g.w2.size());
  append(g.b2.data(), g.b2.size());
}

DegreeHead::DegreeHead(int width, int hidden, uint64_t seed) : mlp(width, hidden, 1, seed, 1.0) {}

std::vector<double> DegreeHead::forward(const MatD& tokens) const {
  const MatD z = mlp.forward(tokens);
  std::vector<double> out(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    out[i] = sigmoid(z(i, 0));
  }
  return out;
}

double DegreeHead::lossAndGrad(const MatD& tokens, std::span<const double> targets,
                               std::vector<double>* grad) const {
  if (static_cast<Eigen::Index>(targets.size()) != tokens.rows()) {
    throw InputError("degree head: one target per token expected");
  }
  MlpHead::Cache cache;
  const MatD z = mlp.forward(tokens, &cache);
  std::vector<double> pred(z.rows());
  MatD dz(z.rows(), 1);
  const double n = static_cast<double>(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    pred[i] = sigmoid(z(i, 0));
    const double p = pred[i];
    // d BCE/dp * dp/dz; zero where the clamp is active
    const bool clamped = p <= kDegreeClampEps || p >= 1.0 - kDegreeClampEps;
    dz(i, 0) = clamped ? 0.0 : (p - targets[i]) / n;
  }
  const double loss = lossDegrees(pred, targets);
  if (grad) {
    MlpHead::flatten(mlp.backward(tokens, cache, dz), *grad);
  }
  return loss;
}

TransformHead::TransformHead(int width, int hidden, uint64_t seed)
    : mlp(width, hidden, 6, seed, 0.1) {}

MatD TransformHead::forward(const MatD& tokens) const { return mlp.forward(tokens); }

std::vector<RigidTransform> TransformHead::transforms(const MatD& tokens) const {
  const MatD z = forward(tokens);
  std::vector<RigidTransform> out;
  out.reserve(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    out.emplace_back(Vec3(z(i, 0), z(i, 1), z(i, 2)), Vec3(z(i, 3), z(i, 4), z(i, 5)));
  }
  return out;
}

double TransformHead::lossAndGrad(const MatD& tokens, const MatD& targets,
                                  std::vector<double>* grad) const {
  if (targets.rows() != tokens.rows() || targets.cols() != 6) {
    throw InputError("transform head: targets must be N x 6");
  }
  MlpHead::Cache cache;
  const MatD z = mlp.forward(tokens, &cache);
  const MatD diff = z - targets;
  const double n = static_cast<double>(diff.size());
  std::vector<double> terms(diff.data(), diff.data() + diff.size());
  for (double& t : terms) {
    t *= t;
  }
  const double loss = pairwiseSum(terms) / n;
  if (grad) {
    MlpHead::flatten(mlp.backward(tokens, cache, (2.0 / n) * diff), *grad);
  }
  return loss;
}

MapHead::MapHead(int width, int cells_, uint64_t seed) : cells(cells_) {
  std::mt19937_64 rng(seed);
  w = randomD(rng, width, 2 * cells * cells, 1.0 / std::sqrt(static_cast<double>(width)));
  b = RowD::Zero(2 * cells * cells);
}

namespace {

int cellOf(int v, int u, int height, int width, int cells) {
  const int row = static_cast<int>(static_cast<int64_t>(v) * cells / height);
  const int col = static_cast<int>(static_cast<int64_t>(u) * cells / width);
  return row * cells + col;
}

}  // namespace

ContactMapStack MapHead::forward(const MatD& tokens, const RupStack& handStack,
                                 const RupStack& objectStack) const {
  if (tokens.rows() != kRegionCount || tokens.cols() != w.rows()) {
    throw InputError("map head: token shape mismatch");
  }
  if (handStack.height != objectStack.height || handStack.width != objectStack.width) {
    throw InputError("map head: stack shapes differ");
  }
  MatD logits = tokens * w;
  logits.rowwise() += b;
  ContactMapStack maps(handStack.height, handStack.width, handStack.centers);
  const int c2 = cells * cells;
  for (int ch = 0; ch < kRegionCount; ++ch) {
    for (int v = 0; v < handStack.height; ++v) {
      for (int u = 0; u < handStack.width; ++u) {
        const int cell = cellOf(v, u, handStack.height, handStack.width, cells);
        if (handStack.at(ch, v, u) > 0.0) {
          maps.handMaps.at(ch, v, u) = sigmoid(logits(ch, cell));
        }
        if (objectStack.at(ch, v, u) > 0.0) {
          maps.objectMaps.at(ch, v, u) = sigmoid(logits(ch, c2 + cell));
        }
      }
    }
  }
  return maps;
}

void MapHead::backward(const MatD& tokens, const RupStack& handStack, const RupStack& objectStack,
                       const LossGradient& pixelGrad, std::vector<double>& grad) const {
  MatD logits = tokens * w;
  logits.rowwise() += b;
  const int c2 = cells * cells;
  MatD dProb = MatD::Zero(logits.rows(), logits.cols());
  for (int ch = 0; ch < kRegionCount; ++ch) {
    for (int v = 0; v < handStack.height; ++v) {
      for (int u = 0; u < handStack.width; ++u) {
        const int cell = cellOf(v, u, handStack.height, handStack.width, cells);
        const size_t i = handStack.index(ch, v, u);
        if (handStack.values[i] > 0.0) {
          dProb(ch, cell) += pixelGrad.handMaps[i];
        }
        if (objectStack.values[i] > 0.0) {
          dProb(ch, c2 + cell) += pixelGrad.objectMaps[i];
        }
      }
    }
  }
  const MatD p = logits.unaryExpr(&sigmoid);
  const MatD dLogit = (dProb.array() * p.array() * (1.0 - p.array())).matrix();
  const MatD dw = tokens.transpose() * dLogit;
  const RowD db = dLogit.colwise().sum();
  grad.assign(dw.data(), dw.data() + dw.size());
  grad.insert(grad.end(), db.data(), db.data() + db.size());
}

void MapHead::collect(const std::string& prefix, std::vector<TensorRef>& out) {
  addRef(out, prefix + ".w", w);
  addRef(out, prefix + ".b", b);
}

// ---------------------------------------------------------------------------

MatD syntheticFeatures(uint64_t seed, uint64_t tag, int rows, int cols) {
  MatD m(rows, cols);
  const uint64_t base = splitmix(splitmix(seed) ^ (tag * 0xD1B54A32D192ED03ull));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const uint64_t h = splitmix(base ^ splitmix((static_cast<uint64_t>(r) << 32) | static_cast<uint32_t>(c)));
      m(r, c) = static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    }
  }
  return m;
}

MatD rupPoolFeatures(const RupStack& stack, int rows, int cols) {
  if (rows <= 0 || cols <= 0 || rows > stack.height || cols > stack.width) {
    throw InputError("RUP pooling grid must fit the stack resolution");
  }
  MatD out = MatD::Zero(stack.channels, rows * cols);
  std::vector<int> counts(static_cast<size_t>(rows) * cols);
  for (int ch = 0; ch < stack.channels; ++ch) {
    std::fill(counts.begin(), counts.end(), 0);
    for (int v = 0; v < stack.height; ++v) {
      for (int u = 0; u < stack.width; ++u) {
        const int r = static_cast<int>(static_cast<int64_t>(v) * rows / stack.height);
        const int c = static_cast<int>(static_cast<int64_t>(u) * cols / stack.width);
        out(ch, r * cols + c) += stack.at(ch, v, u);
        ++counts[r * cols + c];
      }
    }
    for (int k = 0; k < rows * cols; ++k) {
      out(ch, k) /= counts[k];
    }
  }
  return out;
}

MatD boneFeatures(const ArticulatedHand& hand) {
  MatD out(kBoneCount, 6);
  for (int b = 0; b < kBoneCount; ++b) {
    const Vec3& r = hand.bones[b].axisAngle();
    const Vec3& t = hand.bones[b].translation();
    out.row(b) << r.x(), r.y(), r.z(), t.x(), t.y(), t.z();
  }
  return out;
}

PointTokens assemblePointTokens(std::span<const Vec3> points, std::span<const uint8_t> contact,
                                std::span<const Vec3> displacement,
                                std::span<const uint8_t> nodeFlag, const Vec3& maskEmbedding) {
  const size_t n = points.size();
  if (contact.size() != n || displacement.size() != n || nodeFlag.size() != n) {
    throw InputError("point tokens: all inputs need one entry per point");
  }
  PointTokens t;
  t.features.resize(static_cast<Eigen::Index>(n), 7);
  t.nodeFlag.assign(nodeFlag.begin(), nodeFlag.end());
  for (size_t i = 0; i < n; ++i) {
    if (nodeFlag[i] > 1) {
      throw InputError("node flag must be 0 or 1");
    }
    const Vec3& d = contact[i] ? displacement[i] : maskEmbedding;
    t.features.row(static_cast<Eigen::Index>(i)) << points[i].x(), points[i].y(), points[i].z(),
        d.x(), d.y(), d.z(), static_cast<double>(nodeFlag[i]);
  }
  return t;
}

// ---------------------------------------------------------------------------

RuFormer::RuFormer(const RuFormerConfig& config) : config_(config) {
  const uint64_t s = config.seed;
  std::mt19937_64 rng(splitmix(s ^ 0x51));
  boneMap_ = randomD(rng, 6, config.boneDim, 1.0 / std::sqrt(6.0));
  encoder_ = AttentionStack(kRegionCount, config.regionWidth(), config.encoderDepth,
                            config.encoderHeads, config.ffMult, splitmix(s ^ 0x52), config.init);
  degreeHead_ = DegreeHead(config.regionWidth(), config.headHidden, splitmix(s ^ 0x53));
  mapHead_ = MapHead(config.regionWidth(), config.mapCells, splitmix(s ^ 0x54));
  pointMap_ = randomD(rng, 7, config.pointWidth, 1.0 / std::sqrt(7.0));
  pointBias_ = RowD::Zero(config.pointWidth);
  std::normal_distribution<double> small(0.0, 0.01);
  mask_ = Vec3(small(rng), small(rng), small(rng));
  decoder_ = AttentionStack(config.pointTokens, config.pointWidth, config.decoderDepth,
                            config.decoderHeads, config.ffMult, splitmix(s ^ 0x55), config.init);
  transformHead_ = TransformHead(config.pointWidth, config.headHidden, splitmix(s ^ 0x56));
}

MatF RuFormer::embedRegional(const RegionInputs& in) const {
  const auto check = [](const MatD& m, int cols, const char* what) {
    if (m.rows() != kRegionCount || m.cols() != cols) {
      throw InputError(std::string("regional embedding: ") + what + " must be 16 x " +
                       std::to_string(cols) + ", got " + std::to_string(m.rows()) + " x " +
                       std::to_string(m.cols()));
    }
  };
  check(in.image, config_.imageDim, "image features");
  check(in.bones, 6, "bone transforms");
  check(in.handRup, config_.handRupDim, "hand-RUP features");
  check(in.objectRup, config_.objectRupDim, "object-RUP features");
  MatD tokens(kRegionCount, config_.regionWidth());
  tokens << in.image, in.bones * boneMap_, in.handRup, in.objectRup;
  return tokens.cast<float>();
}

MatF RuFormer::contactAttention(const MatF& tokens) const { return encoder_.forward(tokens); }

MatF RuFormer::encodePoints(const PointTokens& points) const {
  if (points.features.cols() != 7) {
    throw InputError("point tokens must have 7 features");
  }
  MatD z = points.features * pointMap_;
  z.rowwise() += pointBias_;
  return z.cast<float>();
}

MatF RuFormer::deformationAttention(const MatF& tokens) const { return decoder_.forward(tokens); }

ForwardOutput RuFormer::forward(const RegionInputs& inputs, const PointTokens& points,
                                const RupStack* handStack, const RupStack* objectStack) const {
  ForwardOutput out;
  out.regionTokens = embedRegional(inputs);
  out.contactTokens = contactAttention(out.regionTokens);
  const MatD contact = out.contactTokens.cast<double>();
  const std::vector<double> degrees = degreeHead_.forward(contact);
  std::copy(degrees.begin(), degrees.end(), out.degrees.begin());
  if (handStack && objectStack) {
    out.maps = mapHead_.forward(contact, *handStack, *objectStack);
  }
  out.pointTokens = encodePoints(points);
  out.deformTokens = deformationAttention(out.pointTokens);
  for (size_t i = 0; i < points.size(); ++i) {
    if (points.nodeFlag[i]) {
      out.nodeTokens.push_back(static_cast<int>(i));
    }
  }
  MatD nodeRows(static_cast<Eigen::Index>(out.nodeTokens.size()), config_.pointWidth);
  for (size_t k = 0; k < out.nodeTokens.size(); ++k) {
    nodeRows.row(static_cast<Eigen::Index>(k)) = out.deformTokens.row(out.nodeTokens[k]).cast<double>();
  }
  out.transforms = transformHead_.transforms(nodeRows);
  return out;
}

std::vector<TensorRef> RuFormer::parameters() {
  std::vector<TensorRef> out;
  addRef(out, "bone_map", boneMap_);
  encoder_.collect("encoder", out);
  degreeHead_.mlp.collect("degree_head", out);
  mapHead_.collect("map_head", out);
  addRef(out, "point_map", pointMap_);
  addRef(out, "point_bias", pointBias_);
  out.push_back({"mask_embedding", 1, 3, nullptr, mask_.data()});
  decoder_.collect("decoder", out);
  transformHead_.mlp.collect("transform_head", out);
  return out;
}

// RUFW: "RUFW", u32 version, u32 tensor count, shape table
// (u16 name length, name, u32 rows, u32 cols), then little-endian f32 data.
void RuFormer::save(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  const auto params = parameters();
  out.write("RUFW", 4);
  detail::putLe<uint32_t>(out, 1);
  detail::putLe<uint32_t>(out, static_cast<uint32_t>(params.size()));
  for (const TensorRef& t : params) {
    detail::putLe<uint16_t>(out, static_cast<uint16_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::putLe<uint32_t>(out, static_cast<uint32_t>(t.rows));
    detail::putLe<uint32_t>(out, static_cast<uint32_t>(t.cols));
  }
  for (const TensorRef& t : params) {
    for (size_t i = 0; i < t.size(); ++i) {
      detail::putLe<float>(out, t.f32 ? t.f32[i] : static_cast<float>(t.f64[i]));
    }
  }
}

void RuFormer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "RUFW") {
    throw InputError("not a RUFW checkpoint");
  }
  const char* what = "RUFW checkpoint";
  if (detail::getLe<uint32_t>(in, what) != 1) {
    throw InputError("unsupported RUFW version");
  }
  auto params = parameters();
  if (detail::getLe<uint32_t>(in, what) != params.size()) {
    throw InputError("RUFW tensor count does not match the model configuration");
  }
  for (const TensorRef& t : params) {
    const auto len = detail::getLe<uint16_t>(in, what);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) {
      throw InputError("truncated RUFW shape table");
    }
    const auto rows = detail::getLe<uint32_t>(in, what);
    const auto cols = detail::getLe<uint32_t>(in, what);
    if (name != t.name || rows != static_cast<uint32_t>(t.rows) || cols != static_cast<uint32_t>(t.cols)) {
      throw InputError("RUFW tensor " + name + " does not match model tensor " + t.name);
    }
  }
  for (const TensorRef& t : params) {
    for (size_t i = 0; i < t.size(); ++i) {
      const float v = detail::getLe<float>(in, what);
      if (t.f32) {
        t.f32[i] = v;
      } else {
        t.f64[i] = v;
      }
    }
  }
}

// ---------------------------------------------------------------------------

Adam::Adam(std::vector<TensorRef> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  size_t total = 0;
  for (const TensorRef& t : params_) {
    if (!t.f64) {
      throw InputError("Adam trains double tensors only");
    }
    total += t.size();
  }
  m_.assign(total, 0.0);
  v_.assign(total, 0.0);
}

void Adam::step(std::span<const double> grad) {
  if (grad.size() != m_.size()) {
    throw InputError("Adam: gradient size does not match the parameters");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  size_t k = 0;
  for (TensorRef& t : params_) {
    for (size_t i = 0; i < t.size(); ++i, ++k) {
      m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grad[k];
      v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grad[k] * grad[k];
      t.f64[i] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
    }
  }
}

TrainReport trainDegreeHead(DegreeHead& head, const MatD& embeddings,
                            std::span<const double> targets, int maxSteps, double lr,
                            double targetLoss) {
  std::vector<TensorRef> params;
  head.mlp.collect("degree_head", params);
  Adam adam(params, lr);
  TrainReport report;
  std::vector<double> grad;
  for (int step = 0; step <= maxSteps; ++step) {
    const double loss = head.lossAndGrad(embeddings, targets, &grad);
    report.losses.push_back(loss);
    report.finalLoss = loss;
    if (step == maxSteps || loss < targetLoss) {
      break;
    }
    adam.step(grad);
    report.steps = step + 1;
  }
  return report;
}

GradCheckReport gradCheck(const std::function<double()>& loss, std::span<GradSlot> slots,
                          double step, double tolerance) {
  if (slots.size() > 1000) {
    throw InputError("gradient check is limited to 1000 parameters");
  }
  GradCheckReport report;
  for (GradSlot& s : slots) {
    const double original = *s.value;
    *s.value = original + step;
    const double plus = loss();
    *s.value = original - step;
    const double minus = loss();
    *s.value = original;
    const double numeric = (plus - minus) / (2.0 * step);
    const double scale = std::max({std::abs(numeric), std::abs(s.analytic), 1e-10});
    const double rel = std::abs(numeric - s.analytic) / scale;
    report.maxRelError = std::max(report.maxRelError, rel);
    ++report.checked;
    if (rel > tolerance) {
      report.offenders.push_back({s.name, s.index, s.analytic, numeric, rel});
    }
  }
  return report;
}

std::vector<GradSlot> pickSlots(std::span<const TensorRef> params, std::span<const double> grad,
                                size_t count, uint64_t seed) {
  std::vector<std::pair<size_t, size_t>> all;  // (tensor, index)
  for (size_t t = 0; t < params.size(); ++t) {
    if (!params[t].f64) {
      throw InputError("gradient slots need double tensors");
    }
    for (size_t i = 0; i < params[t].size(); ++i) {
      all.emplace_back(t, i);
    }
  }
  if (grad.size() != all.size()) {
    throw InputError("gradient size does not match the parameters");
  }
  std::vector<size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  count = std::min(count, order.size());
  for (size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<GradSlot> slots;
  for (size_t i = 0; i < count; ++i) {
    const auto [t, idx] = all[order[i]];
    slots.push_back({params[t].name, idx, params[t].f64 + idx, grad[order[i]]});
  }
  return slots;
}

}  // namespace rup::nn
