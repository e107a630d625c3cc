// Acceptance criteria 1-10. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include "oracles.hpp"
#include "pipeline.hpp"

#include "rup/contact.hpp"
#include "rup/deform_graph.hpp"
#include "rup/metrics.hpp"
#include "rup/refine.hpp"
#include "rup/ruformer.hpp"
#include "rup/shapes.hpp"
#include "rup/synth.hpp"
#include "rup/unwrap.hpp"

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>

using namespace rup;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects failed conditions; the first few are reported.
struct Verdict {
  bool ok = true;
  int failures = 0;
  std::string why;
  std::ostringstream info;

  void require(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (failures++ < 4) why += (why.empty() ? "" : "; ") + what;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Vec3 randomUnit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

TriangleMesh triangleSoup(int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> verts;
  std::vector<Face> faces;
  while (static_cast<int>(faces.size()) < count) {
    const Vec3 c(u(rng), u(rng), u(rng));
    const Vec3 a = c + 0.1 * Vec3(u(rng), u(rng), u(rng));
    const Vec3 b = c + 0.1 * Vec3(u(rng), u(rng), u(rng));
    const Vec3 d = c + 0.1 * Vec3(u(rng), u(rng), u(rng));
    if ((b - a).cross(d - a).norm() < 1e-6) continue;
    const int base = static_cast<int>(verts.size());
    verts.insert(verts.end(), {a, b, d});
    faces.push_back({base, base + 1, base + 2});
  }
  return TriangleMesh(std::move(verts), std::move(faces));
}

std::vector<Scene> fiveScenes() {
  std::vector<Scene> out;
  SynthParams p;
  out.push_back(synthesize(p));
  p.seed = 1;
  p.degree = 0.2;
  out.push_back(synthesize(p));
  p = {};
  p.kind = SceneKind::PinchCapsule;
  p.seed = 2;
  out.push_back(synthesize(p));
  p = {};
  p.kind = SceneKind::PressPlane;
  p.seed = 3;
  out.push_back(synthesize(p));
  p = {};
  p.penetrationMm = 8.0;
  p.seed = 4;
  out.push_back(synthesize(p));
  return out;
}

// ---------------------------------------------------------------------------

Verdict criterion1() {
  Verdict v;
  std::mt19937_64 rng(101);
  const TriangleMesh meshes[] = {shapes::icosphere(1.0, 4), proceduralHand({}).surface,
                                 triangleSoup(10000, rng)};
  const auto t0 = Clock::now();
  int hits = 0;
  for (const TriangleMesh& mesh : meshes) {
    v.require(mesh.faceCount() <= 10000, "mesh above 1e4 triangles");
    const MeshIndex index(mesh);
    const auto box = mesh.bounds();
    std::uniform_real_distribution<double> ux(box.min().x(), box.max().x());
    std::uniform_real_distribution<double> uy(box.min().y(), box.max().y());
    std::uniform_real_distribution<double> uz(box.min().z(), box.max().z());
    for (int i = 0; i < 1000; ++i) {
      const Vec3 o(ux(rng), uy(rng), uz(rng));
      const Vec3 d = randomUnit(rng);
      const auto fast = index.castAll(o, d);
      const auto lib = rayCastBruteForce(mesh, o, d);
      const auto ref = oracle::bruteHits(mesh, o, d);
      hits += static_cast<int>(fast.size());
      bool same = fast.size() == lib.size() && fast.size() == ref.size();
      for (size_t k = 0; same && k < fast.size(); ++k) {
        same = fast[k].face == lib[k].face && fast[k].face == ref[k].second &&
               std::abs(fast[k].t - lib[k].t) <= 1e-9 && std::abs(fast[k].t - ref[k].first) <= 1e-9;
      }
      v.require(same, "hit sets differ");
    }
  }
  const double s = since(t0);
  v.require(s < 10.0, "runtime " + fmt("%.2f s", s));
  v.require(hits > 1000, "too few hits to be meaningful");
  v.info << "3000 rays over 5120/9600/10000 triangles, " << hits << " hits, " << fmt("%.2f s", s);
  return v;
}

Verdict criterion2(const std::vector<Scene>& scenes) {
  Verdict v;
  double worstDist = 0.0;
  double worstCol = 0.0;
  double slowest = 0.0;
  for (const Scene& scene : scenes) {
    const ArticulatedHand hand = scene.hand();
    const TriangleMesh object = scene.placedObject();
    const auto t0 = Clock::now();
    const UnwrapResult r = unwrapAll(hand, object, 64, 64);
    slowest = std::max(slowest, since(t0));

    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> spot(0, 199);
    for (const auto& [stack, mesh] : {std::pair{&r.hand, &hand.surface}, std::pair{&r.objectNear, &object},
                                      std::pair{&r.objectFar, &object}}) {
      for (size_t i = 0; i < stack->values.size(); ++i) {
        if (stack->values[i] <= 0.0) continue;
        const int c = static_cast<int>(i / stack->pixelsPerChannel());
        const int rem = static_cast<int>(i % stack->pixelsPerChannel());
        const Vec3 p = backProjectPixel(*stack, c, rem / stack->width, rem % stack->width);
        const Face& f = mesh->faces()[stack->hits[i].face];
        const double d = oracle::triangleDistance(p, mesh->vertex(f[0]), mesh->vertex(f[1]), mesh->vertex(f[2]));
        worstDist = std::max(worstDist, d);
        if (spot(rng) == 0) {
          worstDist = std::max(worstDist, oracle::bruteDistance(*mesh, p));
        }
      }
    }
    for (int c = 0; c < kRegionCount; ++c) {
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
          const double rn = r.objectNear.at(c, y, x);
          const double rf = r.objectFar.at(c, y, x);
          if (rn > 0.0 && rf > 0.0) {
            v.require(rf >= rn, "object-far closer than object-near");
          }
          if (rn > 0.0 && r.hand.at(c, y, x) > 0.0) {
            const Vec3 o = r.hand.centers[c];
            const Vec3 a = (backProjectPixel(r.hand, c, y, x) - o).normalized();
            const Vec3 b = (backProjectPixel(r.objectNear, c, y, x) - o).normalized();
            const Vec3 e = (backProjectPixel(r.objectFar, c, y, x) - o).normalized();
            worstCol = std::max({worstCol, a.cross(b).norm(), b.cross(e).norm()});
          }
        }
      }
    }
  }
  v.require(worstDist <= 1e-4, "round trip distance " + fmt("%.3g m", worstDist));
  v.require(worstCol <= 1e-6, "collinearity " + fmt("%.3g", worstCol));
  v.require(slowest < 5.0, "unwrap took " + fmt("%.2f s", slowest));
  v.info << "5 scenes, max surface distance " << fmt("%.2e m", worstDist) << ", collinearity "
         << fmt("%.2e", worstCol) << ", slowest unwrap " << fmt("%.2f s", slowest);
  return v;
}

Verdict criterion3(const std::vector<Scene>& scenes) {
  Verdict v;
  const size_t expected = (64 / 4) * (64 / 4) * 32;
  for (const Scene& scene : scenes) {
    const UnwrapResult r = unwrapAll(scene.hand(), scene.placedObject());
    const SampledPointSet s = gridSample(r.objectNear, r.objectFar, kDefaultGrid);
    v.require(s.size() == expected, "scene sample count " + std::to_string(s.size()));
    v.require(s.validCount() > 0, "scene without valid samples");
  }
  const UnwrapResult empty = unwrapAll(scenes.front().hand(), TriangleMesh{});
  const Vec3 mask(0.25, -0.5, 0.125);
  const SampledPointSet s = gridSample(empty.objectNear, empty.objectFar, kDefaultGrid, mask);
  v.require(s.size() == expected, "empty sample count " + std::to_string(s.size()));
  v.require(s.validCount() == 0, "valid samples on empty stacks");
  for (const Vec3& p : s.points) {
    v.require(p == mask, "empty stack sample is not the mask point");
  }
  v.info << expected << " points on 5 scenes and on all-zero stacks";
  return v;
}

Verdict criterion4() {
  Verdict v;
  double worst = 0.0;
  for (const double r : {0.03, 0.05}) {
    for (const double delta : {0.002, 0.005}) {
      const TriangleMesh sphere = shapes::icosphere(r, 4);
      const MeshIndex tmpl(sphere);
      std::vector<Vec3> moved = sphere.vertices();
      for (size_t i = 0; i < moved.size(); ++i) {
        if (moved[i].z() > r * std::cos(35.0 * kPi / 180.0)) moved[i] -= delta * sphere.normals()[i];
      }
      std::array<Vec3, kRegionCount> centers;
      centers.fill(Vec3(0, 0, 1.8 * r));
      RupStack stack(RupRole::ObjectNear, 64, 64, centers);
      stack.setChannel(3, unwrapRegion(tmpl, centers[3], UnwrapMode::Closest, 64, 64));
      RupStack maps(RupRole::ObjectContact, 64, 64, centers);
      for (size_t i = stack.index(3, 0, 0); i < stack.index(4, 0, 0); ++i) {
        const RayHit& h = stack.hits[i];
        if (stack.values[i] > 0.0 &&
            sphere.pointOnFace(h.face, h.u, h.v).z() > r * std::cos(25.0 * kPi / 180.0)) {
          maps.values[i] = 1.0;
        }
      }
      const std::vector<double> px = pixelDegrees(stack, tmpl, sphere.withVertices(moved));
      for (double d : px) v.require(d >= 0.0 && d <= 1.0, "degree outside [0, 1]");
      const double measured = regionDegreeGt(maps, px)[3];
      worst = std::max(worst, std::abs(measured - delta / (2 * r)));
      for (double d : pixelDegrees(stack, tmpl, sphere)) v.require(d == 0.0, "rigid degree nonzero");
    }
  }
  v.require(worst <= 1e-3, "degree error " + fmt("%.2e", worst));

  // pushes beyond the opposite wall clamp to 1
  const TriangleMesh sphere = shapes::icosphere(0.04, 3);
  const MeshIndex tmpl(sphere);
  const Vec3 p = sphere.vertex(0);
  const MaxDeformation d = maxDeformation(tmpl, p, sphere.normals()[0]);
  v.require(deformedDegree(p, p - 3.0 * d.distance * sphere.normals()[0], d.distance) == 1.0,
            "overshoot not clamped");

  // rigid synthetic scene: every region degree is zero
  const Scene rigid = synthesize({});
  const cli::ContactStage c = cli::contactStage(rigid, cli::unwrapScene(rigid, 64), kDefaultContactThreshold);
  for (double x : c.maps.degrees) v.require(x == 0.0, "rigid scene region degree nonzero");
  v.info << "max |D - delta/2r| " << fmt("%.2e", worst) << " over r in {30, 50} mm, delta in {2, 5} mm";
  return v;
}

Verdict criterion5() {
  Verdict v;
  const TriangleMesh sphere = shapes::uvSphere(0.05, 38, 54);
  v.require(sphere.vertexCount() == 2000, "sphere is not 2000 vertices");
  const auto& pts = sphere.vertices();
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  DeformationGraph g = buildGraph(pts, kDefaultNodeCount);
  const WeightTable w = computeWeights(pts, g.nodes, g.k);
  double sumErr = 0.0;
  for (size_t i = 0; i < w.pointCount(); ++i) {
    double s = 0.0;
    for (int j = 0; j < w.k; ++j) s += w.weights[i * w.k + j];
    sumErr = std::max(sumErr, std::abs(s - 1.0));
  }
  v.require(sumErr <= 1e-9, "weights sum error " + fmt("%.2e", sumErr));

  double idErr = 0.0;
  const auto same = applyGraph(g, w, pts);
  for (size_t i = 0; i < pts.size(); ++i) idErr = std::max(idErr, (same[i] - pts[i]).norm());
  v.require(idErr <= 1e-12, "identity moved points by " + fmt("%.2e", idErr));

  const Vec3 tau(0.0123, -0.0456, 0.0789);
  DeformationGraph shifted = g;
  for (auto& t : shifted.transforms) t = RigidTransform(Vec3::Zero(), tau);
  double trErr = 0.0;
  const auto moved = applyGraph(shifted, w, pts);
  for (size_t i = 0; i < pts.size(); ++i) trErr = std::max(trErr, (moved[i] - pts[i] - tau).norm());
  v.require(trErr <= 1e-15, "translation error " + fmt("%.2e", trErr));

  // 5 mm inward dent: cos^2 degree falloff over a 60 degree cap, coarse deformation targets
  const MeshIndex index(sphere);
  const double cap = 60.0 * kPi / 180.0;
  std::vector<double> degrees(pts.size(), 0.0);
  for (size_t i = 0; i < pts.size(); ++i) {
    const double a = std::acos(std::clamp(pts[i].normalized().z(), -1.0, 1.0));
    if (a < cap) {
      const double c = std::cos(0.5 * kPi * a / cap);
      degrees[i] = 0.05 * c * c;
    }
  }
  const auto targets = coarseDeformVertices(index, degrees).vertices();
  const auto t0 = Clock::now();
  const FitResult fit = fitGraph(g, pts, targets);
  const double s = since(t0);
  g.transforms = fit.transforms;
  const auto out = applyGraph(g, w, pts);
  double sq = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) sq += (out[i] - targets[i]).squaredNorm();
  const double rmsMm = 1000.0 * std::sqrt(sq / pts.size());
  v.require(rmsMm <= 0.1, "fit RMS " + fmt("%.3f mm", rmsMm) + " on the 5 mm dent");
  v.require(s < 30.0, "fit took " + fmt("%.1f s", s));
  v.info << "identity " << fmt("%.1e", idErr) << ", weight sums " << fmt("%.1e", sumErr)
         << ", translation " << fmt("%.1e", trErr) << ", dent fit RMS " << fmt("%.3f mm", rmsMm)
         << " in " << fmt("%.2f s", s);
  return v;
}

Verdict criterion6() {
  Verdict v;
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::array<Vec3, kRegionCount> centers;
  centers.fill(Vec3::Zero());
  auto randomMaps = [&](bool binary) {
    ContactMapStack m(16, 16, centers);
    for (double& x : m.handMaps.values) x = binary ? std::round(u(rng)) : u(rng);
    for (double& x : m.objectMaps.values) x = binary ? std::round(u(rng)) : u(rng);
    for (double& d : m.degrees) d = binary ? std::round(u(rng)) : 0.05 + 0.9 * u(rng);
    return m;
  };
  const ContactMapStack gt = randomMaps(true);
  v.require(lossContactMaps(gt, gt) == 0.0, "L_M(gt, gt) != 0");
  for (int trial = 0; trial < 20; ++trial) {
    ContactMapStack p = gt;
    std::vector<double>& vals = trial % 2 ? p.handMaps.values : p.objectMaps.values;
    vals[rng() % vals.size()] += 1e-6;
    v.require(lossContactMaps(p, gt) > 0.0, "L_M zero for pred != gt");
  }

  std::array<double, kRegionCount> half;
  std::array<double, kRegionCount> ones;
  half.fill(0.5);
  ones.fill(1.0);
  const double bce = lossDegrees(half, ones);
  v.require(std::abs(bce - std::numbers::ln2) <= 1e-9, "BCE " + fmt("%.12f", bce));

  const ContactMapStack pred = randomMaps(false);
  LossGradient grad;
  contactLoss(pred, gt, kDefaultLambda1, &grad);
  const size_t n = pred.handMaps.values.size();
  std::uniform_int_distribution<size_t> pick(0, 2 * n + kRegionCount - 1);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    // every degree coordinate is included once, the rest are random pixels
    const size_t k = trial < kRegionCount ? 2 * n + trial : pick(rng);
    ContactMapStack plus = pred;
    ContactMapStack minus = pred;
    double analytic;
    if (k < n) {
      plus.handMaps.values[k] += h;
      minus.handMaps.values[k] -= h;
      analytic = grad.handMaps[k];
    } else if (k < 2 * n) {
      plus.objectMaps.values[k - n] += h;
      minus.objectMaps.values[k - n] -= h;
      analytic = grad.objectMaps[k - n];
    } else {
      plus.degrees[k - 2 * n] += h;
      minus.degrees[k - 2 * n] -= h;
      analytic = grad.degrees[k - 2 * n];
    }
    const double numeric = (contactLoss(plus, gt).total - contactLoss(minus, gt).total) / (2 * h);
    worst = std::max(worst, std::abs(analytic - numeric) /
                                std::max({std::abs(analytic), std::abs(numeric), 1e-10}));
  }
  v.require(worst <= 1e-4, "gradient relative error " + fmt("%.2e", worst));
  v.info << "BCE(0.5, 1) - ln 2 = " << fmt("%.1e", bce - std::numbers::ln2)
         << ", worst gradient relative error over 500 coordinates " << fmt("%.2e", worst);
  return v;
}

Verdict criterion7() {
  Verdict v;
  using namespace nn;
  RuFormerConfig cfg;  // 16 x 768 encoder, 8192 x 256 decoder
  cfg.seed = 77;
  const int np = cfg.pointTokens;
  const RegionInputs inputs{syntheticFeatures(1, 1, kRegionCount, cfg.imageDim),
                            0.1 * syntheticFeatures(1, 2, kRegionCount, 6),
                            syntheticFeatures(1, 3, kRegionCount, cfg.handRupDim),
                            syntheticFeatures(1, 4, kRegionCount, cfg.objectRupDim)};
  const MatD raw = syntheticFeatures(2, 9, np, 6);
  std::vector<Vec3> pts(np), disp(np);
  std::vector<uint8_t> contact(np), node(np);
  for (int i = 0; i < np; ++i) {
    pts[i] = 0.05 * Vec3(raw(i, 0), raw(i, 1), raw(i, 2));
    disp[i] = 0.005 * Vec3(raw(i, 3), raw(i, 4), raw(i, 5));
    contact[i] = i % 5 == 0;
    node[i] = i % 128 == 0;
  }
  const PointTokens tokens = assemblePointTokens(pts, contact, disp, node, Vec3(1e-3, 2e-3, 3e-3));

  cfg.init = Init::Random;
  const RuFormer random(cfg);
  const auto t0 = Clock::now();
  const ForwardOutput a = random.forward(inputs, tokens);
  const double s = since(t0);
  const ForwardOutput b = random.forward(inputs, tokens);
  v.require(a.contactTokens.rows() == 16 && a.contactTokens.cols() == 768, "encoder shape");
  v.require(a.deformTokens.rows() == np && a.deformTokens.cols() == 256, "decoder shape");
  v.require(a.contactTokens == b.contactTokens && a.deformTokens == b.deformTokens &&
                a.degrees == b.degrees,
            "repeated forward differs");
  bool sameTransforms = a.transforms.size() == b.transforms.size();
  for (size_t i = 0; sameTransforms && i < a.transforms.size(); ++i) {
    sameTransforms = a.transforms[i].axisAngle() == b.transforms[i].axisAngle() &&
                     a.transforms[i].translation() == b.transforms[i].translation();
  }
  v.require(sameTransforms, "repeated transforms differ");
  v.require((a.contactTokens - a.regionTokens).norm() > 0.0f, "random encoder is the identity");

  cfg.init = Init::Identity;
  const RuFormer identity(cfg);
  const MatF regional = identity.embedRegional(inputs);
  v.require(identity.contactAttention(regional) == regional, "identity encoder changed tokens");
  const MatF encoded = identity.encodePoints(tokens);
  v.require(identity.deformationAttention(encoded) == encoded, "identity decoder changed tokens");

  const MatD emb = syntheticFeatures(11, 5, 32, 768);
  std::vector<double> targets(32);
  for (int i = 0; i < 32; ++i) targets[i] = (i * 7) % 5 < 2 ? 1.0 : 0.0;
  DegreeHead h1(768, 64, 3);
  DegreeHead h2(768, 64, 3);
  const TrainReport r1 = trainDegreeHead(h1, emb, targets, 2000, 1e-2, 0.05);
  const TrainReport r2 = trainDegreeHead(h2, emb, targets, 2000, 1e-2, 0.05);
  v.require(r1.finalLoss < 0.05 && r1.steps <= 2000, "overfit BCE " + fmt("%.3f", r1.finalLoss));
  v.require(r1.losses.front() > 0.5, "untrained BCE already low");
  v.require(r1.losses == r2.losses && h1.mlp.w1 == h2.mlp.w1, "training not bitwise repeatable");
  v.info << "shapes 16x768 / " << np << "x256, forward " << fmt("%.1f s", s) << ", degree head BCE "
         << fmt("%.3f", r1.losses.front()) << " -> " << fmt("%.4f", r1.finalLoss) << " after " << r1.steps << " steps";
  return v;
}

Verdict criterion8() {
  Verdict v;
  auto problemFor = [](const Scene& s, const TriangleMesh& object) {
    RefinementProblem p{s.rig(), s.pose, object, {}, {}, {}};
    for (uint8_t x : s.truth->handContact) p.handTargets.push_back(x);
    for (uint8_t x : s.truth->objectContact) p.objectTargets.push_back(x);
    return p;
  };
  auto monotone = [](const std::vector<double>& t) {
    for (size_t i = 1; i < t.size(); ++i) {
      if (t[i] > t[i - 1]) return false;
    }
    return true;
  };

  SynthParams sp;
  sp.penetrationMm = 8.0;
  const Scene pen = synthesize(sp);
  const RefinementProblem p = problemFor(pen, pen.placedObject());
  const auto t0 = Clock::now();
  const RefineResult r = refinePoses(p);
  const double s = since(t0);
  v.require(std::abs(r.initialPenetrationMm - 8.0) <= 0.01, "start penetration " + fmt("%.3f mm", r.initialPenetrationMm));
  v.require(r.finalPenetrationMm <= 1.0, "final penetration " + fmt("%.2f mm", r.finalPenetrationMm));
  v.require(r.iterations <= 300, "iterations " + std::to_string(r.iterations));
  v.require(s < 60.0, "refine took " + fmt("%.1f s", s));
  v.require(monotone(r.energyTrace), "energy trace increases");

  // object-only recovery of a 5 mm offset from a touching pose
  sp = {};
  sp.gapMm = 0.0;
  sp.contactThreshold = 0.0005;
  const Scene touch = synthesize(sp);
  double worst = 0.0;
  for (const Vec3& dir : {Vec3(1, 1, 1), Vec3(0, -1, 0), Vec3(-1, 0.3, 0.2), Vec3(0, 0, 1)}) {
    const Vec3 offset = dir.normalized() * 0.005;
    RefinementProblem q = problemFor(touch, touch.placedObject().transformed(RigidTransform(Vec3::Zero(), offset)));
    q.settings.optimizeHand = false;
    const RefineResult rr = refinePoses(q);
    Vec3 c = Vec3::Zero();
    for (const Vec3& x : q.object.vertices()) c += x;
    c /= static_cast<double>(q.object.vertexCount());
    worst = std::max(worst, (rr.objectPose.apply(c) - c + offset).norm());
    v.require(monotone(rr.energyTrace), "recovery trace increases");
  }
  v.require(worst <= 0.001, "pose recovery error " + fmt("%.2f mm", 1000 * worst));
  v.info << "penetration " << fmt("%.2f", r.initialPenetrationMm) << " -> "
         << fmt("%.2f mm", r.finalPenetrationMm) << " in " << r.iterations << " iterations, "
         << fmt("%.1f s", s) << "; 5 mm offset recovered within " << fmt("%.2f mm", 1000 * worst);
  return v;
}

Verdict criterion9() {
  Verdict v;
  const double r = 0.05;
  const double d = 0.05;
  const double lens = std::numbers::pi * (4 * r + d) * (2 * r - d) * (2 * r - d) / 12.0 * 1e6;
  const double vol = intersectionVolume(shapes::icosphere(r, 5), shapes::icosphere(r, 5, {d, 0, 0}), 1.0);
  const double rel = std::abs(vol - lens) / lens;
  v.require(rel <= 0.03, "lens error " + fmt("%.2f %%", 100 * rel));

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-0.03, 0.03);
  std::uniform_real_distribution<double> ang(-1.0, 1.0);
  double worstPen = 0.0;
  int penetrating = 0;
  for (int trial = 0; trial < 6; ++trial) {
    const TriangleMesh object = shapes::icosphere(0.04, 3, {u(rng), u(rng), u(rng)});
    const TriangleMesh hand = shapes::capsule(0.08, 0.012, 0.01, 16, 4)
                                  .transformed(RigidTransform(Vec3(ang(rng), ang(rng), ang(rng)),
                                                              Vec3(u(rng), u(rng), u(rng))));
    v.require(object.faceCount() <= 2000 && hand.faceCount() <= 2000, "oracle mesh too large");
    double ref = 0.0;
    for (const Vec3& x : hand.vertices()) {
      if (oracle::bruteInside(object, x)) ref = std::max(ref, 1000.0 * oracle::bruteDistance(object, x));
    }
    penetrating += ref > 0.0 ? 1 : 0;
    worstPen = std::max(worstPen, std::abs(maxPenetration(hand, object) - ref));
  }
  v.require(worstPen <= 1e-6, "penetration error " + fmt("%.2e mm", worstPen));
  v.require(penetrating >= 3, "too few penetrating trials");

  std::vector<Vec3> a(2000), b(2000);
  for (size_t i = 0; i < a.size(); ++i) {
    a[i] = Vec3(u(rng), u(rng), u(rng));
    b[i] = Vec3(u(rng), u(rng), u(rng));
  }
  auto naive = [](std::span<const Vec3> p, std::span<const Vec3> q) {
    long double s = 0;
    for (size_t i = 0; i < p.size(); ++i) {
      const long double dx = p[i].x() - q[i].x(), dy = p[i].y() - q[i].y(), dz = p[i].z() - q[i].z();
      s += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    return static_cast<double>(1000.0L * s / p.size());
  };
  const double e1 = std::abs(mpvpe(a, b) - naive(a, b));
  const double e2 = std::abs(mpjpe(std::span(a).first(21), std::span(b).first(21)) -
                             naive(std::span(a).first(21), std::span(b).first(21)));
  v.require(e1 <= 1e-9 && e2 <= 1e-9, "MPJPE/MPVPE resummation error " + fmt("%.2e", std::max(e1, e2)));
  v.info << "lens " << fmt("%.2f", vol) << " vs " << fmt("%.2f cm3", lens) << " (" << fmt("%.2f %%", 100 * rel)
         << "), penetration vs oracle " << fmt("%.1e mm", worstPen) << ", MPJPE/MPVPE "
         << fmt("%.1e", std::max(e1, e2));
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict criterion10() {
  Verdict v;
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / ("rup_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path scene = root / "scene.json";
  saveScene(scene, synthesize({}));  // degree 0: rigid
  const cli::Settings settings;
  const cli::PipelineResult a = cli::runPipeline(scene, settings, root / "run1");
  const cli::PipelineResult b = cli::runPipeline(scene, settings, root / "run2");
  const std::string ma = slurp(a.manifest);
  v.require(!ma.empty() && ma == slurp(b.manifest), "manifests differ");
  v.require(a.stages.size() == 6, "stage count " + std::to_string(a.stages.size()));
  v.require(a.fit.maxAxisAngle <= 1e-3, "rigid graph axis-angle " + fmt("%.2e", a.fit.maxAxisAngle));
  v.info << "manifests byte-identical (" << ma.size() << " bytes, " << a.stages.size()
         << " stages), rigid graph max axis-angle " << fmt("%.1e", a.fit.maxAxisAngle);
  fs::remove_all(root);
  return v;
}

}  // namespace

int main() {
  const std::vector<Scene> scenes = fiveScenes();
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"ray-cast oracle equality", criterion1},
      {"unwrap round trip", [&] { return criterion2(scenes); }},
      {"sampling count", [&] { return criterion3(scenes); }},
      {"deformed-degree fidelity", criterion4},
      {"deformation graph properties", criterion5},
      {"loss correctness", criterion6},
      {"RUFormer toy", criterion7},
      {"refinement efficacy", criterion8},
      {"metrics", criterion9},
      {"end-to-end determinism", criterion10},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    const auto t0 = Clock::now();
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    failed += v.ok ? 0 : 1;
    std::printf("%s criterion %zu (%s): %s", v.ok ? "PASS" : "FAIL", i + 1, criteria[i].first,
                v.info.str().c_str());
    if (!v.ok) std::printf(" | failed: %s", v.why.c_str());
    std::printf(" [%.1f s]\n", since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
