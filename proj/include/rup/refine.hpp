#pragma once

#include "rup/contact.hpp"
#include "rup/deform_graph.hpp"
#include "rup/hand.hpp"

#include <span>
#include <vector>

namespace rup {

/// Per-vertex contact from a map and the stack it was computed on (the stack
/// must carry hit records). Each nonzero pixel deposits its value on the three
/// vertices of its face with barycentric weights; a vertex gets the weighted
/// average of its deposits, or 0 when untouched.
std::vector<double> mapsToVertices(const RupStack& maps, const RupStack& stack,
                                   const TriangleMesh& mesh);

/// Graph deformation of every vertex; topology unchanged.
TriangleMesh applyObjectDeformation(const TriangleMesh& object, const DeformationGraph& graph);

struct RefineSettings {
  int maxIterations = 300;
  double wAtt = 1.0;
  double wPen = 10.0;
  double wReg = 0.1;
  double contactThreshold = 0.5;   // targets above this attract
  int correspondenceInterval = 10;  // iterations between closest-point updates
  double step = 1e-4;               // central-difference step, rad and m
  int maxRejections = 10;           // consecutive failed proposals before abort
  bool optimizeHand = true;
  bool optimizeObject = true;
};

struct RefinementProblem {
  HandRig rig;
  HandPose pose;        // starting pose; increments are added to it
  TriangleMesh object;  // in the hand frame, already deformed
  std::vector<double> handTargets;    // per hand vertex, [0, 1]
  std::vector<double> objectTargets;  // per object vertex, [0, 1]
  RefineSettings settings;

  /// Throws InputError on size mismatch, targets outside [0, 1] or negative weights.
  void validate() const;
};

struct RefineEnergy {
  double attraction = 0.0;
  double penetration = 0.0;
  double regularization = 0.0;
  double total = 0.0;
};

struct RefineResult {
  HandPose increments;       // 16 axis-angle increments and the root increment
  HandPose pose;             // starting pose plus increments
  RigidTransform objectPose; // applied to the input object
  std::vector<double> energyTrace;  // energy after each accepted step; [0] is the start
  RefineEnergy initial;
  RefineEnergy final;
  double initialPenetrationMm = 0.0;
  double finalPenetrationMm = 0.0;
  int iterations = 0;
  int accepted = 0;
  bool aborted = false;    // maxRejections consecutive failures
  bool converged = false;  // zero gradient or no further progress
};

/// Levenberg-Marquardt over hand pose increments (51) and the object pose (6),
/// with central-difference Jacobians. The object rotates about its vertex mean.
RefineResult refinePoses(const RefinementProblem& problem);

/// Hand and object surfaces after applying a result.
ArticulatedHand refinedHand(const RefinementProblem& problem, const RefineResult& result);
TriangleMesh refinedObject(const RefinementProblem& problem, const RefineResult& result);

}  // namespace rup
