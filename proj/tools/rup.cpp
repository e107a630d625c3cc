// rup: command-line front end. Exit codes: 0 ok, 2 input error, 3 numerical failure.

#include "pipeline.hpp"

#include "rup/obj_io.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

using namespace rup;
using namespace rup::cli;

namespace {

struct SceneSource {
  std::string scene;
  std::string hand;
  std::string pose;
  std::string object;

  Scene load() const {
    if (!scene.empty()) {
      return loadScene(scene);
    }
    if (hand.empty() || object.empty()) {
      throw InputError("give --scene or both --hand and --object");
    }
    Scene s;
    if (hand != "procedural") {
      s.rigPath = hand;
    }
    if (!pose.empty()) {
      s.pose = loadHandPose(pose);
    }
    s.object = loadObj(object);
    return s;
  }
};

void addSceneOptions(CLI::App* cmd, SceneSource& src, bool rigForm) {
  cmd->add_option("--scene", src.scene, "Scene file")->check(CLI::ExistingFile);
  if (rigForm) {
    cmd->add_option("--hand", src.hand, "Rig file or 'procedural'");
    cmd->add_option("--pose", src.pose, "Hand pose file (default: rest pose)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--object", src.object, "Object OBJ in the hand frame")
        ->check(CLI::ExistingFile);
  }
}

void say(const std::string& line) { std::cout << line << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relative unwrapping tools for hand-object scenes"};
  app.fallthrough();
  app.require_subcommand(1);

  Settings settings;
  std::string outDirArg = ".";
  app.add_option("--seed", settings.seed, "Seed for every random choice");
  app.add_option("--res", settings.res, "RUP resolution (H = W)");
  app.add_option("--grid", settings.grid, "Grid cell size for sampling");
  app.add_option("--threshold-mm", settings.thresholdMm, "Contact threshold in mm");
  app.add_option("--out-dir", outDirArg, "Output directory");

  // synth
  auto* synthCmd = app.add_subcommand("synth", "Generate a synthetic scene");
  SynthParams synth;
  std::string kind = "grasp-sphere";
  std::string name = "scene";
  synthCmd->add_option("--kind", kind, "grasp-sphere | pinch-capsule | press-plane");
  synthCmd->add_option("--size", synth.size, "Object size in m");
  synthCmd->add_option("--degree", synth.degree, "Deformed degree on the contact patch");
  synthCmd->add_option("--gap-mm", synth.gapMm, "Finger clearance");
  synthCmd->add_option("--penetration-mm", synth.penetrationMm, "Push the object in this far");
  synthCmd->add_option("--jitter-mm", synth.jitterMm, "Seeded placement noise");
  synthCmd->add_option("--name", name, "Scene file stem");

  // unwrap
  auto* unwrapCmd = app.add_subcommand("unwrap", "Hand, object-near and object-far RUP stacks");
  SceneSource unwrapSrc;
  std::string unwrapOut;
  addSceneOptions(unwrapCmd, unwrapSrc, true);
  unwrapCmd->add_option("--out", unwrapOut, "RUPS output (default <out-dir>/unwrap.rups)");

  // contact-gt
  auto* contactCmd = app.add_subcommand("contact-gt", "Ground-truth contact maps and degrees");
  SceneSource contactSrc;
  addSceneOptions(contactCmd, contactSrc, false);

  // sample
  auto* sampleCmd = app.add_subcommand("sample", "Grid-sample the object stacks");
  std::string sampleRups;
  sampleCmd->add_option("--rups", sampleRups, "Unwrap RUPS file")->required()->check(CLI::ExistingFile);

  // deform
  auto* deformCmd = app.add_subcommand("deform", "Apply a deformation graph to an OBJ");
  std::string deformGraph, deformObj, deformOut;
  deformCmd->add_option("--graph", deformGraph)->required()->check(CLI::ExistingFile);
  deformCmd->add_option("--obj", deformObj)->required()->check(CLI::ExistingFile);
  deformCmd->add_option("--out", deformOut)->required();

  // fit
  auto* fitCmd = app.add_subcommand("fit", "Fit a deformation graph to coarse contact deformation");
  SceneSource fitSrc;
  std::string fitSamples, fitContact;
  addSceneOptions(fitCmd, fitSrc, false);
  fitCmd->add_option("--samples", fitSamples)->required()->check(CLI::ExistingFile);
  fitCmd->add_option("--contact", fitContact)->required()->check(CLI::ExistingFile);
  fitCmd->add_option("--nodes", settings.nodes, "Graph nodes");

  // refine
  auto* refineCmd = app.add_subcommand("refine", "Refine hand and object poses");
  SceneSource refineSrc;
  std::string refineContact, refineGraph;
  addSceneOptions(refineCmd, refineSrc, false);
  refineCmd->add_option("--contact", refineContact)->required()->check(CLI::ExistingFile);
  refineCmd->add_option("--graph", refineGraph, "Deformation graph (default: none)")
      ->check(CLI::ExistingFile);
  refineCmd->add_option("--max-iterations", settings.refine.maxIterations);
  refineCmd->add_option("--w-att", settings.refine.wAtt);
  refineCmd->add_option("--w-pen", settings.refine.wPen);
  refineCmd->add_option("--w-reg", settings.refine.wReg);

  // forward
  auto* forwardCmd = app.add_subcommand("forward", "Run the toy network on a scene");
  SceneSource forwardSrc;
  std::string forwardWeights, forwardInit = "identity";
  addSceneOptions(forwardCmd, forwardSrc, false);
  forwardCmd->add_option("--weights", forwardWeights, "RUFW checkpoint")->check(CLI::ExistingFile);
  forwardCmd->add_option("--init", forwardInit, "identity | random")
      ->check(CLI::IsMember({"identity", "random"}));

  // metrics
  auto* metricsCmd = app.add_subcommand("metrics", "Evaluate a refined hand against the scene");
  SceneSource metricsSrc;
  std::string metricsPose, metricsObject;
  addSceneOptions(metricsCmd, metricsSrc, false);
  metricsCmd->add_option("--hand-pose", metricsPose, "Predicted pose (default: scene pose)")
      ->check(CLI::ExistingFile);
  metricsCmd->add_option("--object", metricsObject, "Object OBJ in the hand frame")
      ->check(CLI::ExistingFile);

  // pipeline
  auto* pipelineCmd = app.add_subcommand("pipeline", "unwrap -> contact-gt -> grid_sample -> fit -> refine -> metrics");
  std::string pipelineScene;
  pipelineCmd->add_option("--scene", pipelineScene, "Scene file (default: synthesize a grasp)")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    settings.validate();
    const fs::path outDir = outDirArg;
    fs::create_directories(outDir);

    if (*synthCmd) {
      synth.kind = sceneKindFromName(kind);
      synth.seed = settings.seed;
      synth.contactThreshold = settings.threshold();
      const fs::path path = outDir / (name + ".json");
      saveScene(path, synthesize(synth));
      say(path.string());
    } else if (*unwrapCmd) {
      const Scene scene = unwrapSrc.load();
      const fs::path path = unwrapOut.empty() ? outDir / "unwrap.rups" : fs::path(unwrapOut);
      saveUnwrap(path, unwrapScene(scene, settings.res),
                 unwrapSrc.scene.empty() ? unwrapSrc.object : fs::path(unwrapSrc.scene).filename().string());
      say(path.string());
    } else if (*contactCmd) {
      const Scene scene = contactSrc.load();
      const ContactStage c = contactStage(scene, unwrapScene(scene, settings.res), settings.threshold());
      saveContact(outDir / "contact.rups", c);
      std::cout << c.reportJson();
    } else if (*sampleCmd) {
      const SampledPointSet s = sampleStage(loadUnwrap(sampleRups), settings.grid);
      saveSamples(outDir / "samples.json", s, settings.grid);
      say("samples " + std::to_string(s.size()) + " valid " + std::to_string(s.validCount()));
    } else if (*deformCmd) {
      saveObj(deformOut, applyObjectDeformation(loadObj(deformObj), loadGraph(deformGraph)));
      say(deformOut);
    } else if (*fitCmd) {
      const Scene scene = fitSrc.load();
      const FitStage f = fitStage(scene.placedObject(), loadSamples(fitSamples),
                                  loadContact(fitContact), settings.nodes);
      saveGraph(outDir / "graph.json", f.graph);
      saveObj(outDir / "object_deformed.obj", f.deformed);
      writeText(outDir / "fit.json", f.reportJson());
      std::cout << f.reportJson();
    } else if (*refineCmd) {
      const Scene scene = refineSrc.load();
      const ContactMapStack contact = loadContact(refineContact);
      if (contact.handMaps.height != contact.handMaps.width) {
        throw InputError("contact maps must be square");
      }
      const UnwrapResult stacks = unwrapScene(scene, contact.handMaps.height);
      TriangleMesh object = scene.placedObject();
      if (!refineGraph.empty()) {
        object = applyObjectDeformation(object, loadGraph(refineGraph));
      }
      const RefineStage r = refineStage(scene, stacks, contact, object, settings.refine);
      saveRefine(outDir, r, scene);
      std::cout << r.reportJson();
    } else if (*forwardCmd) {
      const Scene scene = forwardSrc.load();
      const ForwardStage f = forwardStage(
          scene, settings, forwardInit == "random" ? nn::Init::Random : nn::Init::Identity,
          forwardWeights);
      const std::vector<RupStack> maps{f.output.maps.handMaps, f.output.maps.objectMaps};
      saveRups(outDir / "forward_maps.rups", maps);
      writeText(outDir / "forward.json", f.reportJson());
      say("region tokens " + std::to_string(f.output.contactTokens.rows()) + "x" +
          std::to_string(f.output.contactTokens.cols()) + ", point tokens " +
          std::to_string(f.output.deformTokens.rows()) + "x" +
          std::to_string(f.output.deformTokens.cols()));
    } else if (*metricsCmd) {
      const Scene scene = metricsSrc.load();
      const ArticulatedHand gt = scene.hand();
      const ArticulatedHand pred =
          metricsPose.empty() ? gt : scene.rig().poseUnchecked(loadHandPose(metricsPose));
      const TriangleMesh object =
          metricsObject.empty() ? scene.placedObject() : loadObj(metricsObject);
      const MetricsReport m = metricsStage(pred, gt, object);
      writeText(outDir / "metrics.json", m.toJson());
      std::cout << m.toJson();
      say(m.summary());
    } else if (*pipelineCmd) {
      fs::path scene = pipelineScene;
      if (scene.empty()) {
        SynthParams p;
        p.seed = settings.seed;
        p.contactThreshold = settings.threshold();
        scene = outDir / "scene.json";
        saveScene(scene, synthesize(p));
      }
      const PipelineResult r = runPipeline(scene, settings, outDir);
      say(r.metrics.summary());
      say(r.manifest.string());
    }
    return kExitOk;
  } catch (const StageError& e) {
    std::cerr << "rup: " << e.what() << "\n" << e.json() << "\n";
    return e.code();
  } catch (const std::exception& e) {
    std::cerr << "rup: " << e.what() << "\n";
    return exitCodeFor(e);
  }
}
