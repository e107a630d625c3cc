#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pipeline.hpp"

#include "rup/obj_io.hpp"

#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iterator>

using namespace rup;
using namespace rup::cli;

namespace {

const fs::path kScratchRoot = fs::temp_directory_path() / ("rup_cli_" + std::to_string(::getpid()));

struct RemoveScratch {
  ~RemoveScratch() {
    std::error_code ec;
    fs::remove_all(kScratchRoot, ec);
  }
} removeScratch;

fs::path scratch(const std::string& name) {
  const fs::path dir = kScratchRoot / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run(const std::string& args) {
  const std::string cmd = std::string(RUP_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path makeScene(const fs::path& dir, const SynthParams& p, const std::string& stem = "scene") {
  const fs::path path = dir / (stem + ".json");
  saveScene(path, synthesize(p));
  return path;
}

}  // namespace

TEST_CASE("sha256 matches the FIPS 180-2 vectors") {
  const fs::path dir = scratch("sha");
  writeText(dir / "empty", "");
  writeText(dir / "abc", "abc");
  CHECK(sha256File(dir / "empty") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256File(dir / "abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK_THROWS_AS(sha256File(dir / "missing"), InputError);
}

TEST_CASE("intermediate files round-trip") {
  const fs::path dir = scratch("roundtrip");
  SynthParams p;
  p.degree = 0.2;
  const Scene scene = loadScene(makeScene(dir, p));
  const UnwrapResult stacks = unwrapScene(scene, 16);

  saveUnwrap(dir / "u.rups", stacks, "scene.json");
  const UnwrapResult back = loadUnwrap(dir / "u.rups");
  REQUIRE(back.objectFar.values.size() == stacks.objectFar.values.size());
  for (size_t i = 0; i < back.objectFar.values.size(); ++i) {
    CHECK(back.objectFar.values[i] == static_cast<double>(static_cast<float>(stacks.objectFar.values[i])));
  }
  CHECK_THROWS_AS(loadContact(dir / "u.rups"), InputError);

  const ContactStage contact = contactStage(scene, stacks, 0.002);
  saveContact(dir / "c.rups", contact);
  const ContactMapStack maps = loadContact(dir / "c.rups");
  CHECK(maps.objectMaps.values == contact.maps.objectMaps.values);
  CHECK(maps.handMaps.values == contact.maps.handMaps.values);
  CHECK(maps.degrees == contact.maps.degrees);
  CHECK_THROWS_AS(loadUnwrap(dir / "c.rups"), InputError);

  const SampledPointSet samples = sampleStage(stacks, 4);
  CHECK(samples.size() == 16u * 32u);
  saveSamples(dir / "s.json", samples, 4);
  const SampledPointSet s2 = loadSamples(dir / "s.json");
  REQUIRE(s2.size() == samples.size());
  for (size_t i = 0; i < s2.size(); ++i) {
    CHECK(s2.points[i] == samples.points[i]);
    CHECK(s2.valid[i] == samples.valid[i]);
    CHECK(s2.tags[i].u == samples.tags[i].u);
    CHECK(s2.tags[i].channel == samples.tags[i].channel);
  }

  HandPose pose = scene.pose;
  pose.root = Vec3(0.1, -1.0 / 3.0, 1e-17);
  writeText(dir / "pose.json", handPoseJson(pose));
  const HandPose pose2 = loadHandPose(dir / "pose.json");
  CHECK(pose2.flatten() == pose.flatten());
  writeText(dir / "bad.json", "{\"format\": \"rup-hand-pose\", \"version\": 2}");
  CHECK_THROWS_AS(loadHandPose(dir / "bad.json"), InputError);
}

TEST_CASE("pipeline: default grasp manifest, rigid graph and determinism") {
  const fs::path dir = scratch("pipeline");
  SynthParams p;
  const fs::path scene = makeScene(dir, p);
  Settings settings;

  const PipelineResult a = runPipeline(scene, settings, dir / "a");
  const std::vector<std::string> expected{"unwrap", "contact-gt", "grid_sample",
                                          "fit",    "refine",     "metrics"};
  const auto manifest = nlohmann::json::parse(slurp(a.manifest));
  REQUIRE(manifest.at("stages").size() == 6);
  for (size_t i = 0; i < expected.size(); ++i) {
    const auto& stage = manifest["stages"][i];
    CHECK(stage["name"] == expected[i]);
    CHECK(stage["status"] == "ok");
    CHECK_FALSE(stage["outputs"].empty());
    for (const auto& f : stage["outputs"]) {
      const fs::path file = dir / "a" / f["file"].get<std::string>();
      REQUIRE(fs::exists(file));
      CHECK(f["bytes"].get<uintmax_t>() == fs::file_size(file));
      CHECK(f["sha256"] == sha256File(file));
    }
  }
  CHECK(manifest["scene"]["sha256"] == sha256File(scene));

  // degree 0 everywhere: the fitted graph stays at identity
  CHECK(a.fit.maxAxisAngle <= 1e-3);
  CHECK(a.fit.maxTranslation <= 1e-6);

  const PipelineResult b = runPipeline(scene, settings, dir / "b");
  CHECK(slurp(a.manifest) == slurp(b.manifest));
  CHECK(slurp(dir / "a" / "energy.csv") == slurp(dir / "b" / "energy.csv"));
}

TEST_CASE("pipeline: deformed scene moves the graph") {
  const fs::path dir = scratch("deformed");
  SynthParams p;
  p.degree = 0.3;
  Settings settings;
  settings.res = 32;
  const PipelineResult r = runPipeline(makeScene(dir, p), settings, dir / "out");
  CHECK(r.fit.contactPoints > 0);
  CHECK(r.fit.maxTranslation > 1e-3);
  CHECK(r.fit.fit.energy < r.fit.fit.initialEnergy);
}

TEST_CASE("pipeline: stage failures carry the stage name and code") {
  const fs::path dir = scratch("errors");
  const fs::path scene = makeScene(dir, SynthParams{});

  auto stageOf = [&](const fs::path& s, const Settings& settings) -> std::pair<std::string, int> {
    try {
      runPipeline(s, settings, dir / "out");
    } catch (const StageError& e) {
      return {e.stage(), e.code()};
    }
    return {"", 0};
  };

  Settings tooManyNodes;
  tooManyNodes.res = 16;
  tooManyNodes.nodes = 100000;
  CHECK(stageOf(scene, tooManyNodes) == std::pair<std::string, int>{"fit", kExitInput});

  Settings badGrid;
  badGrid.grid = 5;
  CHECK(stageOf(scene, badGrid) == std::pair<std::string, int>{"setup", kExitInput});

  CHECK(stageOf(dir / "missing.json", Settings{}) == std::pair<std::string, int>{"scene", kExitInput});

  const StageError e("refine", kExitNumerical, "diverged");
  const auto j = nlohmann::json::parse(e.json());
  CHECK(j["stage"] == "refine");
  CHECK(j["code"] == 3);
  CHECK(j["kind"] == "numerical_error");
  CHECK(exitCodeFor(NumericalError("x")) == kExitNumerical);
  CHECK(exitCodeFor(InputError("x")) == kExitInput);
}

TEST_CASE("forward stage shapes and determinism") {
  const fs::path dir = scratch("forward");
  const Scene scene = loadScene(makeScene(dir, SynthParams{}));
  Settings settings;
  settings.res = 16;
  const ForwardStage a = forwardStage(scene, settings, nn::Init::Random);
  CHECK(a.output.contactTokens.rows() == 16);
  CHECK(a.output.contactTokens.cols() == 768);
  CHECK(a.output.deformTokens.rows() == 16 * 32);
  CHECK(a.output.deformTokens.cols() == 256);
  CHECK(a.output.transforms.size() == static_cast<size_t>(settings.nodes));
  const ForwardStage b = forwardStage(scene, settings, nn::Init::Random);
  CHECK(a.reportJson() == b.reportJson());
  settings.seed = 1;
  CHECK(forwardStage(scene, settings, nn::Init::Random).reportJson() != a.reportJson());
}

TEST_CASE("rup binary: subcommands and exit codes") {
  const fs::path dir = scratch("binary");
  const std::string out = " --out-dir " + dir.string();
  CHECK(run("--help") == 0);
  CHECK(run("") == 2);
  CHECK(run("bogus") == 2);
  CHECK(run("synth --degree 2" + out) == 2);
  CHECK(run("synth --kind cube" + out) == 2);
  CHECK(run("pipeline --res 63" + out) == 2);
  CHECK(run("unwrap --hand procedural" + out) == 2);

  REQUIRE(run("synth --kind press-plane --degree 0.3 --seed 4" + out) == 0);
  const std::string scene = " --scene " + (dir / "scene.json").string();
  saveObj(dir / "placed.obj", loadScene(dir / "scene.json").placedObject());
  CHECK(run("unwrap --res 16" + scene + out) == 0);
  CHECK(run("contact-gt --res 16" + scene + out) == 0);
  CHECK(run("sample --rups " + (dir / "unwrap.rups").string() + " --res 16" + out) == 0);
  CHECK(run("fit --samples " + (dir / "samples.json").string() + " --contact " +
            (dir / "contact.rups").string() + scene + out) == 0);
  CHECK(run("deform --graph " + (dir / "graph.json").string() + " --obj " +
            (dir / "placed.obj").string() + " --out " + (dir / "d.obj").string()) == 0);
  CHECK(run("refine --max-iterations 5 --contact " + (dir / "contact.rups").string() +
            " --graph " + (dir / "graph.json").string() + scene + out) == 0);
  CHECK(run("metrics --hand-pose " + (dir / "hand_pose.json").string() + scene + out) == 0);
  for (const char* f : {"unwrap.rups", "unwrap.rups.json", "contact.rups", "contact.rups.json",
                        "samples.json", "graph.json", "object_deformed.obj", "d.obj",
                        "hand_pose.json", "object_pose.json", "object_refined.obj", "energy.csv",
                        "refine.json", "metrics.json"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  // deform with the fitted graph reproduces the fit stage's mesh
  CHECK(slurp(dir / "d.obj") == slurp(dir / "object_deformed.obj"));
  CHECK(slurp(dir / "d.obj") != slurp(dir / "placed.obj"));
  CHECK(run("sample --rups " + (dir / "contact.rups").string() + out) == 2);
}
