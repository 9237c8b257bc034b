#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crat/cli/app.hpp"
#include "crat/cli/config.hpp"
#include "crat/core/errors.hpp"
#include "crat/data/csv_io.hpp"

using namespace crat;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "crat");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = crat::cli::run(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("crat_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

const std::vector<std::string> kTiny = {"--set", "model.hidden=8",  "model.L_h=2",
                                        "model.decoder_groups=2", "model.k=2", "training.stage1.epochs=2",
                                        "training.stage1.decay_epoch=1", "training.stage2.epochs=1",
                                        "training.stage2.decay_epoch=1", "training.batch_size=4"};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
  args.insert(args.end(), kTiny.begin(), kTiny.end());
  return args;
}

}  // namespace

TEST_CASE("param-count reports the published totals") {
  const Result r = invoke({"param-count"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("514,920") != std::string::npos);
  CHECK(r.out.find("448,872") != std::string::npos);
}

TEST_CASE("usage errors exit with 1") {
  CHECK(invoke({}).code == cli::kExitUsage);
  CHECK(invoke({"frobnicate"}).code == cli::kExitUsage);
  CHECK(invoke({"param-count", "--no-such-flag"}).code == cli::kExitUsage);
  const Result unknown = invoke({"param-count", "--set", "model.widht=3"});
  CHECK(unknown.code == cli::kExitUsage);
  CHECK(unknown.err.find("model.widht") != std::string::npos);
  CHECK(invoke({"param-count", "--set", "model.hidden=\"wide\""}).code == cli::kExitUsage);
  CHECK(invoke({"param-count", "--set", "training.decoder_init=\"magic\""}).code == cli::kExitUsage);
  CHECK(invoke({"--help"}).code == cli::kExitOk);
}

TEST_CASE("config resolution") {
  const fs::path dir = fresh_dir("config");
  {
    std::ofstream f(dir / "c.json");
    f << "{\n  // comment\n  \"seed\": 5, \"model\": {\"hidden\": 64}\n}\n";
  }
  const cli::RunConfig c = cli::resolve(dir / "c.json", {"model.L_h=8", "data.kind=leader-follower"});
  CHECK(c.seed == 5);
  CHECK(c.model.hidden == 64);
  CHECK(c.model.heads == 8);
  CHECK(c.data.kind == data::ScenarioKind::leader_follower);
  CHECK(cli::from_json(cli::to_json(c)).model == c.model);
  CHECK(cli::to_json(cli::from_json(cli::to_json(c))) == cli::to_json(c));
  CHECK_THROWS_AS(cli::resolve(dir / "missing.json", {}), DataError);

  // the shipped example parses and equals the defaults apart from the data kind
  const fs::path example = fs::path(CRAT_SOURCE_DIR) / "configs" / "example.json";
  cli::RunConfig defaults;
  defaults.data.kind = data::ScenarioKind::leader_follower;
  CHECK(cli::to_json(cli::resolve(example, {})) == cli::to_json(defaults));
}

TEST_CASE("end-to-end: gen-data, train, eval, predict, plot") {
  const fs::path dir = fresh_dir("e2e");
  const std::string d = (dir / "data").string();
  REQUIRE(invoke({"gen-data", "-o", d, "--kind", "bimodal-turn", "--n-train", "6", "--n-val", "3", "--n-test", "2"}).code ==
          cli::kExitOk);
  CHECK(fs::exists(dir / "data" / "resolved_config.json"));
  const std::string manifest = (dir / "data" / "manifest.csv").string();
  CHECK(data::read_manifest(manifest).size() == 11);

  const std::string run1 = (dir / "run1").string(), run2 = (dir / "run2").string();
  REQUIRE(invoke(with_tiny({"train", "-d", manifest, "-o", run1, "--seed", "3"})).code == cli::kExitOk);
  REQUIRE(invoke(with_tiny({"train", "-d", manifest, "-o", run2, "--seed", "3"})).code == cli::kExitOk);
  CHECK(slurp(dir / "run1" / "model.ckpt") == slurp(dir / "run2" / "model.ckpt"));
  CHECK(slurp(dir / "run1" / "train_log.jsonl") == slurp(dir / "run2" / "train_log.jsonl"));
  CHECK(fs::exists(dir / "run1" / "checkpoints" / "stage2_epoch1.ckpt"));
  CHECK(fs::exists(dir / "run1" / "resolved_config.json"));
  const std::string ckpt = (dir / "run1" / "model.ckpt").string();

  SUBCASE("eval") {
    const std::string report = (dir / "eval" / "val.csv").string();
    REQUIRE(invoke({"eval", "--checkpoint", ckpt, "-d", manifest, "-o", report}).code == cli::kExitOk);
    CHECK(slurp(report).starts_with("split,k,minADE,minFDE,MR,n\nval,2,"));
    CHECK(fs::exists(dir / "eval" / "resolved_config.json"));
    // test scenes carry no future
    CHECK(invoke({"eval", "--checkpoint", ckpt, "-d", manifest, "--split", "test", "-o", report}).code == cli::kExitData);
    CHECK(invoke({"eval", "--checkpoint", ckpt, "-d", manifest, "-k", "3", "-o", report}).code == cli::kExitUsage);
    CHECK(invoke({"eval", "--checkpoint", (dir / "nope.ckpt").string(), "-d", manifest, "-o", report}).code ==
          cli::kExitData);
  }
  SUBCASE("predict on scenes without future rows") {
    const fs::path out = dir / "pred";
    REQUIRE(invoke({"predict", "--checkpoint", ckpt, "-d", manifest, "-o", out.string()}).code == cli::kExitOk);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(out)) {
      if (e.path().extension() != ".csv") continue;
      ++files;
      const std::string text = slurp(e.path());
      CHECK(text.starts_with("mode,step,X,Y\n"));
      CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 2 * 30);
    }
    CHECK(files == 2);
  }
  SUBCASE("plot") {
    const fs::path out = dir / "plots";
    const std::string report = (dir / "eval" / "val.csv").string();
    REQUIRE(invoke({"eval", "--checkpoint", ckpt, "-d", manifest, "-o", report}).code == cli::kExitOk);
    REQUIRE(invoke({"plot", "--checkpoint", ckpt, "-d", manifest, "--limit", "2", "--report", report, "-o", out.string()})
                .code == cli::kExitOk);
    CHECK(fs::exists(out / "metrics.svg"));
    CHECK(slurp(out / "bimodal-turn_6.svg").find("<svg") != std::string::npos);
    CHECK(invoke({"plot", "-o", out.string()}).code == cli::kExitUsage);
  }
  SUBCASE("architecture mismatch on a checkpoint is a data error") {
    std::string bytes = slurp(ckpt);
    const auto at = bytes.find("\"hidden\":8");
    REQUIRE(at != std::string::npos);
    bytes.replace(at, 10, "\"hidden\":9");
    const fs::path bad = dir / "bad.ckpt";
    std::ofstream(bad, std::ios::binary) << bytes;
    CHECK(invoke({"eval", "--checkpoint", bad.string(), "-d", manifest, "-o", (dir / "x.csv").string()}).code ==
          cli::kExitData);
  }
}
