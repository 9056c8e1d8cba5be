#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "meraugcn/augraph.hpp"
#include "meraugcn/errors.hpp"
#include "meraugcn/manifest.hpp"
#include "meraugcn/run_config.hpp"

using namespace meraugcn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + MERAUGCN_CLI_PATH + " " + args + " 2>/dev/null";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return o;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) o.out.append(buf, n);
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("meraugcn_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

const char* kSmallModel = "--d 16 --d1 8 --detector_hidden 4 --conv1_channels 2 --conv2_channels 2";

}  // namespace

TEST(RunConfig, EveryKeyRoundTripsItsDefault) {
  const RunConfig defaults;
  for (const auto& k : config_keys()) {
    EXPECT_EQ(get_config_value(defaults, k.name), k.default_value) << k.name;
    RunConfig c;
    set_config_value(c, k.name, k.default_value);
    EXPECT_EQ(config_to_text(c), config_to_text(defaults)) << k.name;
  }
  EXPECT_EQ(get_config_value(defaults, "lr"), "0.0005");
  EXPECT_EQ(get_config_value(defaults, "epochs"), "50");
  EXPECT_EQ(get_config_value(defaults, "lambda"), "0.75");
  EXPECT_EQ(get_config_value(defaults, "d"), "1024");
}

TEST(RunConfig, UnknownKeysAndBadValuesRejected) {
  RunConfig c;
  EXPECT_THROW(set_config_value(c, "learning_rate", "0.1"), ValidationError);
  EXPECT_THROW(get_config_value(c, "nope"), ValidationError);
  EXPECT_THROW(set_config_value(c, "epochs", "ten"), ValidationError);
  EXPECT_THROW(set_config_value(c, "epochs", "10x"), ValidationError);
  EXPECT_THROW(set_config_value(c, "augment", "maybe"), ValidationError);
  EXPECT_THROW(set_config_value(c, "attention", "tanh"), ValidationError);
  set_config_value(c, "augment", "yes");
  EXPECT_TRUE(c.train.augment);
  set_config_value(c, "graph", "dense");
  EXPECT_EQ(c.train.graph, GraphKind::dense);
}

TEST(RunConfig, TextFormat) {
  RunConfig c;
  apply_config_text(c, "# experiment\nlr = 0.002  # faster\n\nepochs=7\nprotocol = loso\n");
  EXPECT_EQ(c.train.lr, 0.002);
  EXPECT_EQ(c.train.epochs, 7u);
  EXPECT_EQ(c.protocol, Protocol::loso);
  try {
    apply_config_text(c, "lr = 0.1\nbogus line\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(apply_config_text(c, "colour = red\n"), ValidationError);
  RunConfig round;
  apply_config_text(round, config_to_text(c));
  EXPECT_EQ(config_to_text(round), config_to_text(c));
  EXPECT_THROW(apply_config_file(c, "/nonexistent/run.cfg"), IoError);
}

TEST(RunConfig, ValidateChecksPaths) {
  RunConfig c;
  EXPECT_THROW(c.validate(true, false), ValidationError);
  c.manifest = "/nonexistent/manifest.jsonl";
  EXPECT_THROW(c.validate(true, false), IoError);
  EXPECT_NO_THROW(RunConfig{}.validate(false, false));
}

TEST(Cli, BuildGraph) {
  auto o = run("build-graph --prune default");
  ASSERT_EQ(o.code, 0);
  EXPECT_EQ(parse_graph(o.out).size(), 12u);
  EXPECT_EQ(parse_graph(o.out), make_graph(GraphKind::pruned));
  o = run("build-graph --prune none");
  EXPECT_EQ(parse_graph(o.out).size(), 17u);
  o = run("build-graph --kind dense");
  EXPECT_EQ(parse_graph(o.out), make_graph(GraphKind::dense));
  const auto dir = scratch("graph");
  ASSERT_EQ(run("build-graph --out " + (dir / "g.txt").string()).code, 0);
  EXPECT_EQ(read_graph_file((dir / "g.txt").string()), make_graph(GraphKind::pruned));
  write_text(dir / "table.txt", "I: AU6+AU12\nII: AU1\n");
  o = run("build-graph --prune none --table " + (dir / "table.txt").string());
  EXPECT_EQ(parse_graph(o.out).nodes(), (std::vector<int>{1, 6, 12}));
  EXPECT_EQ(run("build-graph --kind sparse").code, 1);
  EXPECT_EQ(run("build-graph --table /nonexistent/t.txt").code, 3);
  fs::remove_all(dir);
}

TEST(Cli, GradcheckSeed7) {
  const auto o = run("gradcheck --seed 7");
  EXPECT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("max_relative_error"), std::string::npos);
  EXPECT_NE(o.out.find("PASS"), std::string::npos);
}

TEST(Cli, HelpListsEveryKeyWithDefault) {
  for (const std::string sub : {"train", "eval"}) {
    const auto o = run(sub + " --help");
    EXPECT_EQ(o.code, 0);
    for (const auto& k : config_keys()) {
      const auto dflt = k.default_value.empty() ? std::string("\"\"") : k.default_value;
      EXPECT_NE(o.out.find(k.name + " (default: " + dflt + ")"), std::string::npos) << sub << " " << k.name;
    }
  }
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("no-such-command").code, 1);
  EXPECT_EQ(run("train --epochs nope --manifest x").code, 1);
  EXPECT_EQ(run("train --manifest /nonexistent/manifest.jsonl").code, 3);
  EXPECT_EQ(run("gradcheck --seed 1 --step -1").code, 1);
}

TEST(Cli, SynthMetricsAndAugmentPlan) {
  const auto a = scratch("synth_a"), b = scratch("synth_b");
  ASSERT_EQ(run("synth-data --counts 2,2,2,2,2 --subjects 2 --seed 3 --out " + a.string()).code, 0);
  ASSERT_EQ(run("synth-data --counts 2,2,2,2,2 --subjects 2 --seed 3 --out " + b.string()).code, 0);
  EXPECT_EQ(slurp(a / "manifest.jsonl"), slurp(b / "manifest.jsonl"));
  EXPECT_EQ(slurp(a / "flows/synth_0007.oflw"), slurp(b / "flows/synth_0007.oflw"));
  EXPECT_EQ(run("synth-data --counts 2,2 --out " + a.string()).code, 1);

  const auto m = parse_manifest((a / "manifest.jsonl").string());
  std::ostringstream perfect;
  for (const auto& r : m.records) {
    perfect << r.sample_id << ' ' << r.class_label << ' ';
    for (auto v : r.au_labels) perfect << int(v);
    perfect << '\n';
  }
  write_text(a / "preds.txt", perfect.str());
  const auto o = run("metrics --manifest " + (a / "manifest.jsonl").string() + " --predictions " +
                     (a / "preds.txt").string() + " --json " + (a / "r.json").string());
  ASSERT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("war=1\n"), std::string::npos) << o.out;
  EXPECT_TRUE(fs::exists(a / "r.json"));
  write_text(a / "bad.txt", "unknown_id 0\n");
  EXPECT_EQ(run("metrics --manifest " + (a / "manifest.jsonl").string() + " --predictions " +
                (a / "bad.txt").string()).code, 1);

  const auto plan = run("augment-plan --onset 0 --apex 10 --offset 20");
  ASSERT_EQ(plan.code, 0);
  EXPECT_EQ(std::count(plan.out.begin(), plan.out.end(), '\n'), 71);
  const auto mplan = run("augment-plan --manifest " + (a / "manifest.jsonl").string());
  ASSERT_EQ(mplan.code, 0);
  EXPECT_GT(std::count(mplan.out.begin(), mplan.out.end(), '\n'), 10 * 7);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, TrainPrecedenceAndEval) {
  const auto dir = scratch("train");
  ASSERT_EQ(run("synth-data --counts 2,2,2,2,2 --subjects 2 --out " + (dir / "data").string()).code, 0);
  const auto manifest = (dir / "data/manifest.jsonl").string();
  write_text(dir / "run.cfg", "epochs = 2\nlr = 0.001\nseed = 5\nout_dir = " + (dir / "from_file").string() + "\n");
  const std::string base = std::string("train --config ") + (dir / "run.cfg").string() + " --manifest " +
                           manifest + " " + kSmallModel;

  // File beats defaults, flags beat the file.
  auto o = run(base + " --lr 0.002");
  ASSERT_EQ(o.code, 0) << o.out;
  const auto cfg = slurp(dir / "from_file/config.txt");
  EXPECT_NE(cfg.find("epochs = 2\n"), std::string::npos) << cfg;
  EXPECT_NE(cfg.find("lr = 0.002\n"), std::string::npos) << cfg;
  EXPECT_NE(cfg.find("seed = 5\n"), std::string::npos);
  for (const auto& f : {"all/model.ckpt", "all/history.csv", "all/report.txt", "all/report.json",
                        "all/predictions.txt", "report.txt", "report.json"})
    EXPECT_TRUE(fs::exists(dir / "from_file" / f)) << f;
  const auto history = slurp(dir / "from_file/all/history.csv");
  EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 3);

  // The environment beats the file, flags beat the environment.
  const std::string env = std::string(kOutDirEnv) + "=" + (dir / "from_env").string();
  ASSERT_EQ(run(base, env).code, 0);
  EXPECT_TRUE(fs::exists(dir / "from_env/report.txt"));
  ASSERT_EQ(run(base + " --out_dir " + (dir / "from_flag").string(), env).code, 0);
  EXPECT_TRUE(fs::exists(dir / "from_flag/report.txt"));

  // Same config and seed: byte-identical artifacts.
  EXPECT_EQ(slurp(dir / "from_env/all/model.ckpt"), slurp(dir / "from_flag/all/model.ckpt"));
  EXPECT_EQ(slurp(dir / "from_env/report.json"), slurp(dir / "from_flag/report.json"));
  EXPECT_NE(slurp(dir / "from_file/all/model.ckpt"), slurp(dir / "from_env/all/model.ckpt"));

  o = run("eval --manifest " + manifest + " --checkpoint " + (dir / "from_file/all/model.ckpt").string() +
          " --out_dir " + (dir / "eval").string());
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("war="), std::string::npos);
  EXPECT_EQ(slurp(dir / "eval/report.txt"), o.out);
  EXPECT_EQ(run("eval --manifest " + manifest + " --checkpoint /nonexistent.ckpt").code, 3);
  fs::remove_all(dir);
}

TEST(Cli, HdeProducesTwoFoldsAndAverage) {
  const auto dir = scratch("hde");
  ASSERT_EQ(run("synth-data --preset composite --out " + (dir / "data").string()).code, 0);
  const auto o = run("train --manifest " + (dir / "data/manifest.jsonl").string() +
                     " --protocol hde --epochs 1 " + kSmallModel + " --out_dir " + (dir / "run").string());
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_TRUE(fs::exists(dir / "run/casme2_to_samm/report.json"));
  EXPECT_TRUE(fs::exists(dir / "run/samm_to_casme2/report.json"));
  EXPECT_NE(slurp(dir / "run/report.txt").find("label=average"), std::string::npos);
  std::size_t folds = 0;
  for (const auto& e : fs::directory_iterator(dir / "run")) folds += e.is_directory();
  EXPECT_EQ(folds, 2u);
  fs::remove_all(dir);
}
