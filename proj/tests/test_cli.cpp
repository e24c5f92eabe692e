#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "peekaboom/metrics.hpp"
#include "peekaboom/png_io.hpp"
#include "support.hpp"

using namespace peekaboom;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const testing::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("env -u PEEKABOOM_STORE_DIR ") + PEEKABOOM_CLI + " " + args +
                          " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string p(const std::filesystem::path& path) { return path.string(); }

}  // namespace

TEST_CASE("usage errors exit with status 2 and name the flag") {
  testing::TempDir dir("cli-usage");
  Run r = cli(dir, "gen-synth");
  CHECK(r.code == 2);
  CHECK(r.err.find("--out") != std::string::npos);
  r = cli(dir, "");
  CHECK(r.code == 2);
  r = cli(dir, "gen-synth --out " + p(dir / "d") + " --width nine");
  CHECK(r.code == 2);
  CHECK(r.err.find("--width") != std::string::npos);
  r = cli(dir, "saliency --data x --out y --method lime");
  CHECK(r.code == 2);
  CHECK(r.err.find("--method") != std::string::npos);
  r = cli(dir, "metrics --id c");
  CHECK(r.code == 2);
  CHECK(r.err.find("--store") != std::string::npos);
  r = cli(dir, "bogus-command");
  CHECK(r.code == 2);
}

TEST_CASE("domain errors exit with status 1") {
  testing::TempDir dir("cli-domain");
  Run r = cli(dir, "gen-synth --out " + p(dir / "d") + " --width 4 --height 4");
  CHECK(r.code == 1);
  CHECK(r.err.find("unsatisfiable") != std::string::npos);
  r = cli(dir, "train --data " + p(dir / "missing") + " --out " + p(dir / "m.json"));
  CHECK(r.code == 1);
}

TEST_CASE("gen-synth, train, saliency and autoeval chain") {
  testing::TempDir dir("cli-chain");
  const std::string common = " --width 10 --height 10 --classes 3 --noise 0.1";
  REQUIRE(cli(dir, "gen-synth --out " + p(dir / "train") + common + " --per-class 12 --seed 1").code == 0);
  REQUIRE(cli(dir, "gen-synth --out " + p(dir / "test") + common +
                       " --per-class 5 --seed 2 --prefix t").code == 0);
  CHECK(load_dataset(dir / "train").items.size() == 36);

  Run r = cli(dir, "train --data " + p(dir / "train") + " --test " + p(dir / "test") + " --out " +
                       p(dir / "model.json") + " --epochs 20 --lr 0.05");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("test_accuracy=") != std::string::npos);

  for (const std::string m : {"oracle", "random", "vanilla"}) {
    for (const std::string split : {"train", "test"}) {
      r = cli(dir, "saliency --data " + p(dir / split) + " --method " + m + " --model " +
                       p(dir / "model.json") + " --out " + p(dir / ("sal_" + split)));
      REQUIRE(r.code == 0);
    }
  }
  CHECK(std::filesystem::exists(dir / "sal_test" / "t00000.vanilla.salm"));
  r = cli(dir, "saliency --data " + p(dir / "test") + " --method gradcam --out " + p(dir / "g"));
  CHECK(r.code == 1);

  r = cli(dir, "autoeval --test " + p(dir / "test") + " --saliency-test " + p(dir / "sal_test") +
                   " --train " + p(dir / "train") + " --saliency-train " + p(dir / "sal_train") +
                   " --methods oracle,random --schemes KAE,ROAE,ROAR --model " +
                   p(dir / "model.json") + " --schedule 0.5,1 --epochs 10 --lr 0.05 --out " +
                   p(dir / "auto.csv") + " --table " + p(dir / "auto_table.csv"));
  REQUIRE(r.code == 0);
  const auto curves = parse_curves_csv(slurp(dir / "auto.csv"));
  CHECK(curves.size() == 6);
  for (const auto& c : curves) CHECK(c.points.size() == 3);
  CHECK(slurp(dir / "auto_table.csv").rfind("scheme,method,auc,rank\n", 0) == 0);
}

TEST_CASE("campaign lifecycle through the CLI") {
  testing::TempDir dir("cli-camp");
  REQUIRE(cli(dir, "gen-synth --out " + p(dir / "data") +
                       " --width 10 --height 10 --classes 4 --per-class 3").code == 0);
  for (const std::string m : {"oracle", "random"}) {
    REQUIRE(cli(dir, "saliency --data " + p(dir / "data") + " --method " + m + " --out " +
                         p(dir / "sal")).code == 0);
  }
  const std::string store = " --store " + p(dir / "store");
  REQUIRE(cli(dir, "campaign-create" + store + " --id c1 --data " + p(dir / "data") +
                       " --saliency " + p(dir / "sal") +
                       " --methods oracle,random --quota 3 --pairs-per-worker 5 --wrong-choices 2")
              .code == 0);
  CHECK(cli(dir, "campaign-create" + store + " --id c1 --data " + p(dir / "data") + " --saliency " +
                     p(dir / "sal") + " --methods oracle,random").code == 1);

  Run r = cli(dir, "metrics" + store + " --id c1");
  CHECK(r.code == 1);
  CHECK(r.err.find("no completed trials") != std::string::npos);

  r = cli(dir, "simulate" + store + " --id c1 --seed 4");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("trials=72") != std::string::npos);

  r = cli(dir, "metrics" + store + " --id c1 --curves " + p(dir / "crowd.csv") + " --levels 1,3");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("oracle") != std::string::npos);
  CHECK(parse_curves_csv(slurp(dir / "crowd.csv")).size() == 2);

  for (const std::string what : {"snapshot", "events", "table"}) {
    REQUIRE(cli(dir, "export" + store + " --id c1 --what " + what + " --out " + p(dir / "a.out")).code == 0);
    REQUIRE(cli(dir, "export" + store + " --id c1 --what " + what + " --out " + p(dir / "b.out")).code == 0);
    CHECK(slurp(dir / "a.out") == slurp(dir / "b.out"));
    CHECK(!slurp(dir / "a.out").empty());
  }
}

TEST_CASE("options can come from a JSON config file") {
  testing::TempDir dir("cli-config");
  std::ofstream(dir / "gen.json") << R"({"out": ")" << p(dir / "d")
                                  << R"(", "width": 9, "height": 9, "classes": 2, "per-class": 2})";
  Run r = cli(dir, "gen-synth --config " + p(dir / "gen.json"));
  REQUIRE(r.code == 0);
  const Dataset d = load_dataset(dir / "d");
  CHECK(d.items.size() == 4);
  CHECK(d.items[0].image.width == 9);

  r = cli(dir, "gen-synth --config " + p(dir / "gen.json") + " --per-class 3");
  REQUIRE(r.code == 0);
  CHECK(load_dataset(dir / "d").items.size() == 6);
  CHECK(cli(dir, "gen-synth --config " + p(dir / "absent.json")).code == 2);
}
