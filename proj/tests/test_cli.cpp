#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"
#include "fld/signal/synthetic.hpp"
#include "fld/training/checkpoint.hpp"
#include "json.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using fld::cli::run;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = run(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Scratch directory with a tiny 4-dim corpus and a small training config.
struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("fld_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    json m{{"dt", 0.02}, {"state_dim", 4}, {"trajectories", json::array()}};
    for (double f : {2.0, 3.0}) {
      fld::signal::SyntheticMotionSpec s;
      s.base_frequency = f;
      s.frames = 200;
      s.amplitude = {1.0, 0.5, 0.8, 0.3};
      s.phase_offset = {0.0, 0.2, 0.4, 0.7};
      s.mean = {0.5, 0.0, -1.0, 0.2};
      s.label = "f" + std::to_string(static_cast<int>(f));
      m["trajectories"].push_back({{"synthetic", fld::signal::to_json(s)}});
      if (f == 2.0) std::ofstream(dir / "held.json") << fld::signal::to_json(s).dump();
    }
    std::ofstream(dir / "corpus.json") << m.dump();
    std::ofstream(dir / "config.json") << json{
        {"train", {{"max_iterations", 4}, {"lr", 3e-3}, {"epochs", 1}, {"mini_batches", 1}, {"batch_size", 8},
                   {"validation_fraction", 0.0}}},
        {"model", {{"fld", {{"channels", 2}, {"window", 16}, {"horizon", 3}, {"hidden_channels", 4}, {"kernel_size", 5}}}}},
        {"curriculum", {{"iterations", 3}, {"episodes_per_iteration", 20}, {"preset", 10}}}}
                                                 .dump();
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

const std::string& trained_fld() {
  static const std::string out = [] {
    const Result r = cli({"train", "--corpus", ws().p("corpus.json"), "--config", ws().p("config.json"), "--seed", "3",
                          "--out", ws().p("fld")});
    REQUIRE(r.code == 0);
    return ws().p("fld");
  }();
  return out;
}

}  // namespace

TEST_CASE("cli: usage errors exit with 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  const Result missing = cli({"train", "--corpus", ws().p("no_such.json")});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("no_such.json") != std::string::npos);
  CHECK(cli({"curriculum", "--sampler", "bandit"}).code == 2);
  CHECK(cli({"curriculum", "--preset", "30"}).code == 2);
  CHECK(cli({"gate", "--checkpoint", ws().p("corpus.json")}).code == 2);  // neither --epsilon nor --calibrate
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("cli: FLD_THREADS caps the worker count") {
  ::setenv("FLD_THREADS", "1", 1);
  CHECK(fld::cli::worker_threads(8) == 1);
  ::setenv("FLD_THREADS", "lots", 1);
  CHECK(cli({"curriculum", "--iters", "0", "--out", ws().p("cur_bad")}).code == 2);
  ::unsetenv("FLD_THREADS");
  CHECK(fld::cli::worker_threads(1) == 1);
  CHECK(fld::cli::worker_threads(0) == 1);
}

TEST_CASE("cli: train writes checkpoint, loss and manifest") {
  const fs::path out = trained_fld();
  CHECK(fs::exists(out / "model.ckpt"));
  const std::string loss = slurp(out / "loss.csv");
  CHECK(loss.find("iteration,total,L_0,L_1,L_2,L_3") != std::string::npos);

  const auto m = fld::cli::read_manifest(out / "manifest.json");
  CHECK(m.command == "train");
  CHECK(m.seed == 3);
  CHECK(m.inputs.size() == 2);
  CHECK(m.outputs.size() == 2);
  // config file values, then the flag on top
  CHECK(m.config["train"]["max_iterations"] == 4);
  CHECK(m.config["train"]["seed"] == 3);
  CHECK(m.config["model"]["fld"]["channels"] == 2);

  const Result again = cli({"train", "--corpus", ws().p("corpus.json"), "--config", ws().p("config.json"), "--seed", "3",
                            "--iterations", "2", "--out", ws().p("fld2")});
  REQUIRE(again.code == 0);
  CHECK(fld::cli::read_manifest(ws().p("fld2") + "/manifest.json").config["train"]["max_iterations"] == 2);
}

TEST_CASE("cli: pae is fld with the horizon forced to zero") {
  const std::vector<std::string> base{"--corpus", ws().p("corpus.json"), "--config", ws().p("config.json"), "--seed", "1"};
  auto with = [&](std::vector<std::string> extra, const std::string& out) {
    std::vector<std::string> a{"train"};
    a.insert(a.end(), base.begin(), base.end());
    a.insert(a.end(), extra.begin(), extra.end());
    a.insert(a.end(), {"--out", ws().p(out)});
    return cli(a);
  };
  REQUIRE(with({"--model", "pae"}, "pae").code == 0);
  REQUIRE(with({"--model", "fld", "--horizon", "0"}, "fld0").code == 0);
  CHECK(slurp(ws().p("pae") + "/loss.csv") == slurp(ws().p("fld0") + "/loss.csv"));
  auto a = fld::training::load_checkpoint(ws().p("pae") + "/model.ckpt");
  auto b = fld::training::load_checkpoint(ws().p("fld0") + "/model.ckpt");
  CHECK(a.settings().fld.horizon == 0);
  const auto pa = a.named_arrays(), pb = b.named_arrays();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second->storage() == pb[i].second->storage());
}

TEST_CASE("cli: eval, manifold and synth") {
  const std::string ckpt = trained_fld() + "/model.ckpt";
  const Result e = cli({"eval", "--checkpoints", ckpt, "--trajectory", ws().p("held.json"), "--horizons", "3", "--out",
                        ws().p("eval.csv")});
  REQUIRE(e.code == 0);
  const std::string csv = slurp(ws().p("eval.csv"));
  CHECK(csv.find("model,horizon,error") != std::string::npos);
  CHECK(fs::exists(ws().p("eval.csv.manifest.json")));
  CHECK(e.code == cli({"eval", "--checkpoints", ckpt, "--trajectory", ws().p("held.json"), "--horizons", "3", "--out",
                       ws().p("eval2.csv")})
                      .code);
  CHECK(slurp(ws().p("eval2.csv")) == csv);
  // horizon beyond the trajectory is a runtime failure
  const Result too_far = cli({"eval", "--checkpoints", ckpt, "--trajectory", ws().p("held.json"), "--horizons", "500"});
  CHECK(too_far.code == 1);
  CHECK(too_far.err.find("error:") != std::string::npos);

  const Result man = cli({"manifold", "--checkpoint", ckpt, "--corpus", ws().p("corpus.json"), "--out", "-",
                          "--manifest", ws().p("manifold.manifest.json")});
  REQUIRE(man.code == 0);
  CHECK(man.out.find("\nx,y,trajectory,label,frame") != std::string::npos);

  const Result s = cli({"synth", "--checkpoint", ckpt, "--theta-from", ws().p("held.json"), "--steps", "30", "--out",
                        ws().p("synth.csv")});
  REQUIRE(s.code == 0);
  std::istringstream lines(slurp(ws().p("synth.csv")));
  std::string line;
  int rows = 0;
  while (std::getline(lines, line))
    if (!line.empty() && line[0] != '#' && std::isalpha(static_cast<unsigned char>(line[0])) == 0) ++rows;
  CHECK(rows == 30);

  const auto sm = fld::cli::read_manifest(ws().p("synth.csv.manifest.json"));
  std::ofstream(ws().p("latent.json")) << json{{"phi", sm.config["phi0"]},
                                                {"f", sm.config["theta"]["f"]},
                                                {"a", sm.config["theta"]["a"]},
                                                {"b", sm.config["theta"]["b"]}}
                                                  .dump();
  REQUIRE(cli({"synth", "--checkpoint", ckpt, "--theta-from", ws().p("latent.json"), "--steps", "30", "--out",
               ws().p("synth_latent.csv")})
              .code == 0);
  CHECK(slurp(ws().p("synth_latent.csv")) == slurp(ws().p("synth.csv")));

  const Result blend = cli({"synth", "--checkpoint", ckpt, "--theta-from", ws().p("held.json"), "--interp-to",
                            ws().p("latent.json"), "--steps", "10"});
  CHECK(blend.code == 0);

  std::ofstream(ws().p("bad.ckpt")) << "FLDCKPT garbage";
  const Result bad = cli({"synth", "--checkpoint", ws().p("bad.ckpt"), "--theta-from", ws().p("held.json"), "--steps", "3"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("bad.ckpt") != std::string::npos);
}

TEST_CASE("cli: gate reads frames from stdin") {
  const std::string ckpt = trained_fld() + "/model.ckpt";
  std::string frames;
  for (int t = 0; t < 25; ++t) frames += "0.5,0.1,-1.0,0.2\n";
  frames += "\n";  // missing frame
  frames += "0.5,0.1,-1.0,0.2\n";
  const Result r = cli({"gate", "--checkpoint", ckpt, "--epsilon", "1e9", "--manifest", ws().p("gate.manifest.json")},
                       frames);
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::vector<json> d;
  std::string line;
  while (std::getline(lines, line)) d.push_back(json::parse(line));
  REQUIRE(d.size() == 27);
  CHECK(d[0]["verdict"] == "no_input");
  // window 16 plus horizon 3 frames fill the buffer
  CHECK(d[18]["verdict"] == "accepted");
  CHECK(d[25]["verdict"] == "no_input");
  CHECK(d[26]["verdict"] == "no_input");
  const auto m = fld::cli::read_manifest(ws().p("gate.manifest.json"));
  CHECK(m.config["gate"]["epsilon"] == 1e9);

  const Result cal = cli({"gate", "--checkpoint", ckpt, "--calibrate", ws().p("corpus.json"), "--stride", "10",
                          "--manifest", ws().p("gate2.manifest.json")},
                         frames);
  CHECK(cal.code == 0);
  CHECK(cal.err.find("epsilon") != std::string::npos);

  const Result ragged = cli({"gate", "--checkpoint", ckpt, "--epsilon", "1", "--manifest", ws().p("g3.json")}, "1,2\n");
  CHECK(ragged.code == 1);
}

TEST_CASE("cli: curriculum traces, zero iterations and replay") {
  const Result zero = cli({"curriculum", "--sampler", "random", "--iters", "0", "--out", ws().p("cur0")});
  REQUIRE(zero.code == 0);
  const std::string empty = slurp(ws().p("cur0") + "/trace_random_p60_s0.csv");
  CHECK(empty.find("iteration,sampler,seed,r,alp,gamma,region_id") != std::string::npos);

  const std::vector<std::string> args{"curriculum", "--config", ws().p("config.json"), "--sampler", "alpgmm",
                                      "--seeds",    "2",        "--seed",              "5",         "--out",
                                      ws().p("cur")};
  const Result r = cli(args);
  REQUIRE(r.code == 0);
  const std::string s5 = slurp(ws().p("cur") + "/trace_alpgmm_p10_s5.csv");
  const std::string s6 = slurp(ws().p("cur") + "/trace_alpgmm_p10_s6.csv");
  CHECK(s5 != s6);
  CHECK(std::count(s5.begin(), s5.end(), '\n') == 2 + 3 * 20);
  CHECK(fs::exists(ws().p("cur") + "/summary_alpgmm_p10.csv"));
  CHECK(fs::exists(ws().p("cur") + "/landscape.json"));

  const Result replay = cli({"replay", ws().p("cur") + "/manifest.json", "--verify"});
  CHECK(replay.code == 0);
  CHECK(replay.err.find("4/4 outputs identical") != std::string::npos);

  // from the saved landscape, with oracle labels
  const Result o = cli({"curriculum", "--landscape", ws().p("cur") + "/landscape.json", "--iters", "1", "--episodes",
                        "10", "--oracle", "--oracle-epochs", "1", "--out", ws().p("cur_oracle")});
  REQUIRE(o.code == 0);
  CHECK(slurp(ws().p("cur_oracle") + "/trace_alpgmm_p10_s0.csv").find(",oracle_label") != std::string::npos);

  std::ofstream(ws().p("config.json"), std::ios::app) << " ";
  const Result changed = cli({"replay", ws().p("cur") + "/manifest.json"});
  CHECK(changed.code == 1);
}
