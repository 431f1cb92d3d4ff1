#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gzsl/gzsl.h"

namespace {

using Json = nlohmann::ordered_json;

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<double> lambda_x;
  std::optional<double> lambda_a;
};

class Failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void check(gzsl_status status) {
  if (status != GZSL_OK) {
    throw Failure(std::string(gzsl_status_name(status)) + " error: " + gzsl_last_error());
  }
}

Json read_config(const std::string& path) {
  if (path.empty()) return Json::object();
  std::ifstream in(path);
  if (!in) throw Failure("cannot open config '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Failure("config '" + path + "' is not valid JSON: " + e.what());
  }
}

// Flags override the file.
Json merged_config(const Options& o) {
  Json j = read_config(o.config);
  if (!j.is_object()) throw Failure("config must be a JSON object");
  if (!o.data.empty()) j["data"] = o.data;
  if (!o.out.empty()) j["out"] = o.out;
  if (o.seed) j["seed"] = *o.seed;
  if (o.mode) j["evaluation"]["mode"] = *o.mode;
  if (o.lambda_x) j["ensemble"]["lambda_x"] = *o.lambda_x;
  if (o.lambda_a) j["ensemble"]["lambda_a"] = *o.lambda_a;
  return j;
}

void print_table(const Json& rows) {
  std::printf("%-18s %8s %8s %8s\n", "method", "seen", "unseen", "H");
  for (const auto& r : rows) {
    std::printf("%-18s %8.1f %8.1f %8.1f\n", r["label"].get<std::string>().c_str(),
                r["seen"].get<double>(), r["unseen"].get<double>(), r["H"].get<double>());
  }
}

void run_command(const std::string& command, const Options& o) {
  gzsl_pipeline* p = nullptr;
  check(gzsl_pipeline_create(merged_config(o).dump().c_str(), &p));
  std::unique_ptr<gzsl_pipeline, decltype(&gzsl_pipeline_free)> guard(p, gzsl_pipeline_free);
  check(gzsl_pipeline_run(p, command.c_str()));
  const Json result = Json::parse(gzsl_pipeline_result(p));
  if (result.contains("rows")) {
    print_table(result["rows"]);
    if (result.contains("ausuc")) std::printf("AUSUC %.1f\n", result["ausuc"].get<double>());
  } else if (command == "ausuc") {
    std::printf("AUSUC %.1f\n", result["ausuc"].get<double>());
  } else {
    std::cout << result.dump(2) << "\n";
  }
}

void make_synthetic(const Options& o) {
  if (o.out.empty()) throw Failure("make-synthetic needs --out");
  Json spec = read_config(o.config);
  if (o.seed) spec["seed"] = *o.seed;
  gzsl_dataset* d = nullptr;
  check(gzsl_dataset_make_synthetic(spec.dump().c_str(), &d));
  std::unique_ptr<gzsl_dataset, decltype(&gzsl_dataset_free)> guard(d, gzsl_dataset_free);
  check(gzsl_dataset_write(d, o.out.c_str()));
  size_t c[5];
  check(gzsl_dataset_summarize(d, c));
  std::printf("seen %zu unseen %zu train %zu test_seen %zu test_unseen %zu\n", c[0], c[1], c[2],
              c[3], c[4]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalised zero-shot learning with a cross-aligned VAE ensemble", "gzsl"};
  app.set_version_flag("--version", std::string(gzsl_version()));
  app.require_subcommand(1);

  Options opts;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--data", opts.data, "GZB dataset directory");
    sub->add_option("--out", opts.out, "output directory");
    sub->add_option("--seed", opts.seed, "master seed");
  };
  const auto add_eval = [&](CLI::App* sub) {
    sub->add_option("--mode", opts.mode, "ensemble|tau1|z-only|xr-only|ar-only")
        ->check(CLI::IsMember({"ensemble", "tau1", "z-only", "xr-only", "ar-only"}));
    sub->add_option("--lambda-x", opts.lambda_x, "weight of the reconstructed-visual classifier");
    sub->add_option("--lambda-a", opts.lambda_a,
                    "weight of the reconstructed-semantic classifier");
  };

  const std::pair<const char*, const char*> commands[] = {
      {"train", "train the dual VAE"},
      {"generate", "generate labelled latent training sets"},
      {"fit-classifiers", "train the z, xr and ar softmax classifiers"},
      {"calibrate", "fit per-classifier temperatures on the holdout"},
      {"evaluate", "seen / unseen / H on the test splits"},
      {"ausuc", "area under the seen-unseen curve"},
      {"distmat", "pairwise class distance matrices as CSV"},
      {"run-all", "every stage, plus the ablation table"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    add_eval(sub);
    sub->callback([&opts, command = std::string(name)] { run_command(command, opts); });
  }
  auto* synth = app.add_subcommand("make-synthetic", "write a synthetic GZB dataset");
  synth->add_option("--config", opts.config, "JSON synthetic spec")->check(CLI::ExistingFile);
  synth->add_option("--out", opts.out, "output directory")->required();
  synth->add_option("--seed", opts.seed, "generator seed");
  synth->callback([&opts] { make_synthetic(opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "gzsl: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
