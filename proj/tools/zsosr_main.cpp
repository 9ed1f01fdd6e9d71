#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zsosr/pipeline.hpp"
#include "zsosr/synthetic.hpp"

using namespace zsosr;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string outdir_override;
  std::string seeds_override;
  std::string mode_override;
  std::string dataset_override;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run configuration JSON")->required();
    cmd->add_option("--outdir", outdir_override, "Override the output directory");
    cmd->add_option("--seeds", seeds_override, "Override seeds, comma-separated");
    cmd->add_option("--mode", mode_override,
                    "Override the split mode (zs-osr|generalized|openness|ood)");
    cmd->add_option("--dataset", dataset_override,
                    "Override the dataset manifest path (or 'synthetic')");
  }

  cli::RunConfig load() const {
    cli::RunConfig cfg = cli::RunConfig::from_file(config_path);
    if (!outdir_override.empty()) cfg.outdir = outdir_override;
    if (!mode_override.empty()) cfg.mode = mode_override;
    if (!dataset_override.empty()) cfg.dataset = dataset_override;
    if (!seeds_override.empty()) {
      cfg.seeds.clear();
      std::stringstream ss(seeds_override);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) cfg.seeds.push_back(std::stoull(tok));
      }
      if (cfg.seeds.empty()) throw std::invalid_argument("--seeds parsed to nothing");
    }
    return cfg;
  }
};

void print_report_line(const eval::MetricsReport& r) {
  std::printf("  seed %llu  %-22s acc %.4f  auroc %.4f  fpr95 %.4f\n",
              static_cast<unsigned long long>(r.seed), r.method.c_str(), r.acc,
              r.auroc, r.fpr95);
}

void print_aggregates(const std::vector<eval::AggregateReport>& aggs) {
  std::printf("%-22s %5s  %18s  %18s  %18s\n", "method", "runs", "acc", "auroc",
              "fpr95");
  for (const auto& a : aggs) {
    std::printf("%-22s %5zu  %8.4f +- %6.4f  %8.4f +- %6.4f  %8.4f +- %6.4f\n",
                a.method.c_str(), a.n_runs, a.acc.mean, a.acc.stddev, a.auroc.mean,
                a.auroc.stddev, a.fpr95.mean, a.fpr95.stddev);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot open-set recognition pipeline"};
  app.require_subcommand(1);

  auto* gen_world =
      app.add_subcommand("gen-world", "Generate the synthetic world bundle");
  std::string world_out = "runs/world";
  std::uint64_t world_seed = 7;
  data::SyntheticWorldConfig world_cfg;
  gen_world->add_option("--out", world_out, "Output directory");
  gen_world->add_option("--seed", world_seed, "World seed");
  gen_world->add_option("--n-seen", world_cfg.n_seen);
  gen_world->add_option("--n-unseen", world_cfg.n_unseen);
  gen_world->add_option("--n-unknown", world_cfg.n_unknown);
  gen_world->add_option("--attribute-dim", world_cfg.attribute_dim);
  gen_world->add_option("--feature-dim", world_cfg.feature_dim);
  gen_world->add_option("--samples-per-class", world_cfg.samples_per_class);
  gen_world->add_option("--noise-scale", world_cfg.noise_scale);

  CommonFlags flags;
  auto add_staged = [&](const char* name, const char* desc) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    flags.attach(cmd);
    return cmd;
  };

  auto* cmd_split = add_staged("split", "Resolve the sample-level split");
  auto* cmd_train_gen =
      add_staged("train-gen", "Train the conditional feature generator");
  auto* cmd_synth = add_staged("synth-data", "Synthesize unseen-class features");
  auto* cmd_closed = add_staged("train-closed", "Train the closed-set classifier");
  auto* cmd_ase = add_staged("learn-ase", "Learn adversarial semantic embeddings");
  auto* cmd_open = add_staged("train-open", "Train the K+1 open-set classifier");
  auto* cmd_score = add_staged("score", "Score the test pool with the open classifier");
  auto* cmd_baseline = add_staged("baseline", "Score the test pool with a baseline");
  std::string baseline_method = "msp";
  cmd_baseline->add_option("--method", baseline_method,
                           "msp|maxlogit|energy|odin|logitnorm");
  auto* cmd_eval = add_staged("eval", "Compute metrics from recorded scores");
  std::string eval_method = "ase";
  cmd_eval->add_option("--method", eval_method, "ase or a baseline name");
  auto* cmd_suite = add_staged("suite", "Full multi-seed protocol with baselines");
  auto* cmd_sweep =
      add_staged("openness-sweep", "Suite across openness configurations");

  try {
    app.parse(argc, argv);

    if (gen_world->parsed()) {
      data::SyntheticWorld world = data::synth_world(world_cfg, world_seed);
      const std::string manifest = cli::write_world_bundle(world, world_out);
      std::printf("wrote %s (%zu samples, %zu classes)\n", manifest.c_str(),
                  world.bundle.num_samples(), world.bundle.num_classes());
      return 0;
    }

    cli::RunConfig cfg = flags.load();
    cli::Pipeline pipeline(cfg);

    auto each_seed = [&](auto&& fn) {
      for (std::uint64_t seed : cfg.seeds) fn(seed);
    };

    if (cmd_split->parsed()) {
      each_seed([&](std::uint64_t s) {
        std::printf("split -> %s\n", pipeline.run_split(s).c_str());
      });
    } else if (cmd_train_gen->parsed()) {
      each_seed([&](std::uint64_t s) {
        std::printf("train-gen -> %s\n", pipeline.run_train_gen(s).c_str());
      });
    } else if (cmd_synth->parsed()) {
      each_seed([&](std::uint64_t s) {
        std::printf("synth-data -> %s\n", pipeline.run_synth_data(s).c_str());
      });
    } else if (cmd_closed->parsed()) {
      each_seed([&](std::uint64_t s) {
        std::printf("train-closed -> %s\n", pipeline.run_train_closed(s).c_str());
      });
    } else if (cmd_ase->parsed()) {
      each_seed([&](std::uint64_t s) {
        std::printf("learn-ase -> %s\n", pipeline.run_learn_ase(s).c_str());
      });
    } else if (cmd_open->parsed()) {
      each_seed([&](std::uint64_t s) {
        std::printf("train-open -> %s\n", pipeline.run_train_open(s).c_str());
      });
    } else if (cmd_score->parsed()) {
      each_seed([&](std::uint64_t s) {
        std::printf("score -> %s\n", pipeline.run_score(s).c_str());
      });
    } else if (cmd_baseline->parsed()) {
      baselines::BaselineSpec spec;
      bool found = false;
      for (const auto& b : cfg.baseline_specs) {
        if (baselines::baseline_name(b.kind) == baseline_method) {
          spec = b;
          found = true;
        }
      }
      if (!found) {
        spec.kind = baselines::baseline_from_name(baseline_method);
        if (spec.kind == baselines::BaselineKind::Odin) spec.temperature = 1000.0;
      }
      each_seed([&](std::uint64_t s) {
        std::printf("baseline %s -> %s\n", baseline_method.c_str(),
                    pipeline.run_baseline(spec, s).c_str());
      });
    } else if (cmd_eval->parsed()) {
      each_seed(
          [&](std::uint64_t s) { print_report_line(pipeline.run_eval(eval_method, s)); });
    } else if (cmd_suite->parsed()) {
      print_aggregates(pipeline.run_suite());
    } else if (cmd_sweep->parsed()) {
      for (const auto& point : pipeline.run_openness_sweep()) {
        std::printf("openness %.3f (%zu unseen / %zu unknown)\n", point.openness,
                    cfg.openness_unseen, point.k_unknown);
        print_aggregates(point.methods);
      }
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << '\n';
    return 1;
  }
}
