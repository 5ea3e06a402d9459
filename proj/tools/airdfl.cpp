// Command-line front end: run experiments, print the optimum, evaluate the
// convergence envelope, and dump schedules, topologies and data.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "airdfl/error.hpp"
#include "airdfl/harness.hpp"
#include "airdfl/kernels.hpp"

using namespace airdfl;

namespace {

struct Overrides {
  std::string config;
  std::vector<std::pair<std::string, std::string>> flags;  // key, value
  std::vector<std::string> sets;                            // key=value
  std::vector<std::unique_ptr<std::string>> storage;

  void flag(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    storage.push_back(std::make_unique<std::string>());
    std::string* slot = storage.back().get();
    app->add_option(name, *slot, help)->each([this, key](const std::string& v) {
      flags.emplace_back(key, v);
    });
  }

  void attach(CLI::App* app) {
    app->add_option("--config", config, "key = value config file");
    flag(app, "--seed", "seed", "master seed");
    flag(app, "--variant", "variant", "dsgd | dsgt | dsgt-vr");
    flag(app, "--consensus", "consensus", "error-free | aircomp");
    flag(app, "--devices", "devices", "number of devices N");
    flag(app, "--iters", "iters", "iterations T");
    flag(app, "--alpha", "alpha", "step size, or auto");
    flag(app, "--noise-dbm", "noise_dbm", "receiver noise power in dBm (0 dBm = 1.0)");
    flag(app, "--power", "power", "peak transmit power P");
    flag(app, "--gamma", "gamma", "channel gain threshold");
    flag(app, "--schedule", "schedule", "naive | coloring");
    flag(app, "--topology", "topology", "rayleigh | ring | complete | path | erdos-renyi | file");
    flag(app, "--repetitions", "repetitions", "seed-averaged repetitions");
    flag(app, "--threads", "threads", "worker threads");
    flag(app, "--record-every", "record_every", "record metrics every k iterations");
    flag(app, "--per-device", "per_device", "samples per device, or all");
    app->add_option("--set", sets, "extra key=value settings")->take_all();
  }

  ExperimentConfig build() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_config(config);
    for (const auto& [k, v] : flags) apply_setting(c, k, v);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw InvalidInput("--set expects key=value, got '" + kv + "'");
      apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    return c;
  }
};

// Writes to `path`, or stdout when it is empty or "-".
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  fn(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized learning over wireless D2D networks with over-the-air consensus"};
  app.require_subcommand(1);
  std::string isa;
  app.add_option("--isa", isa, "kernel variant: scalar | avx2 (default: best available)");

  // run
  Overrides run_o;
  std::string out_path, summary_path;
  auto* run = app.add_subcommand("run", "run an experiment and write the metrics CSV");
  run_o.attach(run);
  run->add_option("--out", out_path, "metrics CSV (default: config 'out', else stdout)");
  run->add_option("--summary", summary_path, "summary file (default: stderr)");

  // oracle
  Overrides oracle_o;
  auto* oracle = app.add_subcommand("oracle", "print F(theta*) of the centralized problem");
  oracle_o.attach(oracle);

  // bound
  Overrides bound_o;
  double rho = 0.0, model_bound = 0.0;
  std::optional<double> c_opt, smooth_opt;
  std::uint64_t bound_t = 100, bound_every = 1;
  auto* bound = app.add_subcommand("bound", "evaluate the convergence envelope over t = 0..T");
  bound_o.attach(bound);
  bound->add_option("--rho", rho, "contraction factor in (0, 1)")->required();
  bound->add_option("--model-bound", model_bound, "model norm bound B")->required();
  bound->add_option("--c", c_opt, "initial distance constant (default: from theta0 = 0)");
  bound->add_option("--smoothness", smooth_opt, "L (default: 1/4 + lambda)");
  bound->add_option("-T,--horizon", bound_t, "last t to print");
  bound->add_option("--every", bound_every, "print every k-th t");

  // schedule-dump
  Overrides sched_o;
  std::string sched_out;
  auto* sched = app.add_subcommand("schedule-dump", "write 'device block' lines for the topology");
  sched_o.attach(sched);
  sched->add_option("--out", sched_out, "output file (default: stdout)");

  // topology-dump
  Overrides topo_o;
  std::string topo_out;
  auto* topo = app.add_subcommand("topology-dump", "write the edge list with mixing weights");
  topo_o.attach(topo);
  topo->add_option("--out", topo_out, "output file (default: stdout)");

  // export-data
  Overrides data_o;
  std::string data_out;
  auto* data = app.add_subcommand("export-data", "write the partitioned training set as a text matrix");
  data_o.attach(data);
  data->add_option("--out", data_out, "output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!isa.empty()) select_isa(parse_isa(isa));

    if (*run) {
      const ExperimentConfig cfg = run_o.build();
      const ExperimentResult result = run_experiment(cfg);
      const std::string path = out_path.empty() ? cfg.out.string() : out_path;
      emit(path, [&](std::ostream& os) { write_metrics_csv(os, result.records); });
      if (summary_path.empty()) {
        write_summary(std::cerr, cfg, result.summary);
      } else {
        emit(summary_path, [&](std::ostream& os) { write_summary(os, cfg, result.summary); });
      }
    } else if (*oracle) {
      const ExperimentConfig cfg = oracle_o.build();
      const ProblemInstance inst = build_instance(cfg);
      std::printf("%.17g\n", inst.optimum.loss);
      std::fprintf(stderr, "grad_norm=%.3g iterations=%zu\n", inst.optimum.grad_norm,
                   inst.optimum.iterations);
    } else if (*bound) {
      const ExperimentConfig cfg = bound_o.build();
      TheoremBound b{rho, 0.0, cfg.n_devices, cfg.dimension, cfg.noise_power, model_bound, cfg.gamma,
                     cfg.peak_power};
      double L = 0.0;
      if (c_opt && smooth_opt && cfg.source == DataSource::synthetic) {
        b.c = *c_opt;
        L = *smooth_opt;
      } else {
        const ProblemInstance inst = build_instance(cfg);
        b.dimension = inst.problem.dimension();
        const std::vector<std::vector<double>> theta0(cfg.n_devices,
                                                      std::vector<double>(b.dimension, 0.0));
        b.c = c_opt ? *c_opt : initial_distance_constant(theta0, inst.optimum.theta);
        L = smooth_opt ? *smooth_opt : inst.problem.smoothness();
      }
      std::printf("t,bound\n");
      for (std::uint64_t t = 0; t <= bound_t; t += std::max<std::uint64_t>(bound_every, 1)) {
        std::printf("%llu,%.17g\n", static_cast<unsigned long long>(t), evaluate_bound(b, L, t));
      }
      std::fprintf(stderr, "noise_floor=%.17g\n", bound_noise_floor(b, L));
    } else if (*sched) {
      const ExperimentConfig cfg = sched_o.build();
      const NetworkGraph g = build_topology(cfg);
      const Schedule s = make_schedule(g, cfg.schedule);
      emit(sched_out, [&](std::ostream& os) { write_schedule(os, s); });
      std::fprintf(stderr, "blocks=%zu\n", s.n_blocks());
    } else if (*topo) {
      const ExperimentConfig cfg = topo_o.build();
      const NetworkGraph g = build_topology(cfg);
      const MixingMatrix w = laplacian_mixing(g);
      emit(topo_out, [&](std::ostream& os) { write_edge_list(os, g, &w); });
      std::fprintf(stderr, "beta=%.17g\n", w.beta());
    } else if (*data) {
      const ExperimentConfig cfg = data_o.build();
      const ProblemInstance inst = build_instance(cfg);
      emit(data_out, [&](std::ostream& os) { write_text_matrix(os, inst.problem); });
    }
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s (alpha=%g, %zu good records)\n", e.what(), e.alpha(),
                 e.last_good().size());
    if (*run && !e.last_good().empty()) {
      emit(out_path, [&](std::ostream& os) { write_metrics_csv(os, e.last_good()); });
    }
    return 3;
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
