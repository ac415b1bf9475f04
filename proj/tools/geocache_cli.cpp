#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geocache/geocache.h"

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

int report_failure(geocache_status status) {
  std::fprintf(stderr, "geocache: %s: %s\n", geocache_status_name(status),
               geocache_last_error());
  return status == GEOCACHE_CONFIG_ERROR ? kConfigError : kRuntimeError;
}

struct Common {
  std::string config;
  std::string out;
  std::string seed;
  std::string replicas;
  std::string threads;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", c.out, "Output directory (overrides the config)");
  cmd->add_option("--set", c.overrides, "Extra key=value assignment (repeatable)");
}

// Loads the config and applies command-line overrides.
geocache_status load(const Common& c, geocache_config** config) {
  geocache_status st = geocache_config_read(c.config.c_str(), config);
  if (st != GEOCACHE_OK) return st;
  auto set = [&](const char* key, const std::string& value) {
    return value.empty() ? GEOCACHE_OK : geocache_config_set(*config, key, value.c_str());
  };
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      st = geocache_config_set(*config, kv.c_str(), "");
    } else {
      st = geocache_config_set(*config, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    }
    if (st != GEOCACHE_OK) return st;
  }
  if ((st = set("seed", c.seed)) != GEOCACHE_OK) return st;
  if ((st = set("output", c.out)) != GEOCACHE_OK) return st;
  if ((st = set("replicas", c.replicas)) != GEOCACHE_OK) return st;
  return set("threads", c.threads);
}

std::string output_dir(const geocache_config* config) {
  char* text = nullptr;
  if (geocache_config_output(config, &text) != GEOCACHE_OK) return "out";
  std::string dir = text;
  geocache_string_free(text);
  return dir;
}

int cmd_topology(const Common& c, unsigned long long replica) {
  geocache_config* config = nullptr;
  geocache_status st = load(c, &config);
  if (st != GEOCACHE_OK) return report_failure(st);
  geocache_topology* topo = nullptr;
  st = geocache_config_topology(config, replica, &topo);
  if (st == GEOCACHE_OK) {
    const std::string dir = output_dir(config);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    const std::string sites = (std::filesystem::path(dir) / "sites.csv").string();
    const std::string cells = (std::filesystem::path(dir) / "cells.csv").string();
    st = geocache_topology_write_sites(topo, sites.c_str());
    if (st == GEOCACHE_OK) st = geocache_topology_write_cells(topo, cells.c_str());
    size_t count = 0;
    double covered = 0.0;
    if (st == GEOCACHE_OK) st = geocache_topology_cell_count(topo, &count);
    if (st == GEOCACHE_OK) st = geocache_topology_covered_fraction(topo, &covered);
    if (st == GEOCACHE_OK)
      std::printf("caches=%zu cells=%zu covered_fraction=%.6f\nwrote %s and %s\n",
                  geocache_topology_size(topo), count, covered, sites.c_str(), cells.c_str());
  }
  geocache_topology_free(topo);
  geocache_config_free(config);
  return st == GEOCACHE_OK ? 0 : report_failure(st);
}

int cmd_run(const Common& c) {
  geocache_config* config = nullptr;
  geocache_status st = load(c, &config);
  if (st != GEOCACHE_OK) return report_failure(st);
  geocache_results* results = nullptr;
  st = geocache_experiment_run(config, &results);
  if (st == GEOCACHE_OK) {
    const std::string dir = output_dir(config);
    st = geocache_results_emit(results, dir.c_str());
    if (st == GEOCACHE_OK) {
      std::printf("%-14s %8s %14s %12s %10s\n", "algorithm", "replica", "hit", "iterations",
                  "seconds");
      for (size_t i = 0; i < geocache_results_count(results); ++i) {
        const char* name = nullptr;
        uint64_t replica = 0, iterations = 0;
        double hit = 0.0, seconds = 0.0;
        geocache_results_get(results, i, &name, &replica, &hit, &iterations, &seconds);
        std::printf("%-14s %8llu %14.10f %12llu %10.3f\n", name,
                    static_cast<unsigned long long>(replica), hit,
                    static_cast<unsigned long long>(iterations), seconds);
      }
      std::printf("wrote %s\n", dir.c_str());
    }
  }
  geocache_results_free(results);
  geocache_config_free(config);
  return st == GEOCACHE_OK ? 0 : report_failure(st);
}

int cmd_report(const std::vector<std::string>& paths) {
  std::vector<const char*> raw;
  for (const auto& p : paths) raw.push_back(p.c_str());
  char* text = nullptr;
  const geocache_status st = geocache_report(raw.data(), raw.size(), &text);
  if (st != GEOCACHE_OK) return report_failure(st);
  std::fputs(text, stdout);
  geocache_string_free(text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cache placement on overlapping coverage networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", geocache_version());

  Common topo_opts;
  unsigned long long replica = 0;
  auto* topology = app.add_subcommand("topology", "Build a topology and export sites and cells");
  add_common(topology, topo_opts);
  topology->add_option("--replica", replica, "Replica whose topology is built");

  Common run_opts;
  auto* run = app.add_subcommand("run", "Run an experiment and write CSV series");
  add_common(run, run_opts);
  run->add_option("--replicas", run_opts.replicas, "Number of replicas (overrides the config)");
  run->add_option("--threads", run_opts.threads, "Worker threads (0 = all cores)");

  std::vector<std::string> summaries;
  auto* report = app.add_subcommand("report", "Compare summary.csv files");
  report->add_option("summaries", summaries, "summary.csv files")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  if (*topology) return cmd_topology(topo_opts, replica);
  if (*run) return cmd_run(run_opts);
  return cmd_report(summaries);
}
