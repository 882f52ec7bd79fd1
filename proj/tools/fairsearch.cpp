// fairsearch command-line front end.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 runtime error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fairsearch/fairsearch.hpp"
#include "fairsearch/serve.hpp"

namespace fs = fairsearch;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

std::vector<fs::MetricId> parse_metric_list(const std::string& text) {
  std::vector<fs::MetricId> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(fs::parse_metric(item));
  }
  return out;
}

int run_search(const std::string& data, const std::string& schema_path, const std::string& space_path,
               std::optional<std::uint64_t> seed, std::size_t parallel, const std::string& out_csv,
               const std::string& out_plot) {
  auto space = fs::SearchSpace::load(space_path);
  if (seed) space.seed = *seed;
  const auto ds = fs::load_dataset(data, fs::DatasetSchema::load(schema_path));
  std::cerr << "loaded " << ds.rows() << " rows; " << fs::config_count(space) << " configurations\n";
  const auto results = fs::run_search(space, ds, parallel, [](std::size_t done, std::size_t total) {
    std::cerr << "\r[" << done << "/" << total << "]" << std::flush;
  });
  std::cerr << "\n";
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.failed;
  fs::write_results_csv(results, out_csv);
  fs::write_plot_document(results, space.metrics, out_plot);
  std::cout << results.size() << " configurations evaluated, " << failed << " failed\n"
            << "results: " << out_csv << "\nplot: " << out_plot << "\n";
  return 0;
}

int run_frontier(const std::string& csv_path, const std::string& metrics_text, const std::string& out) {
  const auto metrics = parse_metric_list(metrics_text);
  if (metrics.size() < 2) throw std::invalid_argument("--metrics needs at least two metric ids");
  const auto table = fs::read_results_csv(csv_path);
  for (auto id : metrics) {
    if (std::find(table.metrics.begin(), table.metrics.end(), id) == table.metrics.end()) {
      throw std::invalid_argument("metric " + std::string(fs::to_string(id)) + " is not in " + csv_path);
    }
  }
  const auto front = fs::pareto_front(metrics, table.rows);
  std::vector<fs::EvaluatedModel> kept;
  for (const auto& r : table.rows) {
    if (std::binary_search(front.frontier.begin(), front.frontier.end(), r.config.config_id)) kept.push_back(r);
  }
  fs::csv::write_file(out, fs::results_to_csv(kept, table.metrics));
  std::cout << front.frontier.size() << " of " << table.rows.size() << " configurations on the frontier ("
            << front.excluded.size() << " excluded)\n";
  return 0;
}

int run_synth(std::size_t n, double bias, std::uint64_t seed, const std::string& out) {
  const auto ds = fs::make_synthetic(n, bias, seed);
  std::filesystem::path schema_path(out);
  schema_path.replace_extension(".schema.json");
  fs::csv::write_file(out, fs::dataset_to_csv(ds));
  fs::csv::write_file(schema_path.string(), ds.schema().to_json().dump(2) + "\n");
  std::cout << "data: " << out << "\nschema: " << schema_path.string() << "\n";
  return 0;
}

int run_serve(const std::string& plot, const std::string& ui, int port, const std::string& host) {
  fs::PlotServer server(plot, ui);
  const int bound = server.bind(port, host);
  std::cout << "serving on http://" << host << ":" << bound << "/\n" << std::flush;
  server.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-aware model search"};
  app.require_subcommand(1);

  std::string data, schema, space, out_csv, out_plot;
  std::optional<std::uint64_t> seed;
  std::size_t parallel = 1;
  auto* search = app.add_subcommand("search", "Train and score every pipeline in a search space");
  search->add_option("--data", data, "Input CSV")->required()->check(CLI::ExistingFile);
  search->add_option("--schema", schema, "Dataset schema JSON")->required()->check(CLI::ExistingFile);
  search->add_option("--space", space, "Search space JSON")->required()->check(CLI::ExistingFile);
  search->add_option("--seed", seed, "Override the space's master seed");
  search->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
  search->add_option("--out-csv", out_csv, "Results CSV")->required();
  search->add_option("--out-plot", out_plot, "Plot document JSON")->required();

  std::string frontier_csv, metrics, frontier_out;
  auto* frontier = app.add_subcommand("frontier", "Extract the Pareto-optimal rows of a results CSV");
  frontier->add_option("--csv", frontier_csv, "Results CSV")->required()->check(CLI::ExistingFile);
  frontier->add_option("--metrics", metrics, "Comma-separated metric ids (at least two)")->required();
  frontier->add_option("--out", frontier_out, "Output CSV")->required();

  std::size_t n = 0;
  double bias = 0.0;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic biased dataset and its schema");
  synth->add_option("--n", n, "Row count")->required();
  synth->add_option("--bias", bias, "Flip probability for unprivileged favorable labels")->required();
  synth->add_option("--seed", synth_seed, "Seed")->required();
  synth->add_option("--out", synth_out, "Output CSV; the schema goes next to it as <stem>.schema.json")->required();

  std::string plot, ui, host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve a plot document and the explorer UI");
  serve->add_option("--plot", plot, "Plot document JSON")->required()->check(CLI::ExistingFile);
  serve->add_option("--ui", ui, "UI bundle directory")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--port", port, "Port");
  serve->add_option("--host", host, "Interface to bind");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*search) return run_search(data, schema, space, seed, parallel, out_csv, out_plot);
    if (*frontier) return run_frontier(frontier_csv, metrics, frontier_out);
    if (*synth) return run_synth(n, bias, synth_seed, synth_out);
    if (*serve) return run_serve(plot, ui, port, host);
  } catch (const fs::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
