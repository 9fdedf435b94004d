#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "simulation.hpp"
#include "survtransport/cli.hpp"

// Writes an ACTG-like synthetic trial plus one transport config per bundled
// population summary.
int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic demo trial and run configs"};
  std::string out = "demo";
  std::string summaries = SURVTRANSPORT_SUMMARY_DIR;
  std::size_t n_per_arm = 527;
  std::uint64_t seed = 175;
  app.add_option("--out", out, "Output directory");
  app.add_option("--summaries", summaries, "Directory holding the population summary files");
  app.add_option("--n-per-arm", n_per_arm, "Trial subjects per arm");
  app.add_option("--seed", seed, "Random seed");
  CLI11_PARSE(app, argc, argv);

  namespace cli = survtransport::cli;
  using nlohmann::json;
  try {
    const std::filesystem::path dir(out);
    cli::write_text(dir / "trial.csv", cli::to_csv(survtransport::testing::make_actg_like(n_per_arm, seed)));
    json schema = {{"time", "time"}, {"event", "event"}, {"arm", "arm"}, {"covariates", json::array()}};
    for (const auto& c : survtransport::testing::actg_schema().covariates) {
      if (c.categorical)
        schema["covariates"].push_back({{"name", c.name},
                                        {"type", "categorical"},
                                        {"levels", c.levels},
                                        {"reference", c.reference},
                                        {"ordinal", c.ordinal}});
      else
        schema["covariates"].push_back(c.name);
    }
    for (const char* population : {"us_early_stage", "thailand", "ethiopia"}) {
      const json cfg = {{"trial", "trial.csv"},
                        {"external",
                         {{"summary", std::filesystem::absolute(std::filesystem::path(summaries) /
                                                                (std::string(population) + ".json"))
                                          .string()},
                          {"copula", "trial"}}},
                        {"schema", schema},
                        {"arms", {"ZDV+ddI", "ZDV"}},
                        {"horizon", 24},
                        {"seed", seed},
                        {"output_dir", std::string("out_") + population}};
      cli::write_text(dir / (std::string(population) + ".json"), cfg.dump(2) + "\n");
    }
    std::cout << "wrote " << (dir / "trial.csv").string() << " and three configs\n";
  } catch (const std::exception& e) {
    std::cerr << "make_demo_data: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
