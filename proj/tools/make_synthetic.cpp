// Writes the seeded synthetic tables used by the sample configs and the
// acceptance suite as CSV.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "discover/synthetic.hpp"

int main(int argc, char** argv) {
  using namespace discover;
  CLI::App app{"Write a seeded synthetic CSV"};
  std::string kind = "planted";
  std::string out;
  std::uint64_t seed = 1;
  synthetic::PlantedSpec spec;
  std::size_t features = 30;
  app.add_option("kind", kind, "planted | noise")->check(CLI::IsMember({"planted", "noise"}));
  app.add_option("--out", out, "Output CSV")->required();
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--rows", spec.rows, "Row count");
  app.add_option("--noise-features", spec.noise_features, "Extra uniform features (planted)");
  app.add_option("--shift", spec.shift, "Mean shift inside the subgroup (planted)");
  app.add_option("--features", features, "Feature count (noise)");
  CLI11_PARSE(app, argc, argv);

  const Table t = kind == "planted" ? synthetic::planted_table(seed, spec)
                                    : synthetic::noise_table(seed, spec.rows, features);
  std::ofstream f(out);
  if (!f) {
    std::cerr << "make_synthetic: cannot write " << out << "\n";
    return 3;
  }
  write_csv(t, f);
  return f.good() ? 0 : 3;
}
