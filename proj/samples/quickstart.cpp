// Smallest end-to-end run: generate a two-blob dataset, benchmark a linear
// model against the attention classifier, print the comparison table.
//
//   ./quickstart [out_dir]

#include <iostream>

#include "fraudbench/pipeline.hpp"

int main(int argc, char** argv) {
  namespace fb = fraudbench;

  fb::ExperimentConfig cfg;
  cfg.synth = "blobs";
  cfg.synth_n = 200;
  cfg.synth_seed = 1;
  cfg.outliers = false;
  cfg.test_fraction = 0.2;
  cfg.models = {{"logistic", {}},
                {"transformer", {{"epochs", 10.0}, {"d_model", 16.0},
                                 {"n_heads", 2.0}, {"n_layers", 1.0},
                                 {"d_ff", 32.0}}}};
  cfg.out_dir = argc > 1 ? argv[1] : "quickstart_out";

  try {
    const fb::PipelineResult result = fb::run_pipeline(cfg);
    std::cout << fb::table_to_markdown(result.table) << "\n";
    std::cout << "artifacts in " << cfg.out_dir << ":\n";
    for (const std::string& path : result.artifacts)
      std::cout << "  " << path << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
