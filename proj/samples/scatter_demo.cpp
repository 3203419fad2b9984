// Projects the four-quadrant fixture to 2-D three ways and writes one SVG
// scatter per method, each with a CSV twin of the raw coordinates.
//
//   ./scatter_demo [out_dir]

#include <filesystem>
#include <iostream>

#include "fraudbench/report.hpp"
#include "fraudbench/tsne.hpp"

int main(int argc, char** argv) {
  namespace fb = fraudbench;
  const std::filesystem::path out = argc > 1 ? argv[1] : "scatter_out";

  fb::SyntheticSpec spec;
  spec.kind = fb::SyntheticKind::XorQuadrants;
  spec.n_per_class = 100;
  spec.n_features = 4;
  spec.seed = 7;
  const fb::LabeledDataset ds = fb::generate_synthetic(spec);

  try {
    std::filesystem::create_directories(out);

    fb::emit_scatter_svg(fb::pca_2d(ds), (out / "pca.svg").string());
    fb::emit_scatter_svg(fb::truncated_svd_2d(ds), (out / "tsvd.svg").string());

    fb::TsneConfig cfg;
    cfg.perplexity = 20.0;
    cfg.seed = 7;
    const fb::Embedding2D emb = fb::tsne_2d(ds, cfg);
    fb::emit_scatter_svg(emb, (out / "tsne.svg").string());

    std::cout << "wrote pca.svg, tsvd.svg, tsne.svg to " << out << "\n";
    for (const auto& [key, value] : emb.diagnostics)
      std::cout << "tsne " << key << ": " << fb::format_double(value) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
