// vista: command-line driver for the pipeline and its individual stages.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 stage failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "vista/corpus.hpp"
#include "vista/layout.hpp"
#include "vista/metric.hpp"
#include "vista/neighbors.hpp"
#include "vista/pipeline.hpp"
#include "vista/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
using namespace vista;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kStageFailed = 2;

struct StageArgs {
  std::string in;
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
};

atlas::PipelineConfig config_for(const StageArgs& a) {
  atlas::PipelineConfig cfg = a.config.empty() ? atlas::PipelineConfig{}
                                               : atlas::load_config(a.config);
  if (a.seed) cfg.set_seed(*a.seed);
  return cfg;
}

void add_stage_options(CLI::App* cmd, StageArgs& a, const char* in_help) {
  cmd->add_option("--in", a.in, in_help)->required();
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--config", a.config, "Pipeline config JSON (defaults otherwise)");
  cmd->add_option("--seed", a.seed, "Override the layout and render seed");
}

metric::DistanceMatrix embedding_distances(const std::vector<layout::EmbeddingRow>& rows) {
  std::vector<metric::Point2> pts;
  pts.reserve(rows.size());
  for (const auto& r : rows) pts.push_back(r.p);
  return metric::euclidean_distances(pts);
}

// Reorders `b` to follow the id order of `a`.
std::vector<layout::EmbeddingRow> align(const std::vector<layout::EmbeddingRow>& a,
                                        const std::vector<layout::EmbeddingRow>& b) {
  if (a.size() != b.size()) {
    throw ValidationError("gain: embeddings have " + std::to_string(a.size()) + " and " +
                          std::to_string(b.size()) + " rows");
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!index.emplace(b[i].id, i).second) throw ValidationError("gain: duplicate id " + b[i].id);
  }
  std::vector<layout::EmbeddingRow> out;
  out.reserve(a.size());
  for (const auto& r : a) {
    auto it = index.find(r.id);
    if (it == index.end()) throw ValidationError("gain: id " + r.id + " missing from --b");
    out.push_back(b[it->second]);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic cartography for sparse activation data"};
  app.require_subcommand(1);

  std::string run_config;
  std::optional<std::uint64_t> run_seed;
  bool dry_run = false;
  auto* run = app.add_subcommand("run", "Run every stage and export the atlas bundle");
  run->add_option("--config", run_config, "Pipeline config JSON")->required();
  run->add_option("--seed", run_seed, "Override the layout and render seed");
  run->add_flag("--dry-run", dry_run, "Validate the config and exit");

  StageArgs sel;
  std::optional<std::size_t> sel_dim;
  std::optional<corpus::LatentId> sel_latent;
  std::optional<double> sel_fraction;
  std::optional<std::size_t> sel_count;
  auto* select = app.add_subcommand("select", "Pick the top-activating items for one latent");
  add_stage_options(select, sel, "Corpus JSONL file");
  select->add_option("--dim", sel_dim, "Latent space size");
  select->add_option("--latent", sel_latent, "Latent id");
  auto* frac_opt = select->add_option("--fraction", sel_fraction, "Fraction of the corpus");
  select->add_option("--count", sel_count, "Number of items")->excludes(frac_opt);

  StageArgs lay;
  add_stage_options(app.add_subcommand("layout", "Distances, 2D layout and fidelity curve"), lay,
                    "Directory holding slice.json");
  StageArgs map;
  add_stage_options(app.add_subcommand("map", "Density clusters, connections and render plan"),
                    map, "Directory holding the layout outputs");
  StageArgs ren;
  add_stage_options(app.add_subcommand("render", "Render the panorama from the plan"), ren,
                    "Directory holding map.json");
  StageArgs exp;
  add_stage_options(app.add_subcommand("export", "Write atlas.json and the tile pyramid"), exp,
                    "Directory holding the panorama");

  std::string gain_a, gain_b, gain_out;
  std::vector<double> gain_k;
  unsigned gain_workers = 0;
  auto* gain = app.add_subcommand("gain", "Mutual-kNN gain curve between two embeddings");
  gain->add_option("--a", gain_a, "Embedding CSV (id,x,y)")->required();
  gain->add_option("--b", gain_b, "Embedding CSV (id,x,y)")->required();
  gain->add_option("--k", gain_k, "Comma-separated k fractions")->required()->delimiter(',');
  gain->add_option("--out", gain_out, "Write the CSV here instead of stdout");
  gain->add_option("--workers", gain_workers, "Threads (0 = all cores)");

  synthetic::ClusterSpec spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a clustered synthetic corpus");
  synth->add_option("--out", synth_out, "Corpus JSONL path")->required();
  synth->add_option("--clusters", spec.clusters, "Cluster count");
  synth->add_option("--per-cluster", spec.per_cluster, "Items per cluster");
  synth->add_option("--distractors", spec.distractors, "Items that do not activate the latent");
  synth->add_option("--dim", spec.dim, "Latent space size; the last latent is the probe");
  synth->add_option("--sigma", spec.sigma, "Within-cluster noise");
  synth->add_option("--seed", spec.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*run) {
      auto cfg = atlas::load_config(run_config);
      if (run_seed) cfg.set_seed(*run_seed);
      cfg.validate();
      if (dry_run) {
        std::cout << "config ok\n";
        return kOk;
      }
      const auto bundle = atlas::run_pipeline(cfg);
      std::cout << bundle.manifest.string() << '\n';
    } else if (*select) {
      auto cfg = config_for(sel);
      if (sel_dim) cfg.dim = *sel_dim;
      if (sel_latent) cfg.latent_id = *sel_latent;
      if (sel_fraction) cfg.selection = corpus::SelectionTarget::fraction(*sel_fraction);
      if (sel_count) cfg.selection = corpus::SelectionTarget::count(*sel_count);
      if (cfg.dim == 0) throw ValidationError("select: --dim (or a config) is required");
      atlas::DirectoryLock lock(sel.out);
      atlas::stage_select(cfg, sel.in, sel.out);
    } else if (*app.get_subcommand("layout")) {
      const auto cfg = config_for(lay);
      atlas::DirectoryLock lock(lay.out);
      atlas::stage_layout(cfg, lay.in, lay.out);
    } else if (*app.get_subcommand("map")) {
      const auto cfg = config_for(map);
      atlas::DirectoryLock lock(map.out);
      atlas::stage_map(cfg, map.in, map.out);
    } else if (*app.get_subcommand("render")) {
      const auto cfg = config_for(ren);
      atlas::DirectoryLock lock(ren.out);
      atlas::stage_render(cfg, ren.in, ren.out);
    } else if (*app.get_subcommand("export")) {
      const auto cfg = config_for(exp);
      atlas::DirectoryLock lock(exp.out);
      const auto bundle = atlas::stage_export(cfg, exp.in, exp.out);
      std::cout << bundle.manifest.string() << '\n';
    } else if (*gain) {
      const auto a = layout::read_embedding_csv(gain_a);
      const auto b = align(a, layout::read_embedding_csv(gain_b));
      const auto curve = neighbors::gain_curve(embedding_distances(a), embedding_distances(b),
                                               gain_k, gain_workers);
      if (gain_out.empty()) {
        neighbors::write_gain_csv(curve, std::cout);
      } else {
        neighbors::write_gain_csv(curve, fs::path(gain_out));
      }
    } else if (*synth) {
      corpus::write_corpus(synthetic::clustered_corpus(spec), synth_out);
      std::cout << "latent " << spec.latent() << ", dim " << spec.dim << '\n';
    }
  } catch (const atlas::StageError& e) {
    std::cerr << "vista: " << e.what() << '\n';
    return kStageFailed;
  } catch (const ValidationError& e) {
    std::cerr << "vista: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "vista: " << e.what() << '\n';
    return kStageFailed;
  }
  return kOk;
}
