#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vista/atlas.hpp"
#include "vista/corpus.hpp"
#include "vista/error.hpp"
#include "vista/layout.hpp"
#include "vista/metric.hpp"
#include "vista/renderer.hpp"

namespace vista::atlas {

struct CartographyParams {
  std::size_t grid_w = 256;
  /// 0 selects default_bandwidth (2% of the bounds diagonal).
  double bandwidth = 0.0;
  double padding = 0.0;
  double quantile = 0.6;
  std::size_t tiles_x = 16;
  std::size_t tiles_y = 9;
  std::size_t min_points = 4;
  /// Cap on prompts rotated per region, 0 = every representative.
  std::size_t max_representatives = 0;

  void validate() const;
};

struct PipelineConfig {
  std::filesystem::path corpus;
  std::size_t dim = 0;
  corpus::LatentId latent_id = 0;
  corpus::SelectionTarget selection = corpus::SelectionTarget::fraction(0.02);
  metric::MetricConfig metric;
  layout::LayoutConfig layout;
  CartographyParams cartography;
  render::PanoramaConfig panorama;
  std::filesystem::path output_dir;
  std::vector<double> k_fractions;
  std::size_t tile_px = 256;
  /// Threads for distances, kNN and gain curves (0 = all cores). These
  /// results do not depend on the worker count.
  unsigned workers = 0;

  PipelineConfig();

  /// Seeds the layout and the renderer.
  void set_seed(std::uint64_t seed);
  /// Checks every nested config. Throws ValidationError.
  void validate() const;
};

/// Parses the JSON config document. Relative paths resolve against
/// `base_dir`. Unknown keys are rejected.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

/// A stage aborted; `stage()` names it and what() carries the cause.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error(stage + " stage failed: " + cause), stage_(std::move(stage)) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// File names inside a stage working directory.
namespace files {
inline constexpr const char* kSlice = "slice.json";
inline constexpr const char* kDistances = "distances.bin";
inline constexpr const char* kEmbedding = "embedding.csv";
inline constexpr const char* kFidelity = "fidelity.csv";
inline constexpr const char* kMap = "map.json";
inline constexpr const char* kPanorama = "panorama.png";
inline constexpr const char* kProvenance = "panorama.json";
}  // namespace files

/// Distance cache: "VDM1", uint64 n, then n * n little-endian doubles.
void save_distances(const metric::DistanceMatrix& d, const std::filesystem::path& path);
metric::DistanceMatrix load_distances(const std::filesystem::path& path);

/// Output of the cartography stage.
struct MapArtifacts {
  cartography::ClusterSet clusters;
  std::vector<cartography::ClusterEdge> connections;
  cartography::RenderPlan plan;

  friend bool operator==(const MapArtifacts&, const MapArtifacts&) = default;
};

void save_map(const MapArtifacts& m, const std::filesystem::path& path);
MapArtifacts load_map(const std::filesystem::path& path);

/// Individual stages. Each reads what it needs from `in` and writes into
/// `out`; when the two differ, upstream intermediates are carried over so
/// `out` can feed the next stage on its own. Failures raise StageError.
void stage_select(const PipelineConfig& cfg, const std::filesystem::path& corpus_path,
                  const std::filesystem::path& out);
void stage_layout(const PipelineConfig& cfg, const std::filesystem::path& in,
                  const std::filesystem::path& out);
void stage_map(const PipelineConfig& cfg, const std::filesystem::path& in,
               const std::filesystem::path& out);
void stage_render(const PipelineConfig& cfg, const std::filesystem::path& in,
                  const std::filesystem::path& out);
AtlasBundle stage_export(const PipelineConfig& cfg, const std::filesystem::path& in,
                         const std::filesystem::path& out);

/// Exclusive marker file guarding one output directory; removed on
/// destruction. Throws ValidationError when the directory is already locked.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

/// All stages in order. Intermediates go to output_dir/intermediate, the
/// bundle to output_dir. Per-stage timings are written to `log`.
AtlasBundle run_pipeline(const PipelineConfig& cfg, std::ostream& log);
AtlasBundle run_pipeline(const PipelineConfig& cfg);

}  // namespace vista::atlas
