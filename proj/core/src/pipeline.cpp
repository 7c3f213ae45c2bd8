#include "vista/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "vista/cartography.hpp"
#include "vista/neighbors.hpp"

namespace vista::atlas {

namespace fs = std::filesystem;
using nlohmann::json;

void CartographyParams::validate() const {
  if (grid_w < 8) throw ValidationError("cartography: grid_w must be >= 8");
  if (!(bandwidth >= 0.0) || !std::isfinite(bandwidth)) {
    throw ValidationError("cartography: bandwidth must be >= 0 (0 = default)");
  }
  if (!(padding >= 0.0) || !std::isfinite(padding)) {
    throw ValidationError("cartography: padding must be >= 0");
  }
  if (!(quantile > 0.0 && quantile < 1.0)) {
    throw ValidationError("cartography: quantile must lie in (0, 1)");
  }
  if (tiles_x < 1 || tiles_y < 1) throw ValidationError("cartography: tiles must be >= 1");
  if (min_points < 1) throw ValidationError("cartography: min_points must be >= 1");
}

PipelineConfig::PipelineConfig() {
  for (int i = 1; i <= 15; ++i) k_fractions.push_back(i / 100.0);
}

void PipelineConfig::set_seed(std::uint64_t seed) {
  layout.seed = seed;
  panorama.seed = seed;
}

void PipelineConfig::validate() const {
  if (corpus.empty()) throw ValidationError("config: corpus path is required");
  if (output_dir.empty()) throw ValidationError("config: output_dir is required");
  if (dim == 0) throw ValidationError("config: dim must be >= 1");
  if (latent_id >= dim) {
    throw ValidationError("config: latent_id " + std::to_string(latent_id) +
                          " is outside dim " + std::to_string(dim));
  }
  metric.validate();
  layout.validate();
  cartography.validate();
  panorama.validate(layout.aspect.ratio());
  if (cartography.tiles_x > panorama.width || cartography.tiles_y > panorama.height) {
    throw ValidationError("config: more tiles than panorama pixels");
  }
  if (tile_px < 64) throw ValidationError("config: tile_px must be >= 64");
  if (k_fractions.empty()) throw ValidationError("config: k_fractions must not be empty");
  for (std::size_t i = 0; i < k_fractions.size(); ++i) {
    if (!(k_fractions[i] > 0.0 && k_fractions[i] < 1.0)) {
      throw ValidationError("config: k_fractions must lie in (0, 1)");
    }
    if (i > 0 && !(k_fractions[i] > k_fractions[i - 1])) {
      throw ValidationError("config: k_fractions must be strictly increasing");
    }
  }
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir) {
  PipelineConfig cfg;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  try {
    check_keys(doc,
               {"corpus", "dim", "latent_id", "selection", "metric", "layout", "cartography",
                "panorama", "output_dir", "k_fractions", "tile_px", "workers", "seed"},
               "config");
    if (doc.contains("corpus")) cfg.corpus = resolve(base_dir, doc.at("corpus").get<std::string>());
    if (doc.contains("output_dir")) {
      cfg.output_dir = resolve(base_dir, doc.at("output_dir").get<std::string>());
    }
    read(doc, "dim", cfg.dim);
    read(doc, "latent_id", cfg.latent_id);
    read(doc, "k_fractions", cfg.k_fractions);
    read(doc, "tile_px", cfg.tile_px);
    read(doc, "workers", cfg.workers);

    if (doc.contains("selection")) {
      const auto& s = doc.at("selection");
      check_keys(s, {"fraction", "count"}, "selection");
      if (s.contains("fraction") == s.contains("count")) {
        throw ValidationError("config: selection needs exactly one of fraction or count");
      }
      cfg.selection = s.contains("fraction")
                          ? corpus::SelectionTarget::fraction(s.at("fraction").get<double>())
                          : corpus::SelectionTarget::count(s.at("count").get<std::size_t>());
    }
    if (doc.contains("metric")) {
      const auto& m = doc.at("metric");
      check_keys(m, {"axis_weight", "use_normalized_axis"}, "metric");
      read(m, "axis_weight", cfg.metric.axis_weight);
      read(m, "use_normalized_axis", cfg.metric.use_normalized_axis);
    }
    if (doc.contains("layout")) {
      const auto& l = doc.at("layout");
      check_keys(l,
                 {"n_neighbors", "min_dist", "spread", "epochs", "negative_sample_rate",
                  "learning_rate", "init", "seed", "aspect", "workers"},
                 "layout");
      read(l, "n_neighbors", cfg.layout.n_neighbors);
      read(l, "min_dist", cfg.layout.min_dist);
      read(l, "spread", cfg.layout.spread);
      read(l, "epochs", cfg.layout.epochs);
      read(l, "negative_sample_rate", cfg.layout.negative_sample_rate);
      read(l, "learning_rate", cfg.layout.learning_rate);
      read(l, "seed", cfg.layout.seed);
      read(l, "workers", cfg.layout.workers);
      if (l.contains("init")) {
        const auto init = l.at("init").get<std::string>();
        if (init == "spectral") {
          cfg.layout.init = layout::Init::Spectral;
        } else if (init == "random") {
          cfg.layout.init = layout::Init::Random;
        } else {
          throw ValidationError("config: layout.init must be 'spectral' or 'random'");
        }
      }
      if (l.contains("aspect")) {
        const auto a = l.at("aspect").get<std::vector<double>>();
        if (a.size() != 2) throw ValidationError("config: layout.aspect must be [width, height]");
        cfg.layout.aspect = {a[0], a[1]};
      }
    }
    if (doc.contains("cartography")) {
      const auto& c = doc.at("cartography");
      check_keys(c,
                 {"grid_w", "bandwidth", "padding", "quantile", "tiles_x", "tiles_y", "min_points",
                  "max_representatives"},
                 "cartography");
      read(c, "grid_w", cfg.cartography.grid_w);
      read(c, "bandwidth", cfg.cartography.bandwidth);
      read(c, "padding", cfg.cartography.padding);
      read(c, "quantile", cfg.cartography.quantile);
      read(c, "tiles_x", cfg.cartography.tiles_x);
      read(c, "tiles_y", cfg.cartography.tiles_y);
      read(c, "min_points", cfg.cartography.min_points);
      read(c, "max_representatives", cfg.cartography.max_representatives);
    }
    if (doc.contains("panorama")) {
      const auto& p = doc.at("panorama");
      check_keys(p, {"width", "height", "steps", "seed", "backend", "remote"}, "panorama");
      read(p, "width", cfg.panorama.width);
      read(p, "height", cfg.panorama.height);
      read(p, "steps", cfg.panorama.steps);
      read(p, "seed", cfg.panorama.seed);
      if (p.contains("backend")) {
        const auto backend = p.at("backend").get<std::string>();
        if (backend == "mock") {
          cfg.panorama.backend = render::BackendKind::Mock;
        } else if (backend == "remote") {
          cfg.panorama.backend = render::BackendKind::Remote;
        } else {
          throw ValidationError("config: panorama.backend must be 'mock' or 'remote'");
        }
      }
      if (p.contains("remote")) {
        const auto& r = p.at("remote");
        check_keys(r, {"url", "retries", "retry_backoff_ms", "connect_timeout_s", "read_timeout_s"},
                   "panorama.remote");
        read(r, "url", cfg.panorama.remote.url);
        read(r, "retries", cfg.panorama.remote.retries);
        read(r, "retry_backoff_ms", cfg.panorama.remote.retry_backoff_ms);
        read(r, "connect_timeout_s", cfg.panorama.remote.connect_timeout_s);
        read(r, "read_timeout_s", cfg.panorama.remote.read_timeout_s);
      }
    }
    if (doc.contains("seed")) cfg.set_seed(doc.at("seed").get<std::uint64_t>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

void save_distances(const metric::DistanceMatrix& d, const fs::path& path) {
  static_assert(sizeof(double) == 8);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const std::uint64_t n = d.size();
  out.write("VDM1", 4);
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(d.data().data()),
            static_cast<std::streamsize>(d.data().size() * sizeof(double)));
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

metric::DistanceMatrix load_distances(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  std::uint64_t n = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || std::memcmp(magic, "VDM1", 4) != 0) {
    throw ValidationError(path.string() + ": not a distance cache");
  }
  const auto expected = static_cast<std::uintmax_t>(12 + n * n * sizeof(double));
  if (n > (1u << 20) || fs::file_size(path) != expected) {
    throw ValidationError(path.string() + ": truncated distance cache");
  }
  std::vector<double> data(n * n);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * 8));
  if (!in) throw IoError("read failed for " + path.string());
  return metric::DistanceMatrix(n, std::move(data));
}

namespace {

json bounds_to_json(const layout::Bounds& b) { return {b.min_x, b.min_y, b.max_x, b.max_y}; }

layout::Bounds bounds_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw ValidationError("map: bounds must have 4 numbers");
  return {v[0], v[1], v[2], v[3]};
}

}  // namespace

void save_map(const MapArtifacts& m, const fs::path& path) {
  json clusters = json::array();
  for (const auto& c : m.clusters.clusters) {
    json outline = json::array();
    for (const auto& ring : c.outline) {
      json r = json::array();
      for (const auto& p : ring) r.push_back({p.x, p.y});
      outline.push_back(std::move(r));
    }
    clusters.push_back({{"id", c.id},
                        {"cells", c.cells},
                        {"members", c.members},
                        {"medoid", c.medoid},
                        {"outline", std::move(outline)}});
  }
  json connections = json::array();
  for (const auto& e : m.connections) connections.push_back({e.a, e.b, e.strength});
  json regions = json::array();
  for (const auto& r : m.plan.regions) {
    regions.push_back({{"id", r.id},
                       {"tile", {r.tile_x, r.tile_y}},
                       {"bbox", {r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h}},
                       {"representatives", r.representatives},
                       {"schedule", r.schedule}});
  }
  const json doc = {{"clusters", std::move(clusters)},
                    {"assignment", m.clusters.assignment},
                    {"connections", std::move(connections)},
                    {"plan",
                     {{"steps", m.plan.steps},
                      {"width", m.plan.width},
                      {"height", m.plan.height},
                      {"bounds", bounds_to_json(m.plan.bounds)},
                      {"regions", std::move(regions)}}}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump() << '\n';
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

MapArtifacts load_map(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    const json doc = json::parse(in);
    MapArtifacts m;
    for (const auto& jc : doc.at("clusters")) {
      cartography::Cluster c;
      c.id = jc.at("id").get<std::uint32_t>();
      c.cells = jc.at("cells").get<std::vector<std::size_t>>();
      c.members = jc.at("members").get<std::vector<std::size_t>>();
      c.medoid = jc.at("medoid").get<std::size_t>();
      for (const auto& jr : jc.at("outline")) {
        cartography::Ring ring;
        for (const auto& p : jr) ring.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        c.outline.push_back(std::move(ring));
      }
      m.clusters.clusters.push_back(std::move(c));
    }
    m.clusters.assignment = doc.at("assignment").get<std::vector<std::uint32_t>>();
    for (const auto& je : doc.at("connections")) {
      m.connections.push_back(
          {je.at(0).get<std::uint32_t>(), je.at(1).get<std::uint32_t>(), je.at(2).get<double>()});
    }
    const auto& jp = doc.at("plan");
    m.plan.steps = jp.at("steps").get<std::size_t>();
    m.plan.width = jp.at("width").get<std::size_t>();
    m.plan.height = jp.at("height").get<std::size_t>();
    m.plan.bounds = bounds_from_json(jp.at("bounds"));
    for (const auto& jr : jp.at("regions")) {
      cartography::RenderRegion r;
      r.id = jr.at("id").get<std::string>();
      r.tile_x = jr.at("tile").at(0).get<std::size_t>();
      r.tile_y = jr.at("tile").at(1).get<std::size_t>();
      const auto& b = jr.at("bbox");
      r.bbox = {b.at(0).get<std::size_t>(), b.at(1).get<std::size_t>(), b.at(2).get<std::size_t>(),
                b.at(3).get<std::size_t>()};
      r.representatives = jr.at("representatives").get<std::vector<std::size_t>>();
      r.schedule = jr.at("schedule").get<std::vector<std::size_t>>();
      m.plan.regions.push_back(std::move(r));
    }
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

namespace {

template <typename Fn>
auto guarded(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

void prepare(const fs::path& in, const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  if (in.empty() || !fs::exists(in) || fs::equivalent(in, out)) return;
  for (const char* name : {files::kSlice, files::kDistances, files::kEmbedding, files::kFidelity,
                           files::kMap, files::kPanorama, files::kProvenance}) {
    if (fs::exists(in / name)) {
      fs::copy_file(in / name, out / name, fs::copy_options::overwrite_existing, ec);
      if (ec) throw IoError("cannot copy " + (in / name).string() + ": " + ec.message());
    }
  }
}

layout::Embedding2D load_embedding(const fs::path& dir, const corpus::LatentSlice& slice,
                                   const layout::Aspect& aspect) {
  const auto rows = layout::read_embedding_csv(dir / files::kEmbedding);
  if (rows.size() != slice.size()) throw ValidationError("embedding and slice sizes differ");
  layout::Embedding2D emb;
  emb.aspect = aspect;
  emb.coords.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].id != slice.members[i].item.id) {
      throw ValidationError("embedding row " + std::to_string(i) + " is '" + rows[i].id +
                            "', slice has '" + slice.members[i].item.id + "'");
    }
    emb.coords.push_back(rows[i].p);
  }
  emb.bounds = layout::bounds_of(emb.coords);
  return emb;
}

std::vector<std::string> slice_ids(const corpus::LatentSlice& slice) {
  std::vector<std::string> ids;
  ids.reserve(slice.size());
  for (const auto& m : slice.members) ids.push_back(m.item.id);
  return ids;
}

std::vector<corpus::Item> slice_items(const corpus::LatentSlice& slice) {
  std::vector<corpus::Item> items;
  items.reserve(slice.size());
  for (const auto& m : slice.members) items.push_back(m.item);
  return items;
}

cartography::DensityField density_for(const PipelineConfig& cfg, const layout::Embedding2D& emb) {
  const auto& c = cfg.cartography;
  const double bw = c.bandwidth > 0.0 ? c.bandwidth : cartography::default_bandwidth(emb.bounds);
  return cartography::estimate_density(emb, c.grid_w, bw, c.padding);
}

}  // namespace

void stage_select(const PipelineConfig& cfg, const fs::path& corpus_path, const fs::path& out) {
  guarded("select", [&] {
    prepare({}, out);
    const corpus::Corpus corpus = corpus::load_corpus(corpus_path, cfg.dim);
    corpus::LatentSlice slice = corpus::select_top_activating(corpus, cfg.latent_id, cfg.selection);
    if (slice.size() < 3) {
      throw ValidationError("latent " + std::to_string(cfg.latent_id) + " activates only " +
                            std::to_string(slice.size()) + " items");
    }
    corpus::normalize_activations(slice);
    corpus::save_slice(slice, out / files::kSlice);
  });
}

void stage_layout(const PipelineConfig& cfg, const fs::path& in, const fs::path& out) {
  guarded("layout", [&] {
    prepare(in, out);
    const auto slice = corpus::load_slice(out / files::kSlice);
    const auto dist = metric::pairwise_distances(slice, cfg.metric, cfg.workers);
    save_distances(dist, out / files::kDistances);
    const auto emb = layout::embed(dist, cfg.layout, cfg.workers);
    layout::write_embedding_csv(slice_ids(slice), emb, out / files::kEmbedding);
    const auto curve = layout::layout_fidelity(dist, emb, cfg.k_fractions, cfg.workers);
    neighbors::write_gain_csv(curve, out / files::kFidelity);
  });
}

void stage_map(const PipelineConfig& cfg, const fs::path& in, const fs::path& out) {
  guarded("map", [&] {
    prepare(in, out);
    const auto slice = corpus::load_slice(out / files::kSlice);
    const auto dist = load_distances(out / files::kDistances);
    if (dist.size() != slice.size()) throw ValidationError("distance cache does not match slice");
    const auto emb = load_embedding(out, slice, cfg.layout.aspect);
    const auto& c = cfg.cartography;

    MapArtifacts m;
    const auto density = density_for(cfg, emb);
    m.clusters = cartography::extract_clusters(density, emb, dist, c.quantile);
    const std::size_t k = std::min(cfg.layout.n_neighbors, dist.size() - 1);
    m.connections = cartography::cluster_connections(m.clusters,
                                                     neighbors::knn_exact(dist, k, cfg.workers));
    const auto grid = cartography::assign_items(emb, c.tiles_x, c.tiles_y);
    std::vector<std::vector<std::size_t>> reps(grid.tiles.size());
    for (std::size_t t = 0; t < grid.tiles.size(); ++t) {
      if (!grid.tiles[t].empty()) {
        reps[t] = cartography::choose_representatives(grid.tiles[t], dist, c.min_points,
                                                      c.max_representatives);
      }
    }
    m.plan = cartography::build_render_plan(grid, reps, cfg.panorama.steps, cfg.panorama.width,
                                            cfg.panorama.height);
    save_map(m, out / files::kMap);
  });
}

void stage_render(const PipelineConfig& cfg, const fs::path& in, const fs::path& out) {
  guarded("render", [&] {
    prepare(in, out);
    const auto slice = corpus::load_slice(out / files::kSlice);
    const auto emb = load_embedding(out, slice, cfg.layout.aspect);
    const auto map = load_map(out / files::kMap);
    cfg.panorama.validate(emb.aspect.ratio());
    const auto items = slice_items(slice);
    const auto pano = render::render(map.plan, items, density_for(cfg, emb), cfg.panorama);
    render::save_panorama(pano, out / files::kPanorama);
    const json prov = {{"backend", pano.provenance.backend},
                       {"config_hash", pano.provenance.config_hash}};
    std::ofstream p(out / files::kProvenance, std::ios::binary | std::ios::trunc);
    p << prov.dump(1) << '\n';
    if (!p.flush()) throw IoError("cannot write " + (out / files::kProvenance).string());
  });
}

AtlasBundle stage_export(const PipelineConfig& cfg, const fs::path& in, const fs::path& out) {
  return guarded("export", [&] {
    const auto slice = corpus::load_slice(in / files::kSlice);
    const auto emb = load_embedding(in, slice, cfg.layout.aspect);
    const auto map = load_map(in / files::kMap);
    const auto curve = neighbors::read_gain_csv(in / files::kFidelity, slice.size());
    render::Provenance prov;
    {
      std::ifstream p(in / files::kProvenance, std::ios::binary);
      if (!p) throw IoError("cannot open " + (in / files::kProvenance).string());
      try {
        const json j = json::parse(p);
        prov.backend = j.at("backend").get<std::string>();
        prov.config_hash = j.at("config_hash").get<std::string>();
      } catch (const json::exception& e) {
        throw ValidationError(std::string("panorama provenance: ") + e.what());
      }
    }
    const auto pyramid = build_tile_pyramid(render::load_panorama(in / files::kPanorama), cfg.tile_px);
    return export_bundle({slice, emb, map.clusters, map.connections, curve, pyramid, prov}, out);
  });
}

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".vista.lock") {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::FILE* f = std::fopen(path_.string().c_str(), "wx");
  if (!f) {
    throw ValidationError("output directory " + dir.string() +
                          " is locked by another run (remove " + path_.string() + " if stale)");
  }
  std::fclose(f);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

AtlasBundle run_pipeline(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  DirectoryLock lock(cfg.output_dir);
  const fs::path work = cfg.output_dir / "intermediate";
  const auto total = std::chrono::steady_clock::now();

  auto timed = [&](const char* name, auto&& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    log << "vista: " << std::left << std::setw(7) << name << std::right << std::fixed
        << std::setprecision(3) << dt.count() << " s\n";
  };

  timed("select", [&] { stage_select(cfg, cfg.corpus, work); });
  timed("layout", [&] { stage_layout(cfg, work, work); });
  timed("map", [&] { stage_map(cfg, work, work); });
  timed("render", [&] { stage_render(cfg, work, work); });
  AtlasBundle bundle;
  timed("export", [&] { bundle = stage_export(cfg, work, cfg.output_dir); });

  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - total;
  log << "vista: total   " << std::fixed << std::setprecision(3) << dt.count() << " s, "
      << bundle.items << " items, " << bundle.clusters << " clusters, " << bundle.levels
      << " pyramid levels -> " << bundle.manifest.string() << '\n';
  log.unsetf(std::ios::floatfield);
  return bundle;
}

AtlasBundle run_pipeline(const PipelineConfig& cfg) { return run_pipeline(cfg, std::clog); }

}  // namespace vista::atlas
