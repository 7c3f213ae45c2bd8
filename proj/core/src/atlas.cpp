#include "vista/atlas.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "vista/error.hpp"

namespace vista::atlas {

namespace {

using nlohmann::json;

json bounds_json(const layout::Bounds& b) {
  return {{"min_x", b.min_x}, {"min_y", b.min_y}, {"max_x", b.max_x}, {"max_y", b.max_y}};
}

json ring_json(const cartography::Ring& ring) {
  json out = json::array();
  for (const auto& p : ring) out.push_back(json::array({p.x, p.y}));
  return out;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError(std::string("atlas: missing key '") + key + "'");
  }
  return obj.at(key);
}

}  // namespace

std::string manifest_json(const BundleContents& c) {
  const auto& members = c.slice.members;
  if (c.embedding.size() != members.size()) {
    throw ValidationError("atlas: embedding and slice sizes differ");
  }
  if (c.clusters.assignment.size() != members.size()) {
    throw ValidationError("atlas: cluster assignment does not cover the slice");
  }
  if (c.pyramid.levels.empty()) throw ValidationError("atlas: empty pyramid");

  json items = json::array();
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& p = c.embedding.coords[i];
    items.push_back({{"id", members[i].item.id},
                     {"text", members[i].item.text},
                     {"x", p.x},
                     {"y", p.y},
                     {"norm_activation", members[i].norm_activation},
                     {"raw_activation", members[i].raw_activation},
                     {"cluster", c.clusters.assignment[i]}});
  }

  json clusters = json::array();
  for (const auto& cl : c.clusters.clusters) {
    json outline = json::array();
    for (const auto& ring : cl.outline) outline.push_back(ring_json(ring));
    clusters.push_back({{"id", cl.id},
                        {"size", cl.members.size()},
                        {"medoid", members.at(cl.medoid).item.id},
                        {"outline", std::move(outline)}});
  }

  json connections = json::array();
  for (const auto& e : c.connections) {
    connections.push_back({{"a", e.a}, {"b", e.b}, {"strength", e.strength}});
  }

  json points = json::array();
  for (const auto& g : c.gain_curve.points) {
    points.push_back({{"k_fraction", g.k_fraction}, {"k", g.k}, {"mknn", g.mknn}, {"gain", g.gain}});
  }
  json gain = {{"n", c.gain_curve.n}, {"points", std::move(points)}};
  if (!c.gain_curve.points.empty()) {
    const auto& best = c.gain_curve.argmax();
    gain["argmax"] = {{"k_fraction", best.k_fraction}, {"k", best.k}, {"gain", best.gain}};
  }

  json levels = json::array();
  for (const auto& lvl : c.pyramid.levels) {
    levels.push_back({{"z", lvl.z},
                      {"width", lvl.image.width},
                      {"height", lvl.image.height},
                      {"tiles_x", lvl.tiles_x},
                      {"tiles_y", lvl.tiles_y}});
  }
  const auto& base = c.pyramid.levels.front().image;

  json doc = {
      {"schema", kSchemaVersion},
      {"latent_id", c.slice.latent_id},
      {"n", members.size()},
      {"source_size", c.slice.source_size},
      {"aspect", {{"width", c.embedding.aspect.width}, {"height", c.embedding.aspect.height}}},
      {"bounds", bounds_json(c.embedding.bounds)},
      {"items", std::move(items)},
      {"clusters", std::move(clusters)},
      {"connections", std::move(connections)},
      {"gain_curve", std::move(gain)},
      {"pyramid",
       {{"tile_px", c.pyramid.tile_px},
        {"width", base.width},
        {"height", base.height},
        {"path", "tiles/{z}/{x}/{y}.png"},
        {"levels", std::move(levels)}}},
      {"panorama",
       {{"backend", c.provenance.backend}, {"config_hash", c.provenance.config_hash}}},
  };
  return doc.dump(1) + "\n";
}

AtlasBundle export_bundle(const BundleContents& contents, const std::filesystem::path& out_dir) {
  const std::string text = manifest_json(contents);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const auto tiles = out_dir / "tiles";
  std::filesystem::remove_all(tiles, ec);
  write_pyramid(contents.pyramid, tiles);

  const auto manifest = out_dir / "atlas.json";
  std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out.flush()) throw IoError("cannot write " + manifest.string());

  AtlasBundle b;
  b.dir = out_dir;
  b.manifest = manifest;
  b.items = contents.slice.size();
  b.clusters = contents.clusters.clusters.size();
  b.levels = contents.pyramid.levels.size();
  return b;
}

AtlasBundle validate_bundle(const std::filesystem::path& dir) {
  const auto manifest = dir / "atlas.json";
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw IoError("cannot read " + manifest.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("atlas: " + std::string(e.what()));
  }

  try {
    if (require(doc, "schema") != kSchemaVersion) {
      throw ValidationError("atlas: unsupported schema " + doc["schema"].dump());
    }
    require(doc, "latent_id").get<std::uint64_t>();
    require(doc, "aspect");
    const auto& b = require(doc, "bounds");
    const layout::Bounds bounds{require(b, "min_x").get<double>(), require(b, "min_y").get<double>(),
                                require(b, "max_x").get<double>(), require(b, "max_y").get<double>()};

    std::set<std::uint64_t> cluster_ids;
    const auto& clusters = require(doc, "clusters");
    for (const auto& cl : clusters) {
      if (!cluster_ids.insert(require(cl, "id").get<std::uint64_t>()).second) {
        throw ValidationError("atlas: duplicate cluster id");
      }
      for (const auto& ring : require(cl, "outline")) {
        if (ring.size() < 4 || ring.front() != ring.back()) {
          throw ValidationError("atlas: cluster outline ring is not closed");
        }
      }
    }

    const auto& items = require(doc, "items");
    if (items.size() != require(doc, "n").get<std::size_t>()) {
      throw ValidationError("atlas: item count differs from n");
    }
    std::set<std::string> ids;
    for (const auto& it : items) {
      if (!ids.insert(require(it, "id").get<std::string>()).second) {
        throw ValidationError("atlas: duplicate item id " + it["id"].get<std::string>());
      }
      require(it, "text").get<std::string>();
      require(it, "norm_activation").get<double>();
      const metric::Point2 p{require(it, "x").get<double>(), require(it, "y").get<double>()};
      if (!bounds.contains(p)) {
        throw ValidationError("atlas: item " + it["id"].get<std::string>() + " lies outside the bounds");
      }
      if (!cluster_ids.empty() && !cluster_ids.count(require(it, "cluster").get<std::uint64_t>())) {
        throw ValidationError("atlas: item " + it["id"].get<std::string>() + " names an unknown cluster");
      }
    }

    for (const auto& e : require(doc, "connections")) {
      if (!cluster_ids.count(require(e, "a").get<std::uint64_t>()) ||
          !cluster_ids.count(require(e, "b").get<std::uint64_t>())) {
        throw ValidationError("atlas: connection names an unknown cluster");
      }
      require(e, "strength").get<double>();
    }

    for (const auto& g : require(require(doc, "gain_curve"), "points")) {
      require(g, "k_fraction").get<double>();
      require(g, "k").get<std::size_t>();
      require(g, "gain").get<double>();
    }

    const auto& pyr = require(doc, "pyramid");
    const auto tile_px = require(pyr, "tile_px").get<std::size_t>();
    const auto width = require(pyr, "width").get<std::size_t>();
    const auto height = require(pyr, "height").get<std::size_t>();
    const auto& levels = require(pyr, "levels");
    if (tile_px == 0 || levels.size() != pyramid_level_count(width, height, tile_px)) {
      throw ValidationError("atlas: pyramid level count mismatch");
    }
    const std::size_t tx0 = ceil_div(width, tile_px);
    const std::size_t ty0 = ceil_div(height, tile_px);
    for (std::size_t z = 0; z < levels.size(); ++z) {
      const auto& lvl = levels[z];
      const std::size_t scale = std::size_t{1} << z;
      const std::size_t w = ceil_div(width, scale);
      const std::size_t h = ceil_div(height, scale);
      const std::size_t tx = ceil_div(tx0, scale);
      const std::size_t ty = ceil_div(ty0, scale);
      if (require(lvl, "z").get<std::size_t>() != z || lvl.at("width") != w ||
          lvl.at("height") != h || lvl.at("tiles_x") != tx || lvl.at("tiles_y") != ty) {
        throw ValidationError("atlas: pyramid level " + std::to_string(z) + " has wrong dimensions");
      }
      for (std::size_t x = 0; x < tx; ++x) {
        for (std::size_t y = 0; y < ty; ++y) {
          const auto tile = dir / "tiles" / std::to_string(z) / std::to_string(x) /
                            (std::to_string(y) + ".png");
          if (!std::filesystem::is_regular_file(tile)) {
            throw ValidationError("atlas: missing tile " + tile.string());
          }
        }
      }
    }

    AtlasBundle out;
    out.dir = dir;
    out.manifest = manifest;
    out.items = items.size();
    out.clusters = clusters.size();
    out.levels = levels.size();
    return out;
  } catch (const json::exception& e) {
    throw ValidationError("atlas: " + std::string(e.what()));
  }
}

}  // namespace vista::atlas
