#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "vista/cartography.hpp"
#include "vista/corpus.hpp"
#include "vista/error.hpp"
#include "vista/image.hpp"

namespace vista::render {

enum class BackendKind { Mock, Remote };

struct RemoteOptions {
  /// Base URL, e.g. "http://localhost:8080" or "http://host:port/prefix";
  /// the request goes to {url}/render.
  std::string url;
  /// Extra attempts after the first on connection failures and 5xx replies.
  unsigned retries = 2;
  unsigned retry_backoff_ms = 250;
  unsigned connect_timeout_s = 10;
  /// Diffusion at panorama scale takes hours.
  unsigned read_timeout_s = 6 * 3600;
  /// Set to true from another thread to abandon the wait.
  const std::atomic<bool>* cancel = nullptr;
};

struct PanoramaConfig {
  std::size_t width = 1024;
  std::size_t height = 576;
  std::size_t steps = 100;
  std::uint64_t seed = 0;
  BackendKind backend = BackendKind::Mock;
  RemoteOptions remote;

  /// Checks sizes and steps; `aspect_ratio` > 0 also checks width/height
  /// against the embedding aspect within 1%.
  void validate(double aspect_ratio = 0.0) const;
};

struct Provenance {
  std::string backend;
  std::string config_hash;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Panorama {
  Image image;
  Provenance provenance;

  std::size_t width() const { return image.width; }
  std::size_t height() const { return image.height; }
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Hash over the plan, prompts, configuration and backend identity.
std::string provenance_hash(const cartography::RenderPlan& plan,
                            std::span<const corpus::Item> items, const PanoramaConfig& cfg);

/// Deterministic stand-in for the diffusion service: density-shaded
/// background, one flat-tinted rectangle per region keyed on its step-0 item,
/// and that item's caption stamped in a bitmap font.
Panorama render_mock(const cartography::RenderPlan& plan, std::span<const corpus::Item> items,
                     const cartography::DensityField& density, const PanoramaConfig& cfg);

enum class RemoteFailure { Connection, Server, Protocol, Dimension, Cancelled };

class RemoteError : public Error {
 public:
  RemoteError(RemoteFailure kind, unsigned attempts, const std::string& what)
      : Error(what), kind_(kind), attempts_(attempts) {}

  RemoteFailure kind() const { return kind_; }
  unsigned attempts() const { return attempts_; }

 private:
  RemoteFailure kind_;
  unsigned attempts_;
};

/// JSON request body of the render wire protocol.
std::string render_request_json(const cartography::RenderPlan& plan,
                                std::span<const corpus::Item> items, const PanoramaConfig& cfg);

/// POSTs the plan to {cfg.remote.url}/render and decodes the PNG reply.
Panorama render_remote(const cartography::RenderPlan& plan, std::span<const corpus::Item> items,
                       const PanoramaConfig& cfg);

/// Dispatches on cfg.backend.
Panorama render(const cartography::RenderPlan& plan, std::span<const corpus::Item> items,
                const cartography::DensityField& density, const PanoramaConfig& cfg);

void save_panorama(const Panorama& p, const std::filesystem::path& path);
Image load_panorama(const std::filesystem::path& path);

}  // namespace vista::render
