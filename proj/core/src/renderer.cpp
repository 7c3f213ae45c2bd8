#include "vista/renderer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "vista/format.hpp"

namespace vista::render {

using cartography::RenderPlan;

void PanoramaConfig::validate(double aspect_ratio) const {
  if (width < 64 || height < 64) throw ValidationError("panorama: width and height must be >= 64");
  if (steps < 1) throw ValidationError("panorama: steps must be >= 1");
  if (aspect_ratio > 0.0) {
    const double ratio = static_cast<double>(width) / static_cast<double>(height);
    if (std::abs(ratio - aspect_ratio) > 0.01 * aspect_ratio) {
      throw ValidationError("panorama: " + std::to_string(width) + "x" + std::to_string(height) +
                            " does not match the embedding aspect " + format_double(aspect_ratio) +
                            " within 1%");
    }
  }
  if (backend == BackendKind::Remote && remote.url.empty()) {
    throw ValidationError("panorama: remote backend needs a url");
  }
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

const std::string& item_text(std::span<const corpus::Item> items, std::size_t index) {
  if (index >= items.size()) throw ValidationError("render: plan references unknown item");
  return items[index].text;
}

std::string backend_id(const PanoramaConfig& cfg) {
  return cfg.backend == BackendKind::Mock ? std::string("mock") : "remote:" + cfg.remote.url;
}

void check_plan(const RenderPlan& plan, const PanoramaConfig& cfg) {
  if (plan.width != cfg.width || plan.height != cfg.height) {
    throw ValidationError("render: plan is " + std::to_string(plan.width) + "x" +
                          std::to_string(plan.height) + " but panorama is " +
                          std::to_string(cfg.width) + "x" + std::to_string(cfg.height));
  }
  if (plan.steps != cfg.steps) throw ValidationError("render: plan and panorama step counts differ");
  for (const auto& r : plan.regions) {
    if (r.bbox.x + r.bbox.w > cfg.width || r.bbox.y + r.bbox.h > cfg.height) {
      throw ValidationError("render: region " + r.id + " lies outside the panorama");
    }
    if (r.schedule.size() != plan.steps) {
      throw ValidationError("render: region " + r.id + " schedule length differs from steps");
    }
  }
}

struct Rgb {
  std::uint8_t r, g, b;
};

Rgb shade(double t) {
  // Background to ink ramp for the density shading.
  constexpr double ground[3] = {246.0, 241.0, 228.0};
  constexpr double ink[3] = {58.0, 86.0, 132.0};
  t = std::clamp(t, 0.0, 1.0);
  auto mix = [&](int c) {
    return static_cast<std::uint8_t>(std::lround(ground[c] + (ink[c] - ground[c]) * t));
  };
  return {mix(0), mix(1), mix(2)};
}

double sample_density(const cartography::DensityField& f, double x, double y) {
  const double fx = (x - f.bounds.min_x) / f.cell_width() - 0.5;
  const double fy = (y - f.bounds.min_y) / f.cell_height() - 0.5;
  const double cx = std::clamp(fx, 0.0, static_cast<double>(f.width - 1));
  const double cy = std::clamp(fy, 0.0, static_cast<double>(f.height - 1));
  const auto x0 = static_cast<std::size_t>(std::floor(cx));
  const auto y0 = static_cast<std::size_t>(std::floor(cy));
  const std::size_t x1 = std::min(x0 + 1, f.width - 1);
  const std::size_t y1 = std::min(y0 + 1, f.height - 1);
  const double tx = cx - static_cast<double>(x0);
  const double ty = cy - static_cast<double>(y0);
  const double top = f.at(x0, y0) * (1.0 - tx) + f.at(x1, y0) * tx;
  const double bottom = f.at(x0, y1) * (1.0 - tx) + f.at(x1, y1) * tx;
  return top * (1.0 - ty) + bottom * ty;
}

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

}  // namespace

std::string provenance_hash(const RenderPlan& plan, std::span<const corpus::Item> items,
                            const PanoramaConfig& cfg) {
  std::string canon = backend_id(cfg);
  canon += "|w=" + std::to_string(cfg.width) + "|h=" + std::to_string(cfg.height) +
           "|steps=" + std::to_string(cfg.steps) + "|seed=" + std::to_string(cfg.seed);
  canon += "|bounds=" + format_double(plan.bounds.min_x) + "," + format_double(plan.bounds.min_y) +
           "," + format_double(plan.bounds.max_x) + "," + format_double(plan.bounds.max_y);
  for (const auto& r : plan.regions) {
    canon += "|r=" + r.id + ":" + std::to_string(r.bbox.x) + "," + std::to_string(r.bbox.y) +
             "," + std::to_string(r.bbox.w) + "," + std::to_string(r.bbox.h);
    for (auto s : r.schedule) {
      canon += ";";
      canon += std::to_string(s);
      canon += "=";
      canon += item_text(items, s);
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(canon)));
  return buf;
}

Panorama render_mock(const RenderPlan& plan, std::span<const corpus::Item> items,
                     const cartography::DensityField& density, const PanoramaConfig& cfg) {
  cfg.validate();
  check_plan(plan, cfg);
  if (density.width == 0 || density.height == 0) throw ValidationError("render: empty density field");

  double peak = 0.0;
  for (double v : density.cells) peak = std::max(peak, v);
  const double inv_peak = peak > 0.0 ? 1.0 / peak : 0.0;

  Panorama pano;
  pano.image = Image(cfg.width, cfg.height);
  const auto& b = plan.bounds;
  const double map_w = b.width() > 0.0 ? b.width() : density.bounds.width();
  const double map_h = b.height() > 0.0 ? b.height() : density.bounds.height();
  const double origin_x = b.width() > 0.0 ? b.min_x : density.bounds.min_x;
  const double origin_y = b.height() > 0.0 ? b.min_y : density.bounds.min_y;
  for (std::size_t py = 0; py < cfg.height; ++py) {
    const double y = origin_y + (static_cast<double>(py) + 0.5) / static_cast<double>(cfg.height) * map_h;
    for (std::size_t px = 0; px < cfg.width; ++px) {
      const double x = origin_x + (static_cast<double>(px) + 0.5) / static_cast<double>(cfg.width) * map_w;
      const Rgb c = shade(sample_density(density, x, y) * inv_peak);
      std::uint8_t* p = pano.image.at(px, py);
      p[0] = c.r;
      p[1] = c.g;
      p[2] = c.b;
    }
  }

  for (const auto& r : plan.regions) {
    if (r.schedule.empty() || r.bbox.w == 0 || r.bbox.h == 0) continue;
    if (r.schedule.front() >= items.size()) {
      throw ValidationError("render: plan references unknown item");
    }
    const corpus::Item& lead = items[r.schedule.front()];
    const std::uint64_t h = fnv1a(lead.id);
    const Rgb tint{static_cast<std::uint8_t>(96 + (h & 0x9f)),
                   static_cast<std::uint8_t>(96 + ((h >> 8) & 0x9f)),
                   static_cast<std::uint8_t>(96 + ((h >> 16) & 0x9f))};
    for (std::size_t py = r.bbox.y; py < r.bbox.y + r.bbox.h; ++py) {
      for (std::size_t px = r.bbox.x; px < r.bbox.x + r.bbox.w; ++px) {
        std::uint8_t* p = pano.image.at(px, py);
        const bool edge = px == r.bbox.x || py == r.bbox.y || px + 1 == r.bbox.x + r.bbox.w ||
                          py + 1 == r.bbox.y + r.bbox.h;
        const int divisor = edge ? 3 : 2;
        p[0] = static_cast<std::uint8_t>((p[0] + tint.r) / divisor);
        p[1] = static_cast<std::uint8_t>((p[1] + tint.g) / divisor);
        p[2] = static_cast<std::uint8_t>((p[2] + tint.b) / divisor);
      }
    }
    const int luma = (299 * tint.r + 587 * tint.g + 114 * tint.b) / 1000;
    const std::uint8_t ink[3] = {static_cast<std::uint8_t>(luma > 110 ? 20 : 240),
                                 static_cast<std::uint8_t>(luma > 110 ? 20 : 240),
                                 static_cast<std::uint8_t>(luma > 110 ? 28 : 240)};
    const std::size_t scale = std::max<std::size_t>(1, r.bbox.h / 96);
    draw_text(pano.image, lead.text, r.bbox.x + 2, r.bbox.y + 2, r.bbox.x, r.bbox.y, r.bbox.w,
              r.bbox.h, ink, scale);
  }
  pano.provenance = {"mock", provenance_hash(plan, items, cfg)};
  return pano;
}

std::string render_request_json(const RenderPlan& plan, std::span<const corpus::Item> items,
                                const PanoramaConfig& cfg) {
  nlohmann::ordered_json body;
  body["width"] = cfg.width;
  body["height"] = cfg.height;
  body["steps"] = cfg.steps;
  body["seed"] = cfg.seed;
  auto regions = nlohmann::ordered_json::array();
  for (const auto& r : plan.regions) {
    nlohmann::ordered_json region;
    region["id"] = r.id;
    region["bbox"] = {r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h};
    auto prompts = nlohmann::ordered_json::array();
    for (auto s : r.schedule) prompts.push_back(item_text(items, s));
    region["prompts"] = std::move(prompts);
    regions.push_back(std::move(region));
  }
  body["regions"] = std::move(regions);
  return body.dump();
}

Panorama render_remote(const RenderPlan& plan, std::span<const corpus::Item> items,
                       const PanoramaConfig& cfg) {
  cfg.validate();
  check_plan(plan, cfg);
  const auto& opt = cfg.remote;
  if (opt.url.empty()) throw ValidationError("render: remote backend needs a url");
  const auto [base, prefix] = split_url(opt.url);
  const std::string body = render_request_json(plan, items, cfg);

  httplib::Client client(base);
  client.set_connection_timeout(static_cast<time_t>(opt.connect_timeout_s), 0);
  client.set_read_timeout(static_cast<time_t>(opt.read_timeout_s), 0);
  client.set_write_timeout(static_cast<time_t>(opt.read_timeout_s), 0);
  if (!client.is_valid()) {
    throw RemoteError(RemoteFailure::Connection, 0, "render: invalid remote url '" + opt.url + "'");
  }

  const unsigned max_attempts = opt.retries + 1;
  std::string last_error;
  for (unsigned attempt = 1; attempt <= max_attempts; ++attempt) {
    auto cancelled = [&] { return opt.cancel && opt.cancel->load(); };
    if (cancelled()) throw RemoteError(RemoteFailure::Cancelled, attempt - 1, "render: cancelled");
    auto res = client.Post(prefix + "/render", body, "application/json",
                           [&](std::uint64_t, std::uint64_t) { return !cancelled(); });
    if (!res) {
      if (res.error() == httplib::Error::Canceled || cancelled()) {
        throw RemoteError(RemoteFailure::Cancelled, attempt, "render: cancelled");
      }
      last_error = "connection failure: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      Panorama pano;
      try {
        const auto* data = reinterpret_cast<const std::uint8_t*>(res->body.data());
        pano.image = decode_png({data, res->body.size()});
      } catch (const ValidationError& e) {
        throw RemoteError(RemoteFailure::Protocol, attempt,
                          std::string("render: response is not a PNG: ") + e.what());
      }
      if (pano.image.width != cfg.width || pano.image.height != cfg.height) {
        throw RemoteError(RemoteFailure::Dimension, attempt,
                          "render: server returned " + std::to_string(pano.image.width) + "x" +
                              std::to_string(pano.image.height) + ", expected " +
                              std::to_string(cfg.width) + "x" + std::to_string(cfg.height));
      }
      pano.provenance = {backend_id(cfg), provenance_hash(plan, items, cfg)};
      return pano;
    } else if (res->status >= 400 && res->status < 600) {
      std::string message = "HTTP " + std::to_string(res->status);
      try {
        const auto err = nlohmann::json::parse(res->body);
        message += ": " + err.at("error").get<std::string>();
      } catch (const nlohmann::json::exception&) {
        throw RemoteError(RemoteFailure::Protocol, attempt,
                          "render: " + message + " without a JSON error body");
      }
      if (res->status < 500) {
        throw RemoteError(RemoteFailure::Server, attempt, "render: server rejected request: " + message);
      }
      last_error = "server error: " + message;
      if (attempt == max_attempts) {
        throw RemoteError(RemoteFailure::Server, attempt,
                          "render: " + last_error + " after " + std::to_string(attempt) + " attempts");
      }
    } else {
      throw RemoteError(RemoteFailure::Protocol, attempt,
                        "render: unexpected HTTP status " + std::to_string(res->status));
    }
    if (attempt < max_attempts && opt.retry_backoff_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(opt.retry_backoff_ms * attempt));
    }
  }
  throw RemoteError(RemoteFailure::Connection, max_attempts,
                    "render: " + last_error + " after " + std::to_string(max_attempts) +
                        " attempts (" + opt.url + ")");
}

Panorama render(const RenderPlan& plan, std::span<const corpus::Item> items,
                const cartography::DensityField& density, const PanoramaConfig& cfg) {
  return cfg.backend == BackendKind::Mock ? render_mock(plan, items, density, cfg)
                                          : render_remote(plan, items, cfg);
}

void save_panorama(const Panorama& p, const std::filesystem::path& path) { write_png(p.image, path); }

Image load_panorama(const std::filesystem::path& path) { return read_png(path); }

}  // namespace vista::render
